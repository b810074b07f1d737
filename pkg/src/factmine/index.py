"""Exact top-k cosine retrieval over unit-norm document embeddings."""

import json
from dataclasses import dataclass

import numpy as np

from .encoder import encode_doc
from .errors import EmptyCandidateSet, MissingTextFeatures


@dataclass(frozen=True)
class ExclusionPolicy:
    exclude_self: bool = True
    exclude_same_patient: bool = True
    min_report_chars: int = 5

    def __post_init__(self):
        if self.min_report_chars < 0:
            raise ValueError("min_report_chars must be >= 0")


@dataclass
class EmbeddingIndex:
    """Immutable after build; unlimited concurrent readers."""

    doc_ids: list
    matrix: np.ndarray  # (n, e), unit-norm rows
    patient_ids: list
    report_chars: list


def build_index(corpus, params, split="train"):
    """Index the chosen split in corpus order."""
    docs = corpus.split(split)
    ids, rows, patients, chars = [], [], [], []
    for rec in docs:
        if rec.text_features is None:
            raise MissingTextFeatures(rec.report_id)
        ids.append(rec.report_id)
        rows.append(encode_doc(params, rec.image_features, rec.text_features))
        patients.append(rec.patient_id)
        chars.append(len(rec.report_text))
    matrix = np.stack(rows) if rows else np.zeros((0, params.embedding_dim))
    return EmbeddingIndex(ids, matrix, patients, chars)


def _scores(index, query_embedding):
    # Single scoring route for every caller so batch and per-query paths
    # are bit-identical (BLAS gemm and gemv reduce in different orders).
    return index.matrix @ np.asarray(query_embedding, dtype=np.float64)


def _eligible(index, policy, query_identity):
    report_id, patient_id = query_identity
    mask = np.ones(len(index.doc_ids), dtype=bool)
    for i, doc_id in enumerate(index.doc_ids):
        if policy.exclude_self and doc_id == report_id:
            mask[i] = False
        elif policy.exclude_same_patient and index.patient_ids[i] == patient_id:
            mask[i] = False
        elif index.report_chars[i] < policy.min_report_chars:
            mask[i] = False
    return mask


def search(index, query_embedding, k, policy, query_identity):
    """Exact top-k by dot product among non-excluded rows.

    Descending score, ties by ascending doc_id. Returns fewer than k
    entries when exclusions exhaust the corpus beyond that point.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    mask = _eligible(index, policy, query_identity)
    if not mask.any():
        raise EmptyCandidateSet(f"no eligible documents for query {query_identity[0]!r}")
    scores = _scores(index, query_embedding)
    candidates = np.flatnonzero(mask)
    order = sorted(candidates, key=lambda i: (-scores[i], index.doc_ids[i]))
    return [(index.doc_ids[i], float(scores[i])) for i in order[:k]]


def search_batch(index, query_embeddings, k, policy, identities):
    """Elementwise equal (and bit-identical) to per-query search."""
    if len(query_embeddings) != len(identities):
        raise ValueError("query_embeddings and identities must align")
    return [
        search(index, q, k, policy, ident)
        for q, ident in zip(query_embeddings, identities)
    ]


# --- checkpoint io ---------------------------------------------------------

INDEX_VERSION = "1"


def save_index(index, path):
    """JSON header line (ids + metadata) + row-major float64 little-endian matrix."""
    header = {
        "schema_version": INDEX_VERSION,
        "n": len(index.doc_ids),
        "embedding_dim": int(index.matrix.shape[1]),
        "doc_ids": list(index.doc_ids),
        "patient_ids": list(index.patient_ids),
        "report_chars": [int(c) for c in index.report_chars],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(index.matrix, dtype="<f8").tobytes())


def load_index(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        n, e = header["n"], header["embedding_dim"]
        buf = fh.read()
    matrix = np.frombuffer(buf, dtype="<f8").reshape(n, e).copy()
    return EmbeddingIndex(
        header["doc_ids"], matrix, header["patient_ids"], header["report_chars"]
    )
