"""Corpus contract: record types, JSONL parsing/validation, synthetic corpora.

Annotations (entity/relation graphs), diagnostic labels, and feature vectors
are inputs here; the models that produce them live upstream.
"""

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateId,
    MalformedRecord,
    UnknownLabelArity,
)

SCHEMA_VERSION = "1"

SPLITS = ("train", "validation", "test")

ENTITY_LABELS = ("ANAT-DP", "OBS-DP", "OBS-DA", "OBS-U")

RELATION_TYPES = ("modify", "located_at", "suggestive_of")

# Order is fixed; label vectors are positional.
OBSERVATIONS = ("Cardiomegaly", "Edema", "Consolidation", "Atelectasis", "Pleural Effusion")

_WS = re.compile(r"\s+")


def normalize_entity(token_text):
    """Lowercase, collapse internal whitespace, strip surrounding punctuation.

    May return an empty string; callers drop empty entities.
    """
    text = _WS.sub(" ", token_text.strip().lower())
    return text.strip(".,;:!?()[]{}\"'")


@dataclass(frozen=True)
class FactGraph:
    """Annotated entities and relations extracted from one report.

    entities: tuple of (token_text, entity_label)
    relations: tuple of (source_index, relation_type, target_index)
    """

    entities: tuple = ()
    relations: tuple = ()

    def validate(self):
        n = len(self.entities)
        for text, label in self.entities:
            if label not in ENTITY_LABELS:
                raise ValueError(f"unknown entity label {label!r}")
            if not normalize_entity(text):
                raise ValueError(f"entity text {text!r} empty after normalization")
        for src, rel, dst in self.relations:
            if rel not in RELATION_TYPES:
                raise ValueError(f"unknown relation type {rel!r}")
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError(f"relation ({src}, {rel}, {dst}) out of range for {n} entities")


@dataclass
class ReportRecord:
    report_id: str
    patient_id: str
    split: str
    report_text: str
    labels: tuple  # 5 binary indicators, OBSERVATIONS order
    graph: FactGraph
    image_features: np.ndarray
    text_features: np.ndarray = None  # optional: query-only records carry images only

    def validate(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if len(self.labels) != 5:
            raise UnknownLabelArity(len(self.labels))
        if any(v not in (0, 1) for v in self.labels):
            raise ValueError(f"labels must be binary, got {self.labels}")
        self.graph.validate()


@dataclass
class Corpus:
    """Immutable after load; safe for concurrent readers."""

    records: list
    d_img: int
    d_txt: int
    schema_version: str = SCHEMA_VERSION
    by_id: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.by_id:
            self.by_id = {r.report_id: r for r in self.records}

    def __len__(self):
        return len(self.records)

    def __getitem__(self, report_id):
        return self.by_id[report_id]

    def split(self, name):
        return [r for r in self.records if r.split == name]


def _parse_record(obj, d_img, d_txt, line_no):
    try:
        labels = tuple(int(v) for v in obj["labels"])
        if len(labels) != 5:
            raise UnknownLabelArity(len(labels))
        entities = tuple((str(t), str(l)) for t, l in obj["entities"])
        relations = tuple((int(s), str(r), int(d)) for s, r, d in obj["relations"])
        img = np.asarray(obj["image_features"], dtype=np.float64)
        txt = obj.get("text_features")
        txt = None if txt is None else np.asarray(txt, dtype=np.float64)
        rec = ReportRecord(
            report_id=str(obj["report_id"]),
            patient_id=str(obj["patient_id"]),
            split=str(obj["split"]),
            report_text=str(obj["report_text"]),
            labels=labels,
            graph=FactGraph(entities, relations),
            image_features=img,
            text_features=txt,
        )
        rec.validate()
    except UnknownLabelArity:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(line_no, str(exc)) from exc
    if img.shape != (d_img,):
        raise DimensionMismatch(
            f"line {line_no}: image_features has dim {img.shape}, corpus dim is {d_img}"
        )
    if txt is not None and txt.shape != (d_txt,):
        raise DimensionMismatch(
            f"line {line_no}: text_features has dim {txt.shape}, corpus dim is {d_txt}"
        )
    return rec


def load_corpus(path, schema_version=SCHEMA_VERSION):
    """Parse and validate a JSONL corpus file.

    The first line is a header carrying schema_version and the corpus-wide
    feature dimensions; every following line is one record.
    """
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
            d_img = int(header["d_img"])
            d_txt = int(header["d_txt"])
            version = str(header["schema_version"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(1, f"bad header: {exc}") from exc
        if version != schema_version:
            raise MalformedRecord(1, f"schema_version {version!r}, expected {schema_version!r}")
        records = []
        seen = set()
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc}") from exc
            rec = _parse_record(obj, d_img, d_txt, line_no)
            if rec.report_id in seen:
                raise DuplicateId(rec.report_id)
            seen.add(rec.report_id)
            records.append(rec)
    return Corpus(records, d_img=d_img, d_txt=d_txt, schema_version=version)


def write_corpus(corpus, path):
    """Serialize a corpus back to the JSONL contract (round-trips load_corpus)."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "schema_version": corpus.schema_version,
            "d_img": corpus.d_img,
            "d_txt": corpus.d_txt,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for r in corpus.records:
            obj = {
                "report_id": r.report_id,
                "patient_id": r.patient_id,
                "split": r.split,
                "report_text": r.report_text,
                "labels": list(r.labels),
                "entities": [[t, l] for t, l in r.graph.entities],
                "relations": [[s, rel, d] for s, rel, d in r.graph.relations],
                "image_features": r.image_features.tolist(),
                "text_features": None if r.text_features is None else r.text_features.tolist(),
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


# --- synthetic corpora -----------------------------------------------------

DEFAULT_VOCAB = (
    "heart", "lung", "mediastinum", "pleura", "diaphragm",
    "cardiomegaly", "edema", "consolidation", "atelectasis", "effusion",
    "opacity", "congestion", "infiltrate", "pneumothorax", "fracture",
    "carina", "hilum", "apex", "base", "silhouette",
)

# Noise scales chosen so a random projection baseline is clearly beatable:
# the image channel is deliberately the noisier modality.
_IMG_NOISE = 1.0
_TXT_NOISE = 0.25


def _observation_items(vocab):
    """Per-observation entity/relation templates drawn from the vocabulary."""
    templates = []
    for i in range(5):
        anat = vocab[i % 5]
        obs = vocab[5 + i]
        qual = vocab[10 + i]
        entities = ((obs, "OBS-DP"), (anat, "ANAT-DP"), (qual, "OBS-U"))
        relations = ((0, "located_at", 1), (2, "modify", 0))
        templates.append((entities, relations))
    return templates


def synth_corpus(seed, n, vocab=DEFAULT_VOCAB, d_img=32, d_txt=24):
    """Deterministic synthetic corpus with learnable structure.

    Labels drive the fact graph (each positive observation contributes a
    fixed entity/relation template) and the graph drives the feature
    vectors (linear prototypes plus noise), so a retriever trained on the
    output has real signal to find. Pure function of its arguments.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    templates = _observation_items(vocab)

    # One prototype direction per possible entity token; relations reuse them.
    token_list = sorted({normalize_entity(t) for ents, _ in templates for t, _ in ents}
                        | {normalize_entity(t) for t in vocab})
    token_index = {t: i for i, t in enumerate(token_list)}
    proto_img = rng.normal(size=(len(token_list), d_img))
    proto_txt = rng.normal(size=(len(token_list), d_txt))

    n_train = max(1, int(round(n * 0.7)))
    n_val = (n - n_train + 1) // 2
    records = []
    for i in range(n):
        labels = tuple(int(v) for v in rng.random(5) < 0.35)
        entities = []
        relations = []
        for obs_idx, flag in enumerate(labels):
            if not flag:
                continue
            ents, rels = templates[obs_idx]
            offset = len(entities)
            entities.extend(ents)
            relations.extend((s + offset, r, d + offset) for s, r, d in rels)
        # A little idiosyncratic content so no two graphs are forced equal.
        extra = rng.choice(len(vocab), size=rng.integers(1, 3), replace=False)
        for j in extra:
            entities.append((vocab[j], "OBS-DA"))
        graph = FactGraph(tuple(entities), tuple(relations))

        bag = np.zeros(len(token_list))
        for text, _ in entities:
            bag[token_index[normalize_entity(text)]] += 1.0
        img = bag @ proto_img + _IMG_NOISE * rng.normal(size=d_img)
        txt = bag @ proto_txt + _TXT_NOISE * rng.normal(size=d_txt)

        phrases = [
            f"{templates[k][0][0][0]} in the {templates[k][0][1][0]}"
            for k in range(5)
            if labels[k]
        ]
        text_body = "there is " + " and ".join(phrases) + "." if phrases else "no acute findings."
        words = [vocab[j] for j in extra]
        text_body += " note " + " ".join(words) + "."

        if i < n_train:
            split = "train"
        elif i < n_train + n_val:
            split = "validation"
        else:
            split = "test"
        # Every tenth record shares a patient with its predecessor so the
        # same-patient exclusion path is exercised.
        patient = f"p{i - 1:05d}" if (i % 10 == 9 and i > 0) else f"p{i:05d}"
        records.append(
            ReportRecord(
                report_id=f"s{i:05d}",
                patient_id=patient,
                split=split,
                report_text=text_body,
                labels=labels,
                graph=graph,
                image_features=img,
                text_features=txt,
            )
        )
    return Corpus(records, d_img=d_img, d_txt=d_txt)
