"""Retrieval evaluation: rank-1 factual scoring, MRR, and oracle retrieval."""

import json
from dataclasses import dataclass, field

from .errors import EmptyCandidateSet, MissingResult
from .metrics import chexbert_instance, chexbert_micro, factual_similarity, rouge_l


@dataclass
class RetrievalRun:
    """Ranked results per query plus provenance."""

    results: dict  # query_id -> list of (doc_id, score), rank order
    provenance: dict = field(default_factory=dict)


@dataclass
class RelevanceJudgment:
    relevant: dict  # query_id -> set of doc_ids
    chexbert_threshold: float
    radgraph_threshold: float


@dataclass
class CorpusScore:
    f1_chexbert_micro: float
    f1_radgraph_mean: float
    rouge_l_mean: float


def eval_retrieval(run, corpus):
    """Score each query's rank-1 retrieved report against its ground truth."""
    refs, hyps = [], []
    rad_total = 0.0
    rouge_total = 0.0
    for query_id in run.results:
        if not run.results[query_id]:
            raise MissingResult(query_id)
    for query_id, ranked in run.results.items():
        query = corpus[query_id]
        top = corpus[ranked[0][0]]
        refs.append(query.labels)
        hyps.append(top.labels)
        rad_total += factual_similarity(query.graph, top.graph)
        rouge_total += rouge_l(query.report_text, top.report_text)
    n = len(run.results)
    return CorpusScore(
        f1_chexbert_micro=chexbert_micro(refs, hyps),
        f1_radgraph_mean=rad_total / n,
        rouge_l_mean=rouge_total / n,
    )


def judge_relevance(corpus, chexbert_threshold, radgraph_threshold, query_split=None,
                    doc_split="train"):
    """Per-query relevant document sets under the two factual thresholds.

    Mirrors the mining filter: label agreement >= chexbert threshold and
    graph overlap strictly > radgraph threshold, self excluded. Queries
    default to every record in the corpus.
    """
    if not (0.0 <= chexbert_threshold <= 1.0 and 0.0 <= radgraph_threshold <= 1.0):
        raise ValueError("thresholds must be in [0, 1]")
    docs = corpus.split(doc_split)
    queries = corpus.records if query_split is None else corpus.split(query_split)
    relevant = {}
    for query in queries:
        hits = set()
        for doc in docs:
            if doc.report_id == query.report_id:
                continue
            if chexbert_instance(query.labels, doc.labels) < chexbert_threshold:
                continue
            if factual_similarity(query.graph, doc.graph) > radgraph_threshold:
                hits.add(doc.report_id)
        relevant[query.report_id] = hits
    return RelevanceJudgment(relevant, chexbert_threshold, radgraph_threshold)


def mrr(run, judgments, drop_unjudged=False):
    """Mean reciprocal rank of the first relevant document per query.

    Queries that retrieve no relevant document contribute 0. With
    drop_unjudged, queries whose judgment set is empty are removed from the
    denominator instead (comparison variant for sweep reports).
    """
    total = 0.0
    n = 0
    for query_id, ranked in run.results.items():
        relevant = judgments.relevant.get(query_id, set())
        if drop_unjudged and not relevant:
            continue
        n += 1
        for rank, (doc_id, _) in enumerate(ranked, start=1):
            if doc_id in relevant:
                total += 1.0 / rank
                break
    return total / n if n else 0.0


def oracle_retrieve(corpus, query_id, restrict_train=True):
    """Ground-truth argmax of summed label agreement and graph overlap.

    Candidates come from the train split. A train query never retrieves
    itself; queries from other splits have no self to exclude. Ties break
    by ascending doc_id.
    """
    query = corpus[query_id]
    best_id = None
    best_sum = -1.0
    candidates = corpus.split("train") if restrict_train else corpus.records
    for doc in candidates:
        if query.split == "train" and doc.report_id == query.report_id:
            continue
        total = chexbert_instance(query.labels, doc.labels) + factual_similarity(
            query.graph, doc.graph
        )
        if total > best_sum or (total == best_sum and doc.report_id < best_id):
            best_sum = total
            best_id = doc.report_id
    if best_id is None:
        raise EmptyCandidateSet(f"no oracle candidates for query {query_id!r}")
    return best_id


# --- run file io -----------------------------------------------------------


def write_run(run, path):
    """Line-delimited (query_id, rank, doc_id, score) with a provenance header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"provenance": run.provenance}, sort_keys=True) + "\n")
        for query_id in sorted(run.results):
            for rank, (doc_id, score) in enumerate(run.results[query_id], start=1):
                fh.write(f"{query_id}\t{rank}\t{doc_id}\t{score!r}\n")


def read_run(path):
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        results = {}
        for line in fh:
            if not line.strip():
                continue
            query_id, rank, doc_id, score = line.rstrip("\n").split("\t")
            results.setdefault(query_id, []).append((doc_id, float(score)))
    return RetrievalRun(results, header.get("provenance", {}))


def write_report(score, path, config_echo=None, provenance=""):
    """Evaluation report as a key/value JSON document."""
    doc = {
        "f1_chexbert_micro": score.f1_chexbert_micro,
        "f1_radgraph_mean": score.f1_radgraph_mean,
        "rouge_l_mean": score.rouge_l_mean,
        "config": config_echo or {},
        "provenance": provenance,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
