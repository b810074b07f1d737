import json

import numpy as np
import pytest

from factmine.corpus import (
    FactGraph,
    load_corpus,
    normalize_entity,
    synth_corpus,
    write_corpus,
)
from factmine.errors import (
    DimensionMismatch,
    DuplicateId,
    MalformedRecord,
    UnknownLabelArity,
)

HEADER = {"schema_version": "1", "d_img": 2, "d_txt": 2}


def record_obj(report_id="s1", **overrides):
    obj = {
        "report_id": report_id,
        "patient_id": "p1",
        "split": "train",
        "report_text": "mild edema",
        "labels": [0, 1, 0, 0, 0],
        "entities": [["edema", "OBS-DP"], ["lung", "ANAT-DP"]],
        "relations": [[0, "located_at", 1]],
        "image_features": [1.0, 2.0],
        "text_features": [0.5, -0.5],
    }
    obj.update(overrides)
    return obj


def write_file(tmp_path, objs, header=HEADER):
    path = tmp_path / "corpus.jsonl"
    lines = [json.dumps(header)] + [json.dumps(o) for o in objs]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_load_three_valid_records(tmp_path):
    path = write_file(tmp_path, [record_obj(f"s{i}") for i in range(3)])
    corpus = load_corpus(path)
    assert len(corpus) == 3


def test_duplicate_report_id_rejected(tmp_path):
    path = write_file(tmp_path, [record_obj("s1"), record_obj("s1")])
    with pytest.raises(DuplicateId):
        load_corpus(path)


def test_wrong_label_arity_rejected(tmp_path):
    path = write_file(tmp_path, [record_obj(labels=[0, 1, 0, 0])])
    with pytest.raises(UnknownLabelArity):
        load_corpus(path)


def test_out_of_range_relation_rejected(tmp_path):
    path = write_file(tmp_path, [record_obj(relations=[[0, "located_at", 9]])])
    with pytest.raises(MalformedRecord) as exc:
        load_corpus(path)
    assert exc.value.line_no == 2


def test_feature_dimension_mismatch(tmp_path):
    path = write_file(tmp_path, [record_obj(image_features=[1.0, 2.0, 3.0])])
    with pytest.raises(DimensionMismatch):
        load_corpus(path)


def test_null_text_features_allowed(tmp_path):
    path = write_file(tmp_path, [record_obj(text_features=None)])
    corpus = load_corpus(path)
    assert corpus["s1"].text_features is None


def test_invalid_json_line_reports_line_number(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text(json.dumps(HEADER) + "\n" + json.dumps(record_obj()) + "\nnot-json\n")
    with pytest.raises(MalformedRecord) as exc:
        load_corpus(path)
    assert exc.value.line_no == 3


@pytest.mark.parametrize(
    "raw,expected",
    [
        ("  Pleural  ", "pleural"),
        ("effusion.", "effusion"),
        ("CABG", "cabg"),
        ("right   lower  LOBE", "right lower lobe"),
        ("...", ""),
    ],
)
def test_normalize_entity(raw, expected):
    assert normalize_entity(raw) == expected


def test_roundtrip_semantic_identity(tmp_path):
    corpus = synth_corpus(3, 12)
    path = tmp_path / "a.jsonl"
    write_corpus(corpus, path)
    loaded = load_corpus(path)
    assert len(loaded) == len(corpus)
    for orig, back in zip(corpus.records, loaded.records):
        assert back.report_id == orig.report_id
        assert back.patient_id == orig.patient_id
        assert back.split == orig.split
        assert back.report_text == orig.report_text
        assert back.labels == orig.labels
        assert back.graph == orig.graph
        np.testing.assert_array_equal(back.image_features, orig.image_features)
        np.testing.assert_array_equal(back.text_features, orig.text_features)
    # second serialization is byte-identical
    path2 = tmp_path / "b.jsonl"
    write_corpus(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_synth_determinism(tmp_path):
    a, b = synth_corpus(7, 10), synth_corpus(7, 10)
    pa, pb = tmp_path / "a", tmp_path / "b"
    write_corpus(a, pa)
    write_corpus(b, pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_synth_seed_sensitivity(tmp_path):
    pa, pb = tmp_path / "a", tmp_path / "b"
    write_corpus(synth_corpus(7, 10), pa)
    write_corpus(synth_corpus(8, 10), pb)
    assert pa.read_bytes() != pb.read_bytes()


def test_synth_minimal_corpus_roundtrips(tmp_path):
    corpus = synth_corpus(1, 1)
    assert len(corpus) == 1
    path = tmp_path / "one.jsonl"
    write_corpus(corpus, path)
    assert len(load_corpus(path)) == 1


def test_synth_relations_resolve():
    corpus = synth_corpus(11, 40)
    for rec in corpus.records:
        rec.graph.validate()


def test_graph_rejects_bad_relation_type():
    graph = FactGraph((("edema", "OBS-DP"),), ((0, "caused_by", 0),))
    with pytest.raises(ValueError):
        graph.validate()
