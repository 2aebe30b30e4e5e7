import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optadvisor import optdb
from optadvisor.errors import SchemaError
from optadvisor.optdb import OptimizationEntry, load_db
from optadvisor.profile_ingest import FeatureSchema, FeatureVector
from optadvisor.recommender import (
    NO_RECOMMENDATION,
    ReportConfig,
    predict_all,
    rank_and_filter,
    render_report,
    render_text,
    train_all,
)

from conftest import entries_from_lattice, lattice_records

OPTS = ["fast", "slow", "flat"]


@pytest.fixture
def separable_db(tmp_path, separable_records):
    for e in entries_from_lattice(separable_records, OPTS):
        optdb.add_entry(tmp_path, e)
    return load_db(tmp_path)


def test_train_all_one_model_per_entry(tmp_path):
    recs = lattice_records(n_opts=6, n_inputs=1, runs=1, speedup=lambda b, i: 1.1)
    ids = [f"o{i}" for i in range(6)]
    for e in entries_from_lattice(recs, ids):
        optdb.add_entry(tmp_path, e)
    bundle = train_all(load_db(tmp_path))
    assert sorted(bundle.models) == ids and bundle.skipped == []
    optdb.remove_entry(tmp_path, "o5")
    optdb.add_entry(tmp_path, OptimizationEntry("o5", "empty"))
    bundle = train_all(load_db(tmp_path), learner_kind="m5p")
    assert sorted(bundle.models) == ids[:5] and bundle.skipped == ["o5"]


def test_train_all_empty_db(tmp_path):
    bundle = train_all(load_db(tmp_path))
    assert bundle.models == {} and bundle.skipped == []


def test_predict_all_separable(separable_db, separable_records):
    bundle = train_all(separable_db, k=3)
    query = next(r for r in separable_records if r.input_id == "in4" and r.version_mask == 0 and r.run_id == 0)
    preds = predict_all(bundle.models, query)
    assert preds["fast"] > 1.5 > 1.0 > preds["slow"]
    assert preds["flat"] == pytest.approx(1.0, abs=0.05)


def test_predict_all_schema_mismatch(separable_db):
    bundle = train_all(separable_db)
    with pytest.raises(SchemaError):
        predict_all(bundle.models, FeatureVector(FeatureSchema(("zz",)), (1.0,)))


def test_rank_and_filter_examples():
    preds = {"a": 1.30, "b": 0.90, "c": 1.10, "d": 1.04}
    recs = rank_and_filter(preds)
    assert [(r.optimization_id, r.rank) for r in recs] == [("a", 1), ("c", 2)]
    assert rank_and_filter(preds, ReportConfig(max_count=1))[0].optimization_id == "a"
    assert rank_and_filter(preds, ReportConfig(threshold=99)) == []


def test_ties_break_by_id():
    recs = rank_and_filter({"zeta": 1.5, "alpha": 1.5, "mid": 1.5}, ReportConfig(max_count=2))
    assert [r.optimization_id for r in recs] == ["alpha", "mid"]


def test_non_positive_predictions_are_clamped():
    recs = rank_and_filter({"neg": -2.0, "zero": 0.0}, ReportConfig(threshold=0.0))
    assert [(r.optimization_id, r.predicted_speedup, r.clamped) for r in recs] == [
        ("neg", 0.01, True), ("zero", 0.01, True)]


def test_bad_config():
    with pytest.raises(ValueError):
        ReportConfig(max_count=0)
    with pytest.raises(ValueError):
        ReportConfig(threshold=float("nan"))


_preds = st.dictionaries(st.text("abcdef", min_size=1, max_size=3),
                         st.floats(0.01, 5.0, allow_nan=False), max_size=10)


@settings(max_examples=100)
@given(_preds, st.floats(0.5, 2.0), st.floats(0.5, 2.0), st.integers(1, 6))
def test_ranking_invariants(preds, t1, t2, top):
    lo, hi = sorted((t1, t2))
    a = rank_and_filter(preds, ReportConfig(threshold=lo, max_count=top))
    b = rank_and_filter(preds, ReportConfig(threshold=hi, max_count=top))
    vals = [r.predicted_speedup for r in a]
    assert vals == sorted(vals, reverse=True)
    assert all(v >= lo for v in vals) and len(a) <= top
    assert [r.rank for r in a] == list(range(1, len(a) + 1))
    # raising the threshold can only drop items, never reorder the survivors
    assert {r.optimization_id for r in b} <= {r.optimization_id for r in a}
    assert [r.optimization_id for r in b] == [r.optimization_id for r in a if r.predicted_speedup >= hi]
    # every excluded item above the threshold ranks below the worst kept one
    kept = {r.optimization_id for r in a}
    for o, v in preds.items():
        if o not in kept and v >= lo and a:
            assert (-v, o) > (-a[-1].predicted_speedup, a[-1].optimization_id)


@settings(max_examples=50)
@given(_preds)
def test_monotone_transform_keeps_order(preds):
    a = rank_and_filter(preds, ReportConfig(threshold=0, max_count=20))
    b = rank_and_filter({o: v ** 3 for o, v in preds.items()}, ReportConfig(threshold=0, max_count=20))
    assert [r.optimization_id for r in a] == [r.optimization_id for r in b]


def test_render_text_and_json():
    entries = {"a": {"name": "Alpha", "description": "does a", "example": "x = 1;\ny = 2;"}}
    cfg = ReportConfig(include_explanations=True, include_examples=True)
    text, doc = render_report(rank_and_filter({"a": 1.3}, cfg, entries), cfg)
    assert "a (Alpha)" in text and "+30%" in text and "does a" in text and "| y = 2;" in text
    parsed = json.loads(doc)
    assert parsed["recommendations"][0]["example"] == "x = 1;\ny = 2;"
    plain = render_text(rank_and_filter({"a": 1.3}, ReportConfig(), entries), ReportConfig())
    assert "does a" not in plain and "x = 1" not in plain


def test_render_nothing():
    assert render_text([], ReportConfig()).startswith(NO_RECOMMENDATION)
