import json

import numpy as np
import pytest
from conftest import brute_force_auc
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitconv.metrics import (
    UndefinedAUC,
    VariantReport,
    auc_rank,
    read_report,
    roc_auc,
    roc_curve,
    timing_harness,
    trapezoid_auc,
    write_report,
)
from orbitconv.segnet import build_model, default_spec, predict, predict_augmented

score_sets = st.integers(2, 200).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 20).map(lambda v: v / 20.0), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n),
    )
).filter(lambda t: 0 < sum(t[1]) < len(t[1]))


def test_auc_example():
    assert auc_rank([0.8, 0.35, 0.4, 0.1], [1, 1, 0, 0]) == 0.75
    assert brute_force_auc([0.8, 0.35, 0.4, 0.1], [1, 1, 0, 0]) == 0.75


def test_auc_separated_and_constant():
    assert auc_rank([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
    assert auc_rank([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5


def test_single_class_is_undefined():
    with pytest.raises(UndefinedAUC):
        roc_auc([0.1, 0.2], [1, 1])
    with pytest.raises(UndefinedAUC):
        roc_auc([0.1, 0.2], [0, 0])


def test_roc_endpoints_and_monotone():
    pts = roc_curve([0.9, 0.5, 0.5, 0.2, 0.1], [1, 0, 1, 0, 1])
    assert pts[0][:2] == (0.0, 0.0) and pts[-1][:2] == (1.0, 1.0)
    fpr = [p[0] for p in pts]
    tpr = [p[1] for p in pts]
    assert fpr == sorted(fpr) and tpr == sorted(tpr)
    # one point per distinct threshold, plus the origin
    assert len(pts) == 1 + 4


@settings(max_examples=200)
@given(score_sets)
def test_rank_auc_equals_brute_force(data):
    scores, labels = data
    assert abs(auc_rank(scores, labels) - brute_force_auc(scores, labels)) <= 1e-12


@given(score_sets)
def test_trapezoid_equals_rank(data):
    scores, labels = data
    points, auc = roc_auc(scores, labels)
    assert abs(trapezoid_auc(points) - auc) <= 1e-9


@given(score_sets)
def test_auc_invariant_under_monotone_map(data):
    scores, labels = data
    s = np.array(scores)
    assert auc_rank(np.exp(3 * s) - 7.0, labels) == pytest.approx(auc_rank(s, labels), abs=1e-12)


def test_timing_harness_counts(rng):
    m = build_model(default_spec("baseline"), 0)
    images = rng.uniform(size=(5, 1, 8, 8))
    secs, passes, outs = timing_harness(lambda im: predict(m, im), images, m)
    assert passes == 5 and len(outs) == 5 and secs >= 0
    _, passes, _ = timing_harness(lambda im: predict_augmented(m, im), images, m)
    assert passes == 40
    inv = build_model(default_spec("invariant"), 0)
    _, passes, _ = timing_harness(lambda im: predict(inv, im), images, inv)
    assert passes == 5


def _reports():
    return [
        VariantReport("invariant", 0.91, [(0.0, 0.0, float("inf")), (1.0, 1.0, 0.1)],
                      [(0, 0.6931471805599453), (1, 0.1 + 0.2)], 3, 0.5),
        VariantReport("baseline", 1 / 3, [(0.0, 0.0, float("inf")), (0.25, 0.5, 0.7), (1.0, 1.0, 0.0)],
                      [], 3, 0.25),
        VariantReport("augmented-baseline", 0.8, [(0.0, 0.0, float("inf")), (1.0, 1.0, 0.2)],
                      [(0, 1e-300)], 24, 2.0),
    ]


def test_report_roundtrip_and_order(tmp_path):
    write_report(_reports(), tmp_path)
    lines = (tmp_path / "metrics.jsonl").read_text().splitlines()
    assert [json.loads(l)["variant"] for l in lines] == ["baseline", "augmented-baseline", "invariant"]
    assert set(json.loads(lines[0])) == {"variant", "auc", "forward_passes", "wall_clock_seconds"}
    back = {r.variant: r for r in read_report(tmp_path)}
    for r in _reports():
        assert back[r.variant] == r


def test_empty_loss_history_has_header_only(tmp_path):
    write_report(_reports(), tmp_path)
    assert (tmp_path / "loss_baseline.csv").read_text() == "iteration,loss\n"
    assert (tmp_path / "roc_baseline.csv").read_text().splitlines()[0] == "fpr,tpr,threshold"


def test_unwritable_destination(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        write_report(_reports(), blocker / "sub")
