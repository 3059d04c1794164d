from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mptrack.errors import InputError
from mptrack.metrics import acc, acc_threshold, evaluate, frame_errors, mae
from mptrack.simulator import SceneTruth

series = st.integers(1, 40).flatmap(
    lambda n: st.tuples(arrays(float, (n, 2), elements=st.floats(-500, 500)),
                        arrays(float, (n, 2), elements=st.floats(-500, 500))))


def test_perfect_estimate():
    gt = np.random.default_rng(0).random((10, 2)) * 100
    assert mae(gt, gt) == 0.0
    assert acc(gt, gt, (30, 40)) == 100.0


def test_constant_three_four_five_offset():
    gt = np.zeros((7, 2))
    assert mae(gt + [3.0, 4.0], gt) == 5.0


def test_boundary_is_inclusive():
    assert acc_threshold((30, 40)) == 25.0
    gt = np.zeros((5, 2))
    assert acc(gt + [15.0, 20.0], gt, (30, 40)) == 100.0
    assert acc(gt + [15.0, 20.000001], gt, (30, 40)) == 0.0


@given(series)
def test_mae_matches_brute_force(pair):
    est, gt = pair
    total = 0.0
    for (a, b), (c, d) in zip(est, gt):
        total += math.sqrt((a - c) ** 2 + (b - d) ** 2)
    assert mae(est, gt) == pytest.approx(total / len(est), rel=1e-12, abs=1e-12)


@given(series, st.floats(1, 200), st.floats(1, 200))
def test_acc_matches_brute_force(pair, w, h):
    est, gt = pair
    thr = 0.5 * math.sqrt(w * w + h * h)
    errs = frame_errors(est, gt)
    hits = sum(1 for e in errs if e <= thr)
    assert acc(est, gt, (w, h)) == 100.0 * hits / len(est)
    assert 0.0 <= acc(est, gt, (w, h)) <= 100.0


def test_length_mismatch_rejected():
    with pytest.raises(InputError):
        mae(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(InputError):
        mae(np.zeros((0, 2)), np.zeros((0, 2)))


def test_evaluate_report_fields():
    gt = np.zeros((4, 2))
    est = np.array([[0, 0], [3, 4], [30, 40], [0, 100.0]])
    occluded = np.array([False, True, True, False])
    truth = SceneTruth(np.zeros((4, 3)), gt, np.ones(4, bool), occluded, np.arange(4) / 25, (40, 30))
    rep = evaluate(est, truth)
    assert rep.mae == pytest.approx((0 + 5 + 50 + 100) / 4)
    assert rep.acc == 50.0 and rep.errors == 2
    assert rep.occlusion_rate == 50.0
    assert rep.n_frames == len(rep.frame_errors) == 4
    assert rep.summary()["frames"] == 4
