from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mptrack.audio_cues import StgcfCues
from mptrack.errors import InputError
from mptrack.perception import (CueStack, PerceptionParams, TrainingSet, attention_forward, attention_scores,
                                descriptors, fit_standardization, fusion_map, loss_and_grad, make_labels, mode_scores,
                                spatial_factor, stack_cues, temporal_factor, train, training_samples)
from mptrack.scoremap import ScoreMap


def random_stack(rng, C=7, A=5, H=9, W=11, t=0):
    ch = rng.random((C, H, W))
    ch = (ch - ch.min(axis=(1, 2), keepdims=True)) / np.ptp(ch, axis=(1, 2), keepdims=True)
    return CueStack(ch, A, t)


def random_sequence(seed, T=10, **kw):
    g = np.random.default_rng(seed)
    return [random_stack(g, t=t, **kw) for t in range(T)]


def smap(v, kind="audio"):
    return ScoreMap(np.asarray(v, dtype=float), kind)


# --- stacking -----------------------------------------------------------------

def test_five_audio_two_visual_channels(rng):
    cues = StgcfCues([smap(rng.random((4, 4))) for _ in range(5)], [0, 1, 2, 3, 4], [0.1] * 5)
    v = stack_cues(cues, [smap(rng.random((4, 4)), "visual") for _ in range(2)])
    assert v.n_channels == 7 and v.n_audio == 5 and v.n_visual == 2


def test_audio_first_and_input_order_kept(rng):
    a1, a2, vis = rng.random((3, 4, 4))
    v = stack_cues([smap(a2), smap(a1)], [smap(vis, "visual")])
    np.testing.assert_array_equal(v.channels, [a2, a1, vis])


def test_lattice_mismatch_rejected(rng):
    with pytest.raises(InputError):
        stack_cues([smap(rng.random((4, 4)))], [smap(rng.random((4, 5)), "visual")])


def test_peaks_consistent_with_maps(rng):
    v = random_stack(rng)
    for i, (r, c) in enumerate(v.peaks):
        assert v.channels[i, r, c] == v.channels[i].max()


# --- attention ----------------------------------------------------------------

def test_zero_parameters_give_one_half(rng):
    alpha = attention_forward(random_stack(rng), PerceptionParams.zeros(7))
    np.testing.assert_array_equal(alpha, np.full(7, 0.5))


def test_attention_matches_direct_formula(rng):
    p = PerceptionParams.init(7, 2, seed=3, scale=0.5)
    p.shift, p.scale = rng.random((2, 7)), 0.5 + rng.random((2, 7))
    v = random_stack(rng)
    avg, mx = v.channels.mean(axis=(1, 2)), v.channels.max(axis=(1, 2))
    za, zm = (avg - p.shift[0]) / p.scale[0], (mx - p.shift[1]) / p.scale[1]
    mlp = lambda z: p.w2 @ np.maximum(p.w1 @ z + p.b1, 0) + p.b2  # noqa: E731
    expect = 1 / (1 + np.exp(-(mlp(za) + mlp(zm))))
    np.testing.assert_allclose(attention_forward(v, p), expect, atol=1e-12)


def test_hidden_width_follows_reduction():
    assert PerceptionParams.init(7, 2).hidden == 3
    assert PerceptionParams.init(8, 2).w1.shape == (4, 8)


def test_nan_stack_rejected():
    ch = np.zeros((7, 3, 3))
    ch[2, 1, 1] = np.nan
    with pytest.raises(InputError):
        attention_forward(CueStack(ch, 5), PerceptionParams.zeros(7))


def test_channel_count_mismatch_rejected(rng):
    with pytest.raises(InputError):
        attention_scores(PerceptionParams.zeros(6), rng.random(7), rng.random(7))


def test_bad_standardization_rejected():
    p = PerceptionParams.zeros(3)
    with pytest.raises(InputError):
        PerceptionParams(p.w1, p.b1, p.w2, p.b2, np.zeros((2, 3)), np.zeros((2, 3)))


def test_fit_standardization_floors_scale():
    avg = np.array([[0.1, 0.5], [0.3, 0.5]])
    mx = np.ones((2, 2))
    shift, scale = fit_standardization(avg, mx)
    np.testing.assert_allclose(shift, [[0.2, 0.5], [1.0, 1.0]])
    np.testing.assert_allclose(scale, [[0.1, 1e-2], [1e-2, 1e-2]])


# --- labels -------------------------------------------------------------------

def test_identical_channels_give_unit_spatial_factor():
    m = np.zeros((5, 5))
    m[2, 3] = 1.0
    v = CueStack(np.stack([m] * 7), 5)
    assert all(spatial_factor(v, i) == 1.0 for i in range(7))


def test_isolated_audio_peak_spatial_factor():
    ch = np.zeros((7, 6, 6))
    ch[0, 1, 1] = 1.0
    for j in range(1, 7):
        ch[j, 4, 4] = 1.0
    v = CueStack(ch, 5)
    assert spatial_factor(v, 0) == pytest.approx(0.5 * (1 / 5 + 0))


def oracle_spatial(v, i):
    r, c = v.peaks[i]
    a = [v.channels[j, r, c] for j in range(v.n_audio)]
    b = [v.channels[j, r, c] for j in range(v.n_audio, v.n_channels)]
    return (sum(a) / len(a) + sum(b) / len(b)) / 2


def oracle_temporal(seq, t, i, n):
    r, c = seq[t].peaks[i]
    vals = [seq[q].channels[i, r, c] for q in range(t - n, t + n + 1) if 0 <= q < len(seq)]
    return sum(vals) / len(vals)


@given(st.integers(0, 2**31), st.integers(0, 9), st.integers(0, 6))
def test_labels_match_direct_formulas(seed, t, n):
    seq = random_sequence(seed)
    lab = make_labels(seq, t, n)
    for i in range(7):
        ls, lt = oracle_spatial(seq[t], i), oracle_temporal(seq, t, i, n)
        assert lab.spatial[i] == pytest.approx(ls, abs=1e-12)
        assert spatial_factor(seq[t], i) == pytest.approx(ls, abs=1e-12)
        assert lab.temporal[i] == pytest.approx(lt, abs=1e-12)
        assert temporal_factor(seq, t, i, n) == pytest.approx(lt, abs=1e-12)
        assert lab.label[i] == pytest.approx(ls * lt, abs=1e-12)
    for arr in (lab.spatial, lab.temporal, lab.label):
        assert np.all((arr >= 0) & (arr <= 1))


def test_zero_window_temporal_factor_is_peak_value(rng):
    seq = random_sequence(3)
    for i in range(7):
        assert temporal_factor(seq, 4, i, 0) == seq[4].channels[i].max()


def test_static_scene_temporal_factor(rng):
    v = random_stack(rng)
    seq = [v] * 20
    for i in range(7):
        assert temporal_factor(seq, 10, i, 6) == pytest.approx(v.channels[i].max())


def test_thirteen_frame_window_on_simulator(short_sequence):
    t = 20
    lab = make_labels(short_sequence, t, 6)
    for i in range(short_sequence[t].n_channels):
        r, c = short_sequence[t].peaks[i]
        brute = np.mean([short_sequence[q].channels[i, r, c] for q in range(t - 6, t + 7)])
        assert lab.temporal[i] == pytest.approx(brute, abs=1e-12)


def test_label_is_one_when_both_factors_are_one():
    m = np.zeros((4, 4))
    m[1, 1] = 1.0
    seq = [CueStack(np.stack([m] * 7), 5, t) for t in range(3)]
    np.testing.assert_array_equal(make_labels(seq, 1, 1).label, np.ones(7))


def test_label_is_zero_when_a_factor_is_zero():
    m = np.zeros((4, 4))
    m[1, 1] = 1.0
    blank = CueStack(np.zeros((7, 4, 4)), 5, 0)
    lab = make_labels([blank, CueStack(np.stack([m] * 7), 5, 1)], 0, 0)
    assert np.all(lab.temporal == 0) and np.all(lab.label == 0)


def test_shared_peak_outranks_isolated_peak():
    ch = np.full((7, 6, 6), 0.2)
    ch[:, 2, 2] = 1.0  # common maximum
    ch[0] = 0.2
    ch[0, 5, 0] = 1.0  # channel 0 peaks where others sit at 0.2
    ch[0, 2, 2] = 0.9
    v = CueStack(ch, 5)
    assert spatial_factor(v, 1) >= spatial_factor(v, 0)


# --- fusion -------------------------------------------------------------------

def test_uniform_scores_on_identical_maps(rng):
    m = rng.random((5, 6))
    v = CueStack(np.stack([m] * 7), 5)
    np.testing.assert_allclose(fusion_map(v, np.full(7, 0.3)).values, 0.3 * m, atol=1e-15)


def test_one_hot_score_selects_channel(rng):
    v = random_stack(rng)
    alpha = np.zeros(7)
    alpha[5] = 1.0
    np.testing.assert_allclose(fusion_map(v, alpha).values, v.channels[5] / 7, atol=1e-15)


@given(st.integers(0, 2**31))
def test_fusion_matches_weighted_average(seed):
    g = np.random.default_rng(seed)
    v = random_stack(g)
    alpha = g.random(7)
    expect = sum(alpha[i] * v.channels[i] for i in range(7)) / 7
    np.testing.assert_allclose(fusion_map(v, alpha).values, expect, atol=1e-14)


@given(st.integers(0, 2**31), st.floats(0.01, 100.0))
def test_fusion_argmax_scale_invariant_and_linear(seed, k):
    g = np.random.default_rng(seed)
    v = random_stack(g)
    a, b = g.random(7), g.random(7)
    assert fusion_map(v, k * a).peak == fusion_map(v, a).peak
    np.testing.assert_allclose(fusion_map(v, a + k * b).values,
                               fusion_map(v, a).values + k * fusion_map(v, b).values, atol=1e-12)


def test_ablation_modes(rng):
    v = random_stack(rng)
    np.testing.assert_array_equal(mode_scores(v, None, "audio"), [1, 1, 1, 1, 1, 0, 0])
    np.testing.assert_array_equal(mode_scores(v, None, "visual"), [0, 0, 0, 0, 0, 1, 1])
    np.testing.assert_array_equal(mode_scores(v, None, "avg"), np.ones(7))
    with pytest.raises(InputError):
        mode_scores(v, None, "mpt")
    with pytest.raises(InputError):
        mode_scores(v, None, "nope")


# --- gradients and training ---------------------------------------------------

def finite_difference_check(p, avg, mx, labels, eps=1e-5):
    _, grad = loss_and_grad(p, avg, mx, labels)
    worst = 0.0
    for name in PerceptionParams.NAMES:
        arr = getattr(p, name)
        g = getattr(grad, name)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + eps
            lp = loss_and_grad(p, avg, mx, labels)[0]
            arr[idx] = old - eps
            lm = loss_and_grad(p, avg, mx, labels)[0]
            arr[idx] = old
            fd = (lp - lm) / (2 * eps)
            worst = max(worst, abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), 1e-8))
    return worst


@pytest.mark.parametrize("seed", range(4))
def test_gradient_matches_finite_differences(seed):
    g = np.random.default_rng(seed)
    p = PerceptionParams.init(7, 2, seed=seed, scale=0.5)
    p.shift, p.scale = g.normal(0, 0.3, (2, 7)), 0.2 + g.random((2, 7))
    avg, mx, labels = g.random((6, 7)), g.random((6, 7)), g.random((6, 7))
    assert finite_difference_check(p, avg, mx, labels) < 1e-4


def test_fixed_point_stays_at_zero_loss(rng):
    v = random_stack(rng)
    avg, mx = descriptors(v.channels)
    data = TrainingSet(avg[None], mx[None], np.full((1, 7), 0.5))
    res = train(data, epochs=5, init=PerceptionParams.zeros(7))
    assert res.loss_history == [0.0] * 6
    assert not any(a.any() for a in res.params.arrays())


def test_training_reduces_loss():
    seqs = [random_sequence(s, T=12) for s in range(4)]
    res = train(seqs, epochs=30, batch_size=8, lr=0.05, seed=1, n=2)
    assert len(res.loss_history) == 31
    assert res.loss_history[-1] < res.loss_history[0]


def test_training_is_deterministic():
    data = training_samples(random_sequence(9, T=12), 2)
    a = train(data, epochs=3)
    b = train(data, epochs=3)
    assert a.loss_history == b.loss_history
    for x, y in zip(a.params.arrays(), b.params.arrays()):
        np.testing.assert_array_equal(x, y)


def test_standardization_is_not_trained():
    data = training_samples(random_sequence(2, T=12), 2)
    res = train(data, epochs=3)
    shift, scale = fit_standardization(data.avg, data.mx)
    np.testing.assert_array_equal(res.params.shift, shift)
    np.testing.assert_array_equal(res.params.scale, scale)


def test_empty_dataset_rejected():
    with pytest.raises(InputError):
        train([])
    with pytest.raises(InputError):
        train(TrainingSet(np.zeros((0, 7)), np.zeros((0, 7)), np.zeros((0, 7))))
