from __future__ import annotations

import numpy as np
import pytest

from mptrack.errors import ConfigurationError
from mptrack.geometry import MicArrayConfig, tdoa
from mptrack.simulator import (SceneConfig, middle_third_region, scene_truth, speech_gate, synth_audio,
                               synth_frames)

MID = middle_third_region((288, 360))


def xcorr_delay(xi, xk, up=64):
    """Delay of xi relative to xk (samples) from the peak of the plain cross-correlation."""
    n = len(xi)
    r = np.fft.irfft(np.fft.rfft(xi) * np.conj(np.fft.rfft(xk)), n * up)
    lag = int(np.argmax(r))
    if lag > n * up // 2:
        lag -= n * up
    return lag / up


def test_rendered_delays_match_geometry():
    mics = MicArrayConfig([[1.0, 4.0, 0.8], [1.9, 4.3, 0.8], [1.4, 3.6, 0.8]], ((0, 1), (0, 2), (1, 2)))
    cfg = SceneConfig(mics=mics, waypoints=[[2.5, 2.5, 1.5]], speed=0, duration=0.5, snr_db=np.inf, seed=1)
    x = synth_audio(cfg)
    for i, k in mics.pairs:
        expect = tdoa(cfg.waypoints[0], (i, k), mics) * cfg.sample_rate
        assert abs(xcorr_delay(x[i], x[k]) - expect) <= 0.1


def test_all_pairs_of_default_arrays_within_a_tenth_of_a_sample():
    cfg = SceneConfig(waypoints=[[0.8, 2.9, 1.4]], speed=0, duration=0.3, snr_db=np.inf, seed=2)
    x = synth_audio(cfg)
    errs = [abs(xcorr_delay(x[i], x[k]) - tdoa(cfg.waypoints[0], (i, k), cfg.mics) * cfg.sample_rate)
            for i, k in cfg.mics.pairs]
    assert max(errs) <= 0.1


def test_silence_is_exactly_zero_without_noise():
    cfg = SceneConfig(duration=1.0, speech=[(0.3, 0.6)], snr_db=np.inf, seed=0)
    x = synth_audio(cfg)
    t = np.arange(x.shape[1]) / cfg.sample_rate
    off = (t < 0.3) | (t >= 0.6)
    assert not x[:, off].any()
    assert np.abs(x[:, ~off]).max() > 0


def test_gate_is_receiver_side_and_ramped():
    cfg = SceneConfig(duration=1.0, speech=[(0.25, 0.75)])
    g = speech_gate(cfg)
    assert g.shape == (16000,)
    assert g[: 4000].max() == 0 and g[12000:].max() == 0
    assert g[6000] == 1.0 and 0 < g[4001] < 1


def test_ten_second_recording_shape():
    x = synth_audio(SceneConfig(duration=10.0, seed=3))
    assert x.shape == (16, 160000)


def test_snr_is_respected():
    clean = synth_audio(SceneConfig(duration=1.0, snr_db=np.inf, seed=4))
    noisy = synth_audio(SceneConfig(duration=1.0, snr_db=10.0, seed=4))
    ratio = np.mean(clean**2) / np.mean((noisy - clean) ** 2)
    assert 10 * np.log10(ratio) == pytest.approx(10.0, abs=0.2)


def test_frame_size_and_rate():
    cfg = SceneConfig(duration=0.4, seed=1)
    frames, truth = synth_frames(cfg)
    assert len(frames) == 10 and frames[0].size == (288, 360)
    np.testing.assert_allclose(np.diff(truth.times), 1 / 25)


def test_no_occlusion_flags_without_mask():
    assert not scene_truth(SceneConfig(duration=2.0)).occluded.any()


def test_occlusion_rate_matches_geometry():
    cfg = SceneConfig(duration=8.0, waypoints=[[0.6, 4.0, 1.5], [2.8, 2.9, 1.5]], occlusion_region=MID)
    truth = scene_truth(cfg)
    inside = [(MID[0] <= x < MID[2]) and (MID[1] <= y < MID[3]) for x, y in truth.positions_2d]
    assert truth.occlusion_rate == pytest.approx(100.0 * np.mean(inside))
    assert truth.occlusion_rate >= 40.0


def test_occlusion_schedule_limits_flags():
    cfg = SceneConfig(duration=8.0, waypoints=[[0.6, 4.0, 1.5], [2.8, 2.9, 1.5]], occlusion_region=MID,
                      occlusion_schedule=[(0.0, 2.0)])
    truth = scene_truth(cfg)
    assert not truth.occluded[truth.times >= 2.0].any()


def test_occluded_pixels_hide_the_target():
    cfg = SceneConfig(duration=8.0, waypoints=[[0.6, 4.0, 1.5], [2.8, 2.9, 1.5]], occlusion_region=MID, seed=3)
    free = SceneConfig(duration=8.0, waypoints=cfg.waypoints, seed=3)
    fo, truth = synth_frames(cfg)
    ff, _ = synth_frames(free)
    t = int(np.flatnonzero(truth.occluded)[0])
    x0, _, x1, _ = MID
    assert not np.array_equal(fo[t].pixels[:, x0:x1], ff[t].pixels[:, x0:x1])
    np.testing.assert_array_equal(fo[t].pixels[:, :x0 - 30], ff[t].pixels[:, :x0 - 30])


def test_projected_truth_equals_camera_projection():
    cfg = SceneConfig(duration=2.0, seed=7)
    truth = scene_truth(cfg)
    uv, _ = cfg.cam.project(truth.positions_3d)
    np.testing.assert_array_equal(truth.positions_2d, uv)


def test_generation_is_deterministic():
    cfg = SceneConfig(duration=0.5, seed=11)
    a, b = synth_audio(cfg), synth_audio(cfg)
    np.testing.assert_array_equal(a, b)
    fa, _ = synth_frames(cfg)
    fb, _ = synth_frames(cfg)
    for x, y in zip(fa, fb):
        np.testing.assert_array_equal(x.pixels, y.pixels)


def test_glitch_segments_replace_frames_with_noise():
    cfg = SceneConfig(duration=1.0, glitches=[(0.4, 0.6)], seed=2)
    frames, truth = synth_frames(cfg)
    np.testing.assert_array_equal(truth.glitched, (truth.times >= 0.4) & (truth.times < 0.6))
    clean, _ = synth_frames(SceneConfig(duration=1.0, seed=2))
    for f, g, flag in zip(frames, clean, truth.glitched):
        assert np.array_equal(f.pixels, g.pixels) != flag


def test_trajectory_outside_room_rejected():
    with pytest.raises(ConfigurationError):
        SceneConfig(waypoints=[[5.0, 1.0, 1.5]])
    with pytest.raises(ConfigurationError):
        SceneConfig(waypoints=[[1.0, 1.0, 0.5]])


def test_walk_goes_back_and_forth():
    cfg = SceneConfig(waypoints=[[1.0, 3.0, 1.5], [2.0, 3.0, 1.5]], speed=0.5)
    np.testing.assert_allclose(cfg.position(2.0), [2.0, 3.0, 1.5])
    np.testing.assert_allclose(cfg.position(4.0), [1.0, 3.0, 1.5])
    np.testing.assert_allclose(cfg.position(1.0), [1.5, 3.0, 1.5])
