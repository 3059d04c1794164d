from __future__ import annotations

import numpy as np

from mptrack.datasets import SceneSampler, build_training_set, corrupt, noise_map, workers_from_env
from mptrack.perception import CueStack


def test_sampler_is_deterministic():
    s = SceneSampler()
    a, b = s.sample(17), s.sample(17)
    np.testing.assert_array_equal(a.waypoints, b.waypoints)
    assert a.speech == b.speech and a.snr_db == b.snr_db and a.glitches == b.glitches


def test_sampled_scenes_respect_ranges():
    s = SceneSampler()
    for seed in range(20):
        cfg = s.sample(seed)
        uv, _ = cfg.cam.project(cfg.waypoints)
        H, W = cfg.image_size
        assert np.all((uv >= s.margin_px) & (uv <= np.array([W, H]) - 1 - s.margin_px))
        assert s.snr_range[0] <= cfg.snr_db <= s.snr_range[1]
        gaps = [b0 - a1 for (_, a1), (b0, _) in zip(cfg.speech, cfg.speech[1:])]
        assert all(g >= s.gap_range[0] for g in gaps)
        assert cfg.glitches is not None


def test_noise_map_spans_unit_interval(rng):
    m = noise_map((10, 12), rng)
    assert m.min() == 0.0 and m.max() == 1.0


def test_corrupt_touches_one_modality(rng):
    v = CueStack(rng.random((7, 5, 6)), 5, 3)
    a = corrupt(v, "audio", rng)
    np.testing.assert_array_equal(a.visual, v.visual)
    assert not np.array_equal(a.audio, v.audio)
    b = corrupt(v, "visual", rng)
    np.testing.assert_array_equal(b.audio, v.audio)
    assert not np.array_equal(b.visual, v.visual) and b.time == 3


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv("MPT_WORKERS", "3")
    assert workers_from_env() == 3
    monkeypatch.setenv("MPT_WORKERS", "zero")
    assert workers_from_env() == 1
    monkeypatch.setenv("MPT_WORKERS", "-2")
    assert workers_from_env() == 1


def test_parallel_build_matches_serial():
    cfgs = [SceneSampler(duration=1.0).sample(s) for s in (1, 2)]
    serial = build_training_set(cfgs, workers=1)
    parallel = build_training_set(cfgs, workers=2)
    assert len(serial) == 50
    for name in ("avg", "mx", "labels"):
        np.testing.assert_array_equal(getattr(serial, name), getattr(parallel, name))
