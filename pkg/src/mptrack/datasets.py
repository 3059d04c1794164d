"""Randomized simulator scenes for training the attention network, and corrupted stacks for testing it."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .perception import CueStack, TrainingSet, training_samples
from .pipeline import CueSequence, CueSettings, extract_cues, simulate
from .simulator import SceneConfig, middle_third_region


@dataclass(frozen=True)
class SceneSampler:
    """Ranges the random training scenes are drawn from."""

    duration: float = 8.0
    n_waypoints: tuple[int, int] = (2, 4)
    x_range: tuple[float, float] = (0.5, 3.0)
    y_range: tuple[float, float] = (2.4, 5.0)
    z_range: tuple[float, float] = (1.35, 1.65)
    speed_range: tuple[float, float] = (0.3, 0.7)
    snr_range: tuple[float, float] = (-5.0, 20.0)
    talk_range: tuple[float, float] = (0.5, 2.0)  # s
    gap_range: tuple[float, float] = (0.4, 2.0)  # s, always > 300 ms
    occlusion_prob: float = 0.5
    glitch_prob: float = 1.0  # chance of one camera-noise segment
    glitch_range: tuple[float, float] = (1.0, 3.0)  # s
    margin_px: float = 30.0

    def _waypoints(self, cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
        H, W = cfg.image_size
        lo = np.array([self.x_range[0], self.y_range[0], self.z_range[0]])
        hi = np.array([self.x_range[1], self.y_range[1], self.z_range[1]])
        n = int(rng.integers(self.n_waypoints[0], self.n_waypoints[1] + 1))
        pts = []
        while len(pts) < n:
            p = rng.uniform(lo, hi)
            uv, _ = cfg.cam.project(p[None])
            m = self.margin_px
            if m <= uv[0, 0] <= W - 1 - m and m <= uv[0, 1] <= H - 1 - m:
                pts.append(p)
        return np.array(pts)

    def _speech(self, rng: np.random.Generator) -> list[tuple[float, float]]:
        segs, t = [], float(rng.uniform(0.0, 0.3))
        while t < self.duration:
            end = min(self.duration, t + rng.uniform(*self.talk_range))
            segs.append((t, end))
            t = end + rng.uniform(*self.gap_range)
        return segs

    def sample(self, seed: int) -> SceneConfig:
        rng = np.random.default_rng([seed, 11])
        base = SceneConfig(duration=self.duration, seed=seed)
        occluded = rng.random() < self.occlusion_prob
        schedule = None
        if occluded:
            a = rng.uniform(0.0, self.duration / 2)
            schedule = [(a, a + rng.uniform(min(1.0, self.duration / 4), self.duration / 2))]
        glitches = None
        if rng.random() < self.glitch_prob:
            a = rng.uniform(0.0, max(0.0, self.duration - self.glitch_range[0]))
            glitches = [(a, a + rng.uniform(*self.glitch_range))]
        return replace(
            base,
            glitches=glitches,
            waypoints=self._waypoints(base, rng),
            speed=float(rng.uniform(*self.speed_range)),
            speech=self._speech(rng),
            snr_db=float(rng.uniform(*self.snr_range)),
            occlusion_region=middle_third_region(base.image_size) if occluded else None,
            occlusion_schedule=schedule,
        )


def scene_sequence(cfg: SceneConfig, settings: CueSettings = CueSettings()) -> CueSequence:
    return CueSequence(extract_cues(simulate(cfg), settings), cache_size=32)


def _scene_samples(args) -> TrainingSet:
    cfg, settings, n = args
    return training_samples(scene_sequence(cfg, settings), n)


def workers_from_env(default: int = 1) -> int:
    """Worker count from ``MPT_WORKERS`` (at least 1)."""
    try:
        return max(1, int(os.environ.get("MPT_WORKERS", default)))
    except ValueError:
        return default


def build_training_set(configs: Sequence[SceneConfig], settings: CueSettings = CueSettings(), n: int = 6,
                       workers: int | None = None) -> TrainingSet:
    """Descriptors and self-supervised labels for every frame of every scene, in config order."""
    jobs = [(c, settings, n) for c in configs]
    workers = workers_from_env() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_scene_samples, jobs))
    else:
        parts = [_scene_samples(j) for j in jobs]
    return TrainingSet.concat(parts)


def noise_map(shape, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. uniform noise rescaled to exactly [0, 1]."""
    x = rng.random(shape)
    return (x - x.min()) / (x.max() - x.min())


def corrupt(v: CueStack, modality: str, rng: np.random.Generator) -> CueStack:
    """Replace every channel of one modality with an independent noise map."""
    ch = v.channels.copy()
    sl = slice(0, v.n_audio) if modality == "audio" else slice(v.n_audio, v.n_channels)
    for i in range(*sl.indices(v.n_channels)):
        ch[i] = noise_map(ch[i].shape, rng)
    return CueStack(ch, v.n_audio, v.time)
