"""SIR particle filter on 2-D image position, weighted by the fusion map.

Each step first moves a group of particles onto the fusion-map peak, then
diffuses everything with Gaussian noise, takes the (bilinearly sampled) map
value at each particle as its new weight, reports the weighted mean and
resamples systematically when the effective sample size drops below half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError
from .perception import CueStack, PerceptionParams, fusion_map, mode_scores
from .scoremap import ScoreMap, bilinear_sample


@dataclass
class ParticleSet:
    positions: np.ndarray  # (N, 2) pixel (x, y)
    weights: np.ndarray  # (N,)
    rng: np.random.Generator

    @property
    def n(self) -> int:
        return len(self.weights)

    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights**2))

    def mean(self) -> np.ndarray:
        return self.weights @ self.positions


@dataclass(frozen=True)
class Dynamics:
    sigma: tuple[float, float] | None = None  # px; None = 2% of the frame diagonal
    reset_fraction: float = 0.25
    weight_floor: float = 1e-6
    resample_below: float = 0.5  # ESS fraction triggering resampling

    def sigma_for(self, image_size) -> np.ndarray:
        if self.sigma is not None:
            return np.asarray(self.sigma, dtype=float)
        H, W = image_size
        return np.full(2, 0.02 * math.hypot(H, W))


@dataclass(frozen=True)
class TrackState:
    estimate: np.ndarray  # (x, y)
    bbox_size: tuple[float, float]  # (width, height)
    ess: float
    peak: np.ndarray  # fusion-map argmax (x, y)
    peak_value: float
    resampled: bool = False
    uninformative: bool = False


def clamp(positions: np.ndarray, image_size) -> np.ndarray:
    H, W = image_size
    return np.column_stack([np.clip(positions[:, 0], 0.0, W - 1.0), np.clip(positions[:, 1], 0.0, H - 1.0)])


def init(bbox, n: int = 100, seed: int | np.random.Generator = 0, image_size=None,
         sigma: float | None = None) -> ParticleSet:
    """Gaussian cloud around the box center (std = diagonal / 4), uniform weights.

    ``bbox`` is ``(cx, cy, width, height)``.
    """
    if n < 1:
        raise InputError("need at least one particle")
    cx, cy, w, h = map(float, bbox)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    s = math.hypot(w, h) / 4.0 if sigma is None else sigma
    pos = np.array([cx, cy]) + s * rng.standard_normal((n, 2))
    if image_size is not None:
        pos = clamp(pos, image_size)
    return ParticleSet(pos, np.full(n, 1.0 / n), rng)


def reset_to_peak(ps: ParticleSet, peak_xy, fraction: float) -> np.ndarray:
    """Move ceil(fraction*N) particles, drawn without replacement, onto the peak.

    Random rather than lowest-weight selection, so clusters parked on a stale
    secondary maximum are drained too. Returns the moved indices.
    """
    k = min(ps.n, math.ceil(fraction * ps.n)) if fraction > 0 else 0
    idx = np.sort(ps.rng.choice(ps.n, k, replace=False)) if k else np.zeros(0, dtype=int)
    ps.positions[idx] = peak_xy
    return idx


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Ancestor indices by systematic resampling (one uniform offset, N strata)."""
    n = len(weights)
    u = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, u, side="right")


def step(ps: ParticleSet, Z: ScoreMap, dyn: Dynamics = Dynamics()) -> tuple[ParticleSet, TrackState]:
    """One filter iteration driven by fusion map ``Z``; returns a new particle set."""
    values = Z.values
    if not np.all(np.isfinite(values)):
        raise InputError("fusion map is not finite")
    image_size = values.shape
    out = ParticleSet(ps.positions.copy(), ps.weights.copy(), ps.rng)
    peak = Z.peak_xy
    reset_to_peak(out, peak, dyn.reset_fraction)
    sigma = dyn.sigma_for(image_size)
    out.positions = clamp(out.positions + sigma * out.rng.standard_normal(out.positions.shape), image_size)
    w = bilinear_sample(values, out.positions)
    uninformative = bool(np.all(w <= dyn.weight_floor))
    if uninformative:
        w = np.ones(out.n)
    else:
        w = np.maximum(w, dyn.weight_floor)
    out.weights = w / w.sum()
    estimate = out.mean()
    ess = out.ess()
    resampled = ess < dyn.resample_below * out.n
    if resampled:
        idx = systematic_resample(out.weights, out.rng)
        out.positions = out.positions[idx]
        out.weights = np.full(out.n, 1.0 / out.n)
    return out, TrackState(estimate, (0.0, 0.0), ess, peak, float(values.max()), resampled, uninformative)


@dataclass(frozen=True)
class TrackerConfig:
    bbox: tuple[float, float, float, float]  # initial (cx, cy, width, height)
    n_particles: int = 100
    seed: int = 0
    mode: str = "mpt"
    dynamics: Dynamics = field(default_factory=Dynamics)


@dataclass
class Trajectory:
    states: list[TrackState]
    alphas: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.states)

    @property
    def estimates(self) -> np.ndarray:
        return np.array([s.estimate for s in self.states]).reshape(-1, 2)


def track(stacks: Sequence[CueStack], params: PerceptionParams | None, cfg: TrackerConfig,
          on_frame=None) -> Trajectory:
    """Run the filter over a cue-stack sequence.

    ``on_frame(t, stack, Z, state)`` is called after every step, e.g. to save
    fusion-map snapshots.
    """
    if len(stacks) == 0:
        raise InputError("empty cue sequence")
    image_size = stacks[0].channels.shape[1:]
    ps = init(cfg.bbox, cfg.n_particles, cfg.seed, image_size)
    size = (float(cfg.bbox[2]), float(cfg.bbox[3]))
    states, alphas = [], []
    for t in range(len(stacks)):
        v = stacks[t]
        alpha = mode_scores(v, params, cfg.mode)
        Z = fusion_map(v, alpha)
        ps, st = step(ps, Z, cfg.dynamics)
        st = TrackState(st.estimate, size, st.ess, st.peak, st.peak_value, st.resampled, st.uninformative)
        states.append(st)
        alphas.append(alpha)
        if on_frame is not None:
            on_frame(t, v, Z, st)
    return Trajectory(states, alphas)
