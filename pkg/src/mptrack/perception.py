"""Cue stacking, channel-attention reliability scores, self-supervised labels, fusion.

The attention network follows the channel-attention pattern: every channel is
summarized by its spatial mean and max, both descriptor vectors pass through
one shared two-layer network (ReLU hidden layer, reduction ``r``), the two
outputs are summed and squashed by a sigmoid. Gradients are derived by hand.

Before entering the network the descriptors are standardized with a fixed,
per-channel shift and scale estimated once from the training set (not
trained). Raw descriptors of min-max normalized maps are tiny (audio means
near 0.1, maxima pinned at 1), and plain gradient descent at lr 0.01 cannot
pick up their variation from a +-0.1 initialization.

Labels for channel ``i`` at time ``t`` combine

* a spatial factor: the average, within and then across modalities, of all
  channels sampled at channel ``i``'s peak, and
* a temporal factor: channel ``i``'s own maps over ``[t-n, t+n]`` sampled at
  that same peak position (window clipped at the sequence ends, denominator
  = number of frames actually used),

and the label is their product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .audio_cues import StgcfCues
from .errors import InputError
from .scoremap import ScoreMap

MODES = ("mpt", "avg", "audio", "visual")


@dataclass(frozen=True)
class CueStack:
    channels: np.ndarray  # (C, H, W), audio channels first
    n_audio: int
    time: int = 0
    peaks: np.ndarray = field(default=None)  # (C, 2) as (row, col)

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=float)
        if ch.ndim != 3:
            raise InputError("channels must be (C, H, W)")
        object.__setattr__(self, "channels", ch)
        if self.peaks is None:
            object.__setattr__(self, "peaks", channel_peaks(ch))

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def n_visual(self) -> int:
        return self.n_channels - self.n_audio

    @property
    def audio(self) -> np.ndarray:
        return self.channels[: self.n_audio]

    @property
    def visual(self) -> np.ndarray:
        return self.channels[self.n_audio:]


def channel_peaks(channels: np.ndarray) -> np.ndarray:
    """Row/col of each channel's maximum (first in row-major order on ties)."""
    C, H, W = channels.shape
    flat = np.argmax(channels.reshape(C, -1), axis=1)
    return np.stack([flat // W, flat % W], axis=1)


def stack_cues(audio: StgcfCues | Sequence[ScoreMap], visual: Sequence[ScoreMap], time: int | None = None) -> CueStack:
    """Stack audio maps then visual maps, keeping the input order within each modality."""
    amaps = list(audio.maps) if isinstance(audio, StgcfCues) else list(audio)
    maps = amaps + list(visual)
    if not maps:
        raise InputError("no cue maps to stack")
    shape = maps[0].values.shape
    for m in maps:
        if m.values.shape != shape:
            raise InputError(f"lattice mismatch: {m.values.shape} vs {shape}")
    if time is None:
        time = visual[0].time if visual else amaps[-1].time
    return CueStack(np.stack([m.values for m in maps]), len(amaps), time)


@dataclass
class PerceptionParams:
    w1: np.ndarray  # (hidden, C)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (C, hidden)
    b2: np.ndarray  # (C,)
    shift: np.ndarray = None  # (2, C) subtracted from the [avg, max] descriptors; zeros if None
    scale: np.ndarray = None  # (2, C) divisor after the shift; ones if None

    NAMES = ("w1", "b1", "w2", "b2")  # trainable

    def __post_init__(self):
        C = self.w2.shape[0]
        self.shift = np.zeros((2, C)) if self.shift is None else np.asarray(self.shift, dtype=float)
        self.scale = np.ones((2, C)) if self.scale is None else np.asarray(self.scale, dtype=float)
        if self.shift.shape != (2, C) or self.scale.shape != (2, C):
            raise InputError(f"standardization arrays must be (2, {C})")
        if np.any(self.scale <= 0):
            raise InputError("standardization scale must be positive")

    @property
    def n_channels(self) -> int:
        return self.w2.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @classmethod
    def init(cls, n_channels: int, reduction: int = 2, seed: int = 0, scale: float = 0.1) -> "PerceptionParams":
        hidden = max(1, n_channels // reduction)
        rng = np.random.default_rng(seed)
        u = lambda *s: rng.uniform(-scale, scale, size=s)  # noqa: E731
        return cls(u(hidden, n_channels), u(hidden), u(n_channels, hidden), u(n_channels))

    @classmethod
    def zeros(cls, n_channels: int, reduction: int = 2) -> "PerceptionParams":
        hidden = max(1, n_channels // reduction)
        return cls(np.zeros((hidden, n_channels)), np.zeros(hidden), np.zeros((n_channels, hidden)), np.zeros(n_channels))

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, n) for n in self.NAMES]

    def copy(self) -> "PerceptionParams":
        return PerceptionParams(*(a.copy() for a in self.arrays()), self.shift.copy(), self.scale.copy())

    def standardize(self, avg: np.ndarray, mx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (avg - self.shift[0]) / self.scale[0], (mx - self.shift[1]) / self.scale[1]


def fit_standardization(avg: np.ndarray, mx: np.ndarray, min_scale: float = 1e-2) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and std of the descriptors; near-constant channels keep scale ``min_scale``."""
    shift = np.stack([avg.mean(axis=0), mx.mean(axis=0)])
    scale = np.maximum(np.stack([avg.std(axis=0), mx.std(axis=0)]), min_scale)
    return shift, scale


def descriptors(channels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Spatial average- and max-pool per channel for ``(..., C, H, W)``."""
    return channels.mean(axis=(-2, -1)), channels.max(axis=(-2, -1))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _forward(params: PerceptionParams, avg: np.ndarray, mx: np.ndarray):
    avg, mx = params.standardize(avg, mx)
    za = avg @ params.w1.T + params.b1
    zm = mx @ params.w1.T + params.b1
    ha, hm = np.maximum(za, 0.0), np.maximum(zm, 0.0)
    s = ha @ params.w2.T + hm @ params.w2.T + 2.0 * params.b2
    return _sigmoid(s), (za, zm, ha, hm)


def attention_scores(params: PerceptionParams, avg: np.ndarray, mx: np.ndarray) -> np.ndarray:
    """Scores in (0, 1) for descriptor batches ``(B, C)`` (or single ``(C,)`` vectors)."""
    if not (np.all(np.isfinite(avg)) and np.all(np.isfinite(mx))):
        raise InputError("non-finite cue descriptors")
    if avg.shape[-1] != params.n_channels:
        raise InputError(f"{avg.shape[-1]} channels but the network expects {params.n_channels}")
    return _forward(params, avg, mx)[0]


def attention_forward(v: CueStack, params: PerceptionParams) -> np.ndarray:
    """Per-channel reliability scores of one cue stack."""
    if not np.all(np.isfinite(v.channels)):
        raise InputError("cue stack contains NaN or inf")
    avg, mx = descriptors(v.channels)
    return attention_scores(params, avg, mx)


def loss_and_grad(params: PerceptionParams, avg: np.ndarray, mx: np.ndarray, labels: np.ndarray):
    """Mean over the batch of sum_i (alpha_i - l_i)^2, and its gradient per parameter."""
    B = avg.shape[0]
    alpha, (za, zm, ha, hm) = _forward(params, avg, mx)
    avg, mx = params.standardize(avg, mx)
    err = alpha - labels
    loss = float(np.sum(err**2) / B)
    ds = 2.0 * err * alpha * (1.0 - alpha) / B  # (B, C)
    g_b2 = 2.0 * ds.sum(axis=0)
    g_w2 = ds.T @ ha + ds.T @ hm
    dha = (ds @ params.w2) * (za > 0)
    dhm = (ds @ params.w2) * (zm > 0)
    g_w1 = dha.T @ avg + dhm.T @ mx
    g_b1 = dha.sum(axis=0) + dhm.sum(axis=0)
    return loss, PerceptionParams(g_w1, g_b1, g_w2, g_b2)


def spatial_factor(v: CueStack, i: int) -> float:
    """Mean over audio channels and mean over visual channels at channel ``i``'s peak, averaged."""
    r, c = v.peaks[i]
    col = v.channels[:, r, c]
    if v.n_audio == 0 or v.n_visual == 0:
        raise InputError("spatial factor needs both modalities")
    return 0.5 * (col[: v.n_audio].mean() + col[v.n_audio:].mean())


def temporal_window(t: int, n: int, length: int) -> range:
    return range(max(0, t - n), min(length, t + n + 1))


def temporal_factor(seq: Sequence[CueStack], t: int, i: int, n: int = 6) -> float:
    """Channel ``i`` over frames ``[t-n, t+n]`` (clipped) sampled at its peak at time ``t``."""
    r, c = seq[t].peaks[i]
    window = temporal_window(t, n, len(seq))
    return float(sum(seq[q].channels[i, r, c] for q in window) / len(window))


@dataclass(frozen=True)
class PerceptionLabel:
    spatial: np.ndarray
    temporal: np.ndarray
    label: np.ndarray


def make_labels(seq: Sequence[CueStack], t: int, n: int = 6) -> PerceptionLabel:
    v = seq[t]
    rows, cols = v.peaks[:, 0], v.peaks[:, 1]
    at_peaks = v.channels[:, rows, cols]  # [j, i] = channel j at channel i's peak
    ls = 0.5 * (at_peaks[: v.n_audio].mean(axis=0) + at_peaks[v.n_audio:].mean(axis=0))
    window = temporal_window(t, n, len(seq))
    idx = np.arange(v.n_channels)
    lt = sum(seq[q].channels[idx, rows, cols] for q in window) / len(window)
    return PerceptionLabel(ls, lt, ls * lt)


@dataclass
class TrainingSet:
    avg: np.ndarray  # (N, C)
    mx: np.ndarray  # (N, C)
    labels: np.ndarray  # (N, C)

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def concat(cls, parts: Sequence["TrainingSet"]) -> "TrainingSet":
        return cls(*(np.concatenate([getattr(p, a) for p in parts]) for a in ("avg", "mx", "labels")))


def training_samples(seq: Sequence[CueStack], n: int = 6) -> TrainingSet:
    """Descriptors and labels for every stack of a sequence."""
    if len(seq) == 0:
        raise InputError("empty sequence")
    avg, mx, lab = [], [], []
    for t in range(len(seq)):
        a, m = descriptors(seq[t].channels)
        avg.append(a)
        mx.append(m)
        lab.append(make_labels(seq, t, n).label)
    return TrainingSet(np.array(avg), np.array(mx), np.array(lab))


@dataclass
class TrainResult:
    params: PerceptionParams
    loss_history: list[float]  # [initial, epoch 1, ..., epoch E]


def train(data: TrainingSet | Sequence[Sequence[CueStack]], epochs: int = 20, batch_size: int = 16,
          lr: float = 0.01, reduction: int = 2, seed: int = 0, n: int = 6,
          init: PerceptionParams | None = None, standardize: bool = True) -> TrainResult:
    """Plain mini-batch gradient descent on the squared error to the labels.

    Without ``init`` the weights start uniform in [-0.1, 0.1] and, when
    ``standardize`` is set, the descriptor shift/scale are fitted to ``data``.
    ``loss_history[0]`` is the full-dataset loss of the initial parameters,
    later entries are the sample-weighted average of the minibatch losses in
    each epoch.
    """
    if not isinstance(data, TrainingSet):
        seqs = list(data)
        if not seqs:
            raise InputError("empty training set")
        data = TrainingSet.concat([training_samples(s, n) for s in seqs])
    N = len(data)
    if N == 0:
        raise InputError("empty training set")
    C = data.labels.shape[1]
    if init is not None:
        params = init.copy()
    else:
        params = PerceptionParams.init(C, reduction, seed)
        if standardize:
            params.shift, params.scale = fit_standardization(data.avg, data.mx)
    rng = np.random.default_rng([seed, 7])
    history = [loss_and_grad(params, data.avg, data.mx, data.labels)[0]]
    for _ in range(epochs):
        order = rng.permutation(N)
        total = 0.0
        for start in range(0, N, batch_size):
            b = order[start:start + batch_size]
            loss, grad = loss_and_grad(params, data.avg[b], data.mx[b], data.labels[b])
            total += loss * len(b)
            for name in PerceptionParams.NAMES:
                getattr(params, name)[...] -= lr * getattr(grad, name)
        history.append(total / N)
    return TrainResult(params, history)


def fusion_map(v: CueStack, alpha) -> ScoreMap:
    """Score-weighted channel average, divided by the channel count."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (v.n_channels,):
        raise InputError("one score per channel required")
    Z = np.tensordot(alpha, v.channels, axes=1) / v.n_channels
    return ScoreMap(Z, "fusion", v.time, float(Z.max()))


def mode_scores(v: CueStack, params: PerceptionParams | None, mode: str = "mpt") -> np.ndarray:
    """Channel scores for the full tracker and its ablations.

    ``avg`` gives every channel the same score; ``audio``/``visual`` keep one
    modality at a uniform score and zero the other.
    """
    C, A = v.n_channels, v.n_audio
    if mode == "mpt":
        if params is None:
            raise InputError("mpt mode needs trained parameters")
        return attention_forward(v, params)
    if mode == "avg":
        return np.ones(C)
    if mode == "audio":
        return np.r_[np.ones(A), np.zeros(C - A)]
    if mode == "visual":
        return np.r_[np.zeros(A), np.ones(C - A)]
    raise InputError(f"unknown mode {mode!r}; expected one of {MODES}")
