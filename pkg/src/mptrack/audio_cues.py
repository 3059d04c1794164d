"""Acoustic maps on the image lattice.

GCC-PHAT coherence per microphone pair, averaged over the pair set at the
theoretical delays of every grid point (global coherence field), the best
depth plane per frame (spatial GCF), and the best frames in a trailing window
(spatio-temporal GCF).

Delay convention: ``gcc_phat(a, b, lag)`` peaks at the delay of ``b``
relative to ``a``. For a pair ``(i, k)`` the field is evaluated at
``tdoa(p, (i, k))``, the delay of mic ``i`` relative to mic ``k``, so the
correlation is built from ``X_i * conj(X_k)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from .errors import DegenerateInputWarning, InputError
from .geometry import MicArrayConfig, SampleGrid, pair_tdoas
from .scoremap import ScoreMap, normalize

PHAT_FLOOR = 1e-12
DEFAULT_OVERSAMPLE = 4


@dataclass(frozen=True)
class AudioFrameSet:
    frames: np.ndarray  # (T, n_mics, frame_len), already windowed
    frame_len: int
    hop: int
    sample_rate: float
    frame_times: np.ndarray  # frame centers, seconds

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_mics(self) -> int:
        return self.frames.shape[1]

    def frame_at(self, time_s: float) -> int:
        """Index of the frame whose center is closest to ``time_s``."""
        return int(np.clip(np.argmin(np.abs(self.frame_times - time_s)), 0, self.n_frames - 1))


@dataclass(frozen=True)
class StgcfCues:
    maps: list[ScoreMap]
    source_times: list[int]
    peak_values: list[float]
    depth_indices: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class SgcfSequence:
    """Raw spatial-GCF maps for every frame of a recording."""

    raw_maps: np.ndarray  # (T, h, w), NaN at masked grid points
    k_max: np.ndarray  # (T,)
    peak_values: np.ndarray  # (T,)

    def score_map(self, t: int) -> ScoreMap:
        values, degenerate = normalize(self.raw_maps[t])
        return ScoreMap(values, "audio", t, float(self.peak_values[t]), degenerate)


def frame_signal(signal, sample_rate: float, frame_ms: float = 40.0, hop_fraction: float = 0.5,
                 window: str = "hamming") -> AudioFrameSet:
    """Cut multi-channel audio ``(n_mics, n_samples)`` into overlapping windowed frames."""
    x = np.asarray(signal, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if sample_rate <= 0:
        raise InputError("sample rate must be positive")
    frame_len = int(round(frame_ms * sample_rate / 1000.0))
    hop = max(1, int(round(frame_len * hop_fraction)))
    if frame_len <= 0 or x.shape[1] < frame_len:
        raise InputError(f"signal of {x.shape[1]} samples is shorter than one {frame_len}-sample frame")
    win = get_window(window, frame_len, fftbins=True)
    blocks = sliding_window_view(x, frame_len, axis=1)[:, ::hop, :]  # (n_mics, T, L)
    frames = np.ascontiguousarray(blocks.transpose(1, 0, 2)) * win
    n = frames.shape[0]
    times = (np.arange(n) * hop + frame_len / 2.0) / sample_rate
    return AudioFrameSet(frames, frame_len, hop, float(sample_rate), times)


def _bin_weights(n: int) -> np.ndarray:
    # weights of the one-sided spectrum in the real inverse transform
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return w


def phat_spectrum(cross: np.ndarray) -> np.ndarray:
    """Unit-magnitude cross-power spectrum, magnitude floored at ``PHAT_FLOOR``."""
    return cross / np.maximum(np.abs(cross), PHAT_FLOOR)


def gcc_phat(frame_a, frame_b, lag, sample_rate: float = 1.0):
    """GCC-PHAT coherence between two frames at arbitrary (fractional) lag(s).

    Evaluated exactly in the frequency domain. The result peaks where ``lag``
    equals the delay of ``frame_b`` relative to ``frame_a``; values lie in
    [-1, 1]. A frame with zero energy yields 0 everywhere and a
    :class:`DegenerateInputWarning`.

    Parameters
    ----------
    frame_a, frame_b : array_like
        Equal-length windowed blocks.
    lag : float or array_like
        Lag(s) in seconds (samples when ``sample_rate`` is 1).
    sample_rate : float
    """
    a = np.asarray(frame_a, dtype=float)
    b = np.asarray(frame_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError("frames must be 1-D and of equal length")
    n = a.size
    if not (np.any(a) and np.any(b)):
        warnings.warn("zero-energy frame: coherence defined as 0", DegenerateInputWarning, stacklevel=2)
        return np.zeros_like(np.asarray(lag, dtype=float))
    P = phat_spectrum(np.fft.rfft(b) * np.conj(np.fft.rfft(a)))
    return _evaluate_exact(P, n, np.asarray(lag, dtype=float) * sample_rate)


def _evaluate_exact(P: np.ndarray, n: int, lag_samples: np.ndarray) -> np.ndarray:
    """r(tau) = (1/n) sum_k w_k Re(P_k exp(2j pi k tau / n)) for lags in samples."""
    k = np.arange(P.shape[-1])
    phase = np.exp(2j * np.pi * np.multiply.outer(lag_samples, k) / n)
    return (phase * (_bin_weights(n) * P)).real.sum(axis=-1) / n


def oversampled_correlation(P: np.ndarray, n: int, oversample: int = DEFAULT_OVERSAMPLE) -> np.ndarray:
    """Inverse transform of PHAT spectra ``(..., n//2+1)`` onto a lag grid of
    spacing ``1/oversample`` samples, circular over ``n * oversample`` points."""
    Q = P.copy()
    if n % 2 == 0:
        # the Nyquist bin becomes interior after zero padding; keep its weight at 1
        Q[..., -1] *= 0.5
    return np.fft.irfft(Q, n=n * oversample, axis=-1) * oversample


def pair_phat_spectra(frames: AudioFrameSet, mics: MicArrayConfig, t) -> np.ndarray:
    """PHAT spectra ``(..., n_pairs, n_bins)`` for frame index or index array ``t``."""
    X = np.fft.rfft(frames.frames[t], axis=-1)
    pa = mics.pair_array
    return phat_spectrum(X[..., pa[:, 0], :] * np.conj(X[..., pa[:, 1], :]))


class _LagPlan:
    """Precomputed interpolation indices of every (pair, grid point) delay."""

    def __init__(self, grid: SampleGrid, mics: MicArrayConfig, frames: AudioFrameSet, oversample: int):
        if frames.n_mics != mics.n_mics:
            raise InputError(f"{frames.n_mics} audio channels but {mics.n_mics} microphones configured")
        self.shape = grid.shape
        self.valid = grid.valid_mask.reshape(-1)
        self.oversample = oversample
        self.n = frames.frame_len
        pts = grid.points_3d.reshape(-1, 3)[self.valid]
        self.tau_samples = pair_tdoas(pts, mics) * frames.sample_rate  # (P, G)
        L = self.n * oversample
        pos = self.tau_samples * oversample
        i0 = np.floor(pos).astype(np.int64)
        self.frac = pos - i0
        i0 %= L
        i1 = (i0 + 1) % L
        offs = (np.arange(mics.n_pairs) * L)[:, None]
        self.idx0 = i0 + offs
        self.idx1 = i1 + offs

    def gather(self, corr: np.ndarray) -> np.ndarray:
        """Mean over pairs of linearly interpolated correlations -> ``(d, h, w)`` with NaN holes."""
        flat = corr.reshape(-1)
        vals = flat[self.idx0] * (1.0 - self.frac) + flat[self.idx1] * self.frac
        out = np.full(self.valid.size, np.nan)
        out[self.valid] = vals.mean(axis=0)
        return out.reshape(self.shape)


def gcf_volume(frames: AudioFrameSet, t: int, grid: SampleGrid, mics: MicArrayConfig,
               oversample: int = DEFAULT_OVERSAMPLE, exact: bool = False, _plan: _LagPlan | None = None):
    """Raw GCF at every grid point and depth, ``(d, h, w)``; NaN where masked."""
    if not 0 <= t < frames.n_frames:
        raise InputError(f"frame index {t} out of range")
    plan = _plan or _LagPlan(grid, mics, frames, oversample)
    P = pair_phat_spectra(frames, mics, t)
    if exact:
        vals = np.mean([_evaluate_exact(P[p], plan.n, plan.tau_samples[p]) for p in range(len(P))], axis=0)
        out = np.full(plan.valid.size, np.nan)
        out[plan.valid] = vals
        return out.reshape(plan.shape)
    return plan.gather(oversampled_correlation(P, plan.n, plan.oversample))


def gcf_map(frames: AudioFrameSet, t: int, grid: SampleGrid, k: int, mics: MicArrayConfig,
            oversample: int = DEFAULT_OVERSAMPLE, exact: bool = False) -> ScoreMap:
    """Normalized GCF map on depth plane ``k``; flagged degenerate if the plane is fully masked."""
    raw = gcf_volume(frames, t, grid, mics, oversample, exact)[k]
    values, degenerate = normalize(raw)
    peak = float(np.nanmax(raw)) if np.isfinite(raw).any() else float("-inf")
    return ScoreMap(values, "audio", t, peak, degenerate)


def _select_depth(volume: np.ndarray) -> tuple[int, float]:
    peaks = np.array([np.nanmax(v) if np.isfinite(v).any() else -np.inf for v in volume])
    if not np.isfinite(peaks).any():
        raise InputError("every depth plane is masked")
    k = int(np.argmax(peaks))  # first maximum, i.e. the nearer plane on ties
    return k, float(peaks[k])


def sgcf_map(frames: AudioFrameSet, t: int, grid: SampleGrid, mics: MicArrayConfig,
             oversample: int = DEFAULT_OVERSAMPLE, exact: bool = False) -> tuple[ScoreMap, int]:
    """GCF map of the depth plane holding the strongest peak, and that plane's index."""
    volume = gcf_volume(frames, t, grid, mics, oversample, exact)
    k, peak = _select_depth(volume)
    values, degenerate = normalize(volume[k])
    return ScoreMap(values, "audio", t, peak, degenerate), k


def sgcf_sequence(frames: AudioFrameSet, grid: SampleGrid, mics: MicArrayConfig,
                  oversample: int = DEFAULT_OVERSAMPLE, times=None, chunk: int = 16) -> SgcfSequence:
    """Spatial GCF for many frames at once (all frames by default).

    Frames not listed in ``times`` keep NaN maps and ``-inf`` peaks.
    """
    plan = _LagPlan(grid, mics, frames, oversample)
    T = frames.n_frames
    d, h, w = grid.shape
    raw = np.full((T, h, w), np.nan)
    kmax = np.zeros(T, dtype=int)
    peaks = np.full(T, -np.inf)
    todo = np.arange(T) if times is None else np.unique(np.asarray(times, dtype=int))
    for start in range(0, len(todo), chunk):
        ts = todo[start:start + chunk]
        corr = oversampled_correlation(pair_phat_spectra(frames, mics, ts), plan.n, oversample)
        for t, c in zip(ts, corr):
            vol = plan.gather(c)
            k, pk = _select_depth(vol)
            raw[t], kmax[t], peaks[t] = vol[k], k, pk
    return SgcfSequence(raw, kmax, peaks)


def stgcf_window(t: int, m1: int) -> range:
    """Frame indices of the trailing window ``[t - m1, t]``, truncated at 0."""
    return range(max(0, t - m1), t + 1)


def select_frames(peak_values, t: int, m1: int, m2: int) -> list[int]:
    """Indices of the ``m2`` strongest frames in the trailing window, in time order.

    Ranking is by peak value, ties going to the more recent frame. A window
    shorter than ``m2`` is padded by repeating its strongest frame.
    """
    window = list(stgcf_window(t, m1))
    ranked = sorted(window, key=lambda q: (-peak_values[q], -q))
    chosen = ranked[:m2]
    chosen += [ranked[0]] * (m2 - len(chosen))
    return sorted(chosen)


def stgcf_from_sequence(seq: SgcfSequence, t: int, m1: int = 15, m2: int = 5) -> StgcfCues:
    chosen = select_frames(seq.peak_values, t, m1, m2)
    return StgcfCues(
        maps=[seq.score_map(q) for q in chosen],
        source_times=chosen,
        peak_values=[float(seq.peak_values[q]) for q in chosen],
        depth_indices=[int(seq.k_max[q]) for q in chosen],
    )


def stgcf(frames: AudioFrameSet, t: int, m1: int, m2: int, grid: SampleGrid, mics: MicArrayConfig,
          oversample: int = DEFAULT_OVERSAMPLE) -> StgcfCues:
    """Spatio-temporal GCF cues at frame ``t``: the ``m2`` best sGCF maps of ``[t-m1, t]``."""
    if t < 0 or t >= frames.n_frames:
        raise InputError(f"frame index {t} out of range")
    seq = sgcf_sequence(frames, grid, mics, oversample, times=list(stgcf_window(t, m1)))
    return stgcf_from_sequence(seq, t, m1, m2)
