"""Per-pixel likelihood maps shared by the audio, visual and fusion stages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScoreMap:
    values: np.ndarray
    kind: str  # "audio", "visual" or "fusion"
    time: int = 0
    raw_peak: float = float("nan")
    degenerate: bool = False

    @property
    def resolution(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def peak(self) -> tuple[int, int]:
        """(row, col) of the maximum; first in row-major order on ties."""
        idx = int(np.argmax(self.values))
        return divmod(idx, self.values.shape[1])

    @property
    def peak_xy(self) -> np.ndarray:
        r, c = self.peak
        return np.array([c, r], dtype=float)

    @property
    def peak_value(self) -> float:
        return float(self.values.max())


def normalize(raw: np.ndarray) -> tuple[np.ndarray, bool]:
    """Affine min-max to [0, 1] over finite entries.

    Non-finite entries (masked grid points) become 0. A constant or empty map
    comes back all zeros with the degeneracy flag set.
    """
    raw = np.asarray(raw, dtype=float)
    finite = np.isfinite(raw)
    out = np.zeros_like(raw)
    if not finite.any():
        return out, True
    lo, hi = raw[finite].min(), raw[finite].max()
    if hi - lo <= 0:
        return out, True
    out[finite] = (raw[finite] - lo) / (hi - lo)
    return out, False


def _interp_matrix(n_out: int, n_in: int) -> np.ndarray:
    # corner-aligned linear interpolation weights, rows sum to 1
    pos = np.linspace(0.0, n_in - 1.0, n_out)
    i0 = np.clip(np.floor(pos).astype(int), 0, n_in - 2) if n_in > 1 else np.zeros(n_out, dtype=int)
    frac = pos - i0
    A = np.zeros((n_out, n_in))
    if n_in == 1:
        A[:, 0] = 1.0
        return A
    A[np.arange(n_out), i0] = 1.0 - frac
    A[np.arange(n_out), i0 + 1] += frac
    return A


def upsample(values: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear resize with corner alignment: lattice node (i, j) of an ``h x w``
    map lands on pixel ``(j*(W-1)/(w-1), i*(H-1)/(h-1))``, matching the
    inclusive sampling lattice used for the acoustic grid."""
    H, W = size
    h, w = values.shape
    return _interp_matrix(H, h) @ values @ _interp_matrix(W, w).T


def upsample_map(m: ScoreMap, size: tuple[int, int]) -> ScoreMap:
    if m.values.shape == tuple(size):
        return m
    return ScoreMap(upsample(m.values, size), m.kind, m.time, m.raw_peak, m.degenerate)


def bilinear_sample(values: np.ndarray, xy: np.ndarray) -> np.ndarray:
    """Sample a map at fractional pixel positions ``(..., 2)`` given as (x, y)."""
    H, W = values.shape
    x = np.clip(xy[..., 0], 0.0, W - 1.0)
    y = np.clip(xy[..., 1], 0.0, H - 1.0)
    x0 = np.minimum(np.floor(x).astype(int), W - 2)
    y0 = np.minimum(np.floor(y).astype(int), H - 2)
    fx, fy = x - x0, y - y0
    v00 = values[y0, x0]
    v01 = values[y0, x0 + 1]
    v10 = values[y0 + 1, x0]
    v11 = values[y0 + 1, x0 + 1]
    return (v00 * (1 - fx) + v01 * fx) * (1 - fy) + (v10 * (1 - fx) + v11 * fx) * fy
