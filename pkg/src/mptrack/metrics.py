"""Tracking accuracy: mean pixel error and hit rate within half the box diagonal."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError


def _estimates(trajectory) -> np.ndarray:
    est = getattr(trajectory, "estimates", trajectory)
    return np.asarray(est, dtype=float).reshape(-1, 2)


def frame_errors(trajectory, truth) -> np.ndarray:
    """Euclidean pixel distance per frame; ``truth`` is ``(T, 2)`` or has ``positions_2d``."""
    est = _estimates(trajectory)
    gt = np.asarray(getattr(truth, "positions_2d", truth), dtype=float).reshape(-1, 2)
    if len(est) != len(gt):
        raise InputError(f"{len(est)} estimates but {len(gt)} ground-truth frames")
    if len(est) == 0:
        raise InputError("empty trajectory")
    return np.hypot(est[:, 0] - gt[:, 0], est[:, 1] - gt[:, 1])


def mae(trajectory, truth) -> float:
    """Mean per-frame pixel error."""
    return float(np.mean(frame_errors(trajectory, truth)))


def acc_threshold(bbox_size) -> float:
    """Half the diagonal of a ``(width, height)`` box."""
    w, h = bbox_size
    return 0.5 * math.hypot(w, h)


def acc(trajectory, truth, bbox_size) -> float:
    """Percentage of frames whose error is at most half the box diagonal (inclusive)."""
    e = frame_errors(trajectory, truth)
    return 100.0 * float(np.count_nonzero(e <= acc_threshold(bbox_size))) / len(e)


@dataclass(frozen=True)
class EvalReport:
    mae: float  # px
    acc: float  # percent
    errors: int  # frames outside the ACC threshold
    occlusion_rate: float  # percent of frames with the target masked
    frame_errors: np.ndarray

    @property
    def n_frames(self) -> int:
        return len(self.frame_errors)

    def summary(self) -> dict:
        return {"mae": round(self.mae, 6), "acc": round(self.acc, 6), "errors": self.errors,
                "occlusion_rate": round(self.occlusion_rate, 6), "frames": self.n_frames}


def evaluate(trajectory, truth, bbox_size=None) -> EvalReport:
    """Full report; ``bbox_size`` defaults to the truth's ``(height, width)`` box flipped to (w, h)."""
    e = frame_errors(trajectory, truth)
    if bbox_size is None:
        h, w = truth.bbox_size
        bbox_size = (w, h)
    thr = acc_threshold(bbox_size)
    hits = int(np.count_nonzero(e <= thr))
    occluded = getattr(truth, "occluded", None)
    occ = 100.0 * float(np.mean(occluded)) if occluded is not None else 0.0
    return EvalReport(float(np.mean(e)), 100.0 * hits / len(e), len(e) - hits, occ, e)
