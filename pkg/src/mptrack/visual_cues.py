"""Visual likelihood maps by multi-scale template matching.

The metric function is pluggable: anything mapping ``(image, template)`` to a
valid-region response (shape ``(H-h+1, W-w+1)``) works. The default is
zero-normalized cross-correlation, whose raw values lie in [-1, 1] and whose
argmax is unchanged by affine intensity changes of the frame.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from skimage.feature import match_template

from .errors import DegenerateInputWarning, InputError
from .scoremap import ScoreMap, normalize

MetricFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Frame:
    pixels: np.ndarray  # (H, W) grayscale in [0, 1]
    index: int = 0
    occlusion_mask: np.ndarray | None = None  # bookkeeping only, never read by the tracker

    @property
    def size(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass(frozen=True)
class TemplateSet:
    templates: list[np.ndarray]
    scales: list[float]
    bbox: tuple[float, float, float, float]  # (cx, cy, width, height)

    def __len__(self) -> int:
        return len(self.templates)


def zncc(image: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Zero-normalized cross-correlation over the valid region.

    Windows with zero variance score 0.
    """
    return match_template(np.asarray(image, dtype=float), np.asarray(template, dtype=float))


def crop_centered(image: np.ndarray, center_xy, size) -> np.ndarray:
    """``size = (h, w)`` patch centered on ``center_xy``; regions past the
    border are filled by edge replication.

    The top-left corner is ``floor(c - (n-1)/2 + 1/2)`` per axis, so an integer
    center puts the patch's ``(n-1)//2`` pixel on it and a box spanning the
    whole frame crops exactly the frame.
    """
    h, w = size
    x0 = int(np.floor(center_xy[0] - (w - 1) / 2.0 + 0.5))
    y0 = int(np.floor(center_xy[1] - (h - 1) / 2.0 + 0.5))
    rows = np.clip(np.arange(y0, y0 + h), 0, image.shape[0] - 1)
    cols = np.clip(np.arange(x0, x0 + w), 0, image.shape[1] - 1)
    return image[np.ix_(rows, cols)]


def make_templates(first_frame: Frame, bbox, scales=(1.0, 1.25)) -> TemplateSet:
    """Cut one reference patch per scale around the target box of the first frame.

    ``bbox`` is ``(cx, cy, width, height)`` in pixels.
    """
    cx, cy, bw, bh = map(float, bbox)
    if bw <= 0 or bh <= 0:
        raise InputError("bounding box has zero area")
    H, W = first_frame.size
    if not (0 <= cx <= W - 1 and 0 <= cy <= H - 1):
        raise InputError("bounding box center lies outside the frame")
    if any(s <= 0 for s in scales):
        raise InputError("template scales must be positive")
    patches = []
    for s in scales:
        size = (max(1, int(round(bh * s))), max(1, int(round(bw * s))))
        patches.append(crop_centered(first_frame.pixels, (cx, cy), size))
    return TemplateSet(patches, [float(s) for s in scales], (cx, cy, bw, bh))


def pad_to_frame(valid: np.ndarray, template_shape, frame_shape) -> np.ndarray:
    """Edge-replicate a valid-region response so entry ``[y, x]`` scores the template centered at (x, y)."""
    th, tw = template_shape
    top, left = (th - 1) // 2, (tw - 1) // 2
    H, W = frame_shape
    bottom = H - valid.shape[0] - top
    right = W - valid.shape[1] - left
    return np.pad(valid, ((top, bottom), (left, right)), mode="edge")


def response_map(frame: Frame, template: np.ndarray, metric: MetricFunction = zncc) -> ScoreMap:
    """Normalized likelihood map of ``template`` over the whole frame.

    ``raw_peak`` keeps the unnormalized best score (1.0 for an exact ZNCC match).
    A flat template gives an all-zero map flagged degenerate.
    """
    img = frame.pixels
    th, tw = template.shape
    if th > img.shape[0] or tw > img.shape[1]:
        raise InputError("template larger than the frame")
    if np.ptp(template) == 0:
        warnings.warn("template has zero variance", DegenerateInputWarning, stacklevel=2)
        return ScoreMap(np.zeros(img.shape), "visual", frame.index, 0.0, True)
    raw = pad_to_frame(metric(img, template), template.shape, img.shape)
    values, degenerate = normalize(raw)
    return ScoreMap(values, "visual", frame.index, float(raw.max()), degenerate)


def visual_cues(frame: Frame, templates: TemplateSet, metric: MetricFunction = zncc) -> list[ScoreMap]:
    """One response map per reference template."""
    return [response_map(frame, t, metric) for t in templates.templates]
