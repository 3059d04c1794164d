"""Heat-map snapshots of cue channels and the fusion map."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .perception import CueStack  # noqa: E402
from .scoremap import ScoreMap  # noqa: E402


def save_snapshot(path, v: CueStack, Z: ScoreMap, alpha, estimate=None, truth_xy=None) -> None:
    """One panel per cue channel (with its score) plus the fusion map, estimate and truth marked."""
    C = v.n_channels
    fig, axes = plt.subplots(1, C + 1, figsize=(2.2 * (C + 1), 2.2), dpi=80)
    panels = [(v.channels[i], f"{'A' if i < v.n_audio else 'V'}{i if i < v.n_audio else i - v.n_audio}"
               f"  a={alpha[i]:.2f}") for i in range(C)]
    panels.append((Z.values, "fusion"))
    for ax, (img, title) in zip(axes, panels):
        ax.imshow(img, cmap="jet", vmin=0.0, vmax=max(float(np.max(img)), 1e-12))
        ax.set_title(title, fontsize=7)
        ax.set_xticks([])
        ax.set_yticks([])
        if truth_xy is not None:
            ax.plot(*truth_xy, "w+", ms=8, mew=1.5)
        if estimate is not None:
            ax.plot(*estimate, "wo", ms=5, mfc="none", mew=1.2)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def save_error_plot(path, errors, threshold: float, occluded=None) -> None:
    """Per-frame error curve with the ACC threshold and occluded frames shaded."""
    fig, ax = plt.subplots(figsize=(6, 2.4), dpi=80)
    t = np.arange(len(errors))
    if occluded is not None and np.any(occluded):
        ax.fill_between(t, 0, max(float(np.max(errors)), threshold) * 1.05, where=np.asarray(occluded),
                        color="0.85", step="mid", label="occluded")
    ax.plot(t, errors, lw=1.0, label="error")
    ax.axhline(threshold, color="r", lw=0.8, ls="--", label="ACC threshold")
    ax.set_xlabel("frame")
    ax.set_ylabel("px")
    ax.legend(fontsize=7, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
