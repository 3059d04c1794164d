"""From raw audio + frames to a lazily built sequence of cue stacks.

Full-resolution stacks are large (C x 288 x 360 doubles each), so they are
rebuilt on demand from the compact per-frame sources (raw sGCF maps on the
coarse grid, visual response maps) and kept in a small LRU cache.
"""

from __future__ import annotations

from collections import OrderedDict
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .audio_cues import SgcfSequence, frame_signal, select_frames, sgcf_sequence
from .geometry import CameraModel, MicArrayConfig, RoomModel, SampleGrid, build_sample_grid, default_depths
from .perception import CueStack
from .scoremap import ScoreMap, normalize, upsample
from .simulator import SceneConfig, SceneTruth, synth_audio, synth_frames
from .visual_cues import Frame, make_templates, visual_cues


@dataclass(frozen=True)
class CueSettings:
    grid_h: int = 16
    grid_w: int = 20
    n_depths: int = 6
    depth_near: float | None = 1.8
    depth_far: float | None = 7.8
    depths: tuple[float, ...] | None = None
    frame_ms: float = 40.0
    hop_fraction: float = 0.5
    window: str = "hamming"
    oversample: int = 4
    m1: int = 15
    m2: int = 5
    scales: tuple[float, ...] = (1.0, 1.25)

    def grid(self, cam: CameraModel, room: RoomModel) -> SampleGrid:
        depths = self.depths
        if depths is None:
            depths = default_depths(cam, room, self.n_depths, self.depth_near, self.depth_far)
        return build_sample_grid(cam, room, self.grid_h, self.grid_w, depths)


@dataclass
class Scene:
    """Everything the tracker may see, plus optional ground truth."""

    audio: np.ndarray  # (n_mics, n_samples)
    sample_rate: float
    frames: list[Frame]
    fps: float
    bbox: tuple[float, float, float, float]  # first-frame target (cx, cy, width, height)
    cam: CameraModel
    mics: MicArrayConfig
    room: RoomModel
    truth: SceneTruth | None = None
    config: SceneConfig | None = None

    @property
    def n_frames(self) -> int:
        return len(self.frames)


def simulate(cfg: SceneConfig) -> Scene:
    frames, truth = synth_frames(cfg)
    audio = synth_audio(cfg)
    cx, cy = truth.positions_2d[0]
    h, w = cfg.target_size
    return Scene(audio, cfg.sample_rate, frames, cfg.fps, (float(cx), float(cy), float(w), float(h)),
                 cfg.cam, cfg.mics, cfg.room, truth, cfg)


@dataclass
class CueSources:
    """Compact per-frame cue material; ``stack(t)`` expands it to full resolution."""

    sgcf: SgcfSequence
    audio_index: np.ndarray  # (T,) audio frame used for video frame t
    visual: np.ndarray  # (T, Dv, H, W) normalized response maps
    visual_raw_peaks: np.ndarray  # (T, Dv)
    m1: int = 15
    m2: int = 5

    @property
    def image_size(self) -> tuple[int, int]:
        return self.visual.shape[2:]

    def __len__(self) -> int:
        return len(self.audio_index)

    def audio_maps(self, t: int) -> list[ScoreMap]:
        a = int(self.audio_index[t])
        chosen = select_frames(self.sgcf.peak_values, a, self.m1, self.m2)
        maps = []
        for q in chosen:
            values, degenerate = normalize(self.sgcf.raw_maps[q])
            maps.append(ScoreMap(upsample(values, self.image_size), "audio", q,
                                 float(self.sgcf.peak_values[q]), degenerate))
        return maps

    def stack(self, t: int) -> CueStack:
        audio = np.stack([m.values for m in self.audio_maps(t)])
        return CueStack(np.concatenate([audio, self.visual[t]]), len(audio), t)


class CueSequence(Sequence):
    """Read-only sequence of :class:`CueStack` built on demand with an LRU cache."""

    def __init__(self, sources: CueSources, cache_size: int = 16):
        self.sources = sources
        self._cache: OrderedDict[int, CueStack] = OrderedDict()
        self._cache_size = cache_size

    def __len__(self) -> int:
        return len(self.sources)

    def __getitem__(self, t):
        if isinstance(t, slice):
            return [self[i] for i in range(*t.indices(len(self)))]
        t = int(t)
        if t < 0:
            t += len(self)
        if not 0 <= t < len(self):
            raise IndexError(t)
        if t in self._cache:
            self._cache.move_to_end(t)
            return self._cache[t]
        v = self.sources.stack(t)
        self._cache[t] = v
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return v


def extract_cues(scene: Scene, settings: CueSettings = CueSettings()) -> CueSources:
    grid = settings.grid(scene.cam, scene.room)
    frames = frame_signal(scene.audio, scene.sample_rate, settings.frame_ms, settings.hop_fraction, settings.window)
    times = np.arange(scene.n_frames) / scene.fps
    audio_index = np.array([frames.frame_at(t) for t in times], dtype=int)
    needed = sorted({q for a in audio_index for q in range(max(0, a - settings.m1), a + 1)})
    sg = sgcf_sequence(frames, grid, scene.mics, settings.oversample, times=needed)
    templates = make_templates(scene.frames[0], scene.bbox, settings.scales)
    H, W = scene.frames[0].size
    visual = np.zeros((scene.n_frames, len(templates), H, W), dtype=np.float32)
    peaks = np.zeros((scene.n_frames, len(templates)))
    for t, f in enumerate(scene.frames):
        for j, m in enumerate(visual_cues(f, templates)):
            visual[t, j] = m.values
            peaks[t, j] = m.raw_peak
    return CueSources(sg, audio_index, visual, peaks, settings.m1, settings.m2)
