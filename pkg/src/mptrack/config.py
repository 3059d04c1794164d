"""Experiment configuration: YAML files mapped onto nested dataclasses.

Every field has a default, so a config file only lists what it changes.
Unknown keys and ill-typed values raise :class:`ConfigurationError` naming the
offending field path (``scene.speech[2]`` and so on).

Schema (top-level sections)::

    name: str                      experiment label, used in output file names
    seed: int                      master seed (scene, training and tracker seeds derive from it)
    scene:    SceneSpec            simulated scene, or ``scene_dir`` to read a recorded one
    cues:     CueSettings          acoustic grid and template settings
    training: TrainingSpec         training-set size and optimizer settings, or ``params`` file
    tracker:  TrackerSpec          particle filter settings and fusion mode
    output:   OutputSpec           snapshot frames and image export
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigurationError
from .geometry import CameraModel, MicArrayConfig, RoomModel
from .perception import MODES
from .pipeline import CueSettings
from .simulator import SceneConfig, middle_third_region
from .tracker import Dynamics


@dataclass(frozen=True)
class CameraSpec:
    position: tuple[float, float, float] = (0.2, 0.2, 2.0)
    target: tuple[float, float, float] = (1.8, 4.1, 1.1)
    focal: float = 300.0
    image_size: tuple[int, int] = (288, 360)  # (H, W)

    def build(self) -> CameraModel:
        return CameraModel.look_at(self.position, self.target, self.focal, self.image_size)


@dataclass(frozen=True)
class MicSpec:
    centers: tuple[tuple[float, float, float], ...] = ((1.4, 4.1, 0.8), (2.2, 4.1, 0.8))
    radius: float = 0.1
    count: int = 8
    pairs: str = "all"  # "all" or "intra"
    speed_of_sound: float = 343.0

    def build(self) -> MicArrayConfig:
        if self.pairs not in ("all", "intra"):
            raise ConfigurationError(f"scene.mics.pairs: expected 'all' or 'intra', got {self.pairs!r}")
        return MicArrayConfig.circular_arrays(self.centers, self.radius, self.count, self.speed_of_sound, self.pairs)


@dataclass(frozen=True)
class RoomSpec:
    extent: tuple[tuple[float, float], tuple[float, float], tuple[float, float]] = ((0.0, 3.6), (0.0, 8.2), (0.0, 2.4))
    table_height: float = 0.8

    def build(self) -> RoomModel:
        return RoomModel(self.extent, self.table_height)


@dataclass(frozen=True)
class SceneSpec:
    scene_dir: str | None = None  # read a scene directory instead of simulating
    waypoints: tuple[tuple[float, float, float], ...] = ((0.9, 2.6, 1.5), (2.7, 3.6, 1.4))
    speed: float = 0.5
    speech: tuple[tuple[float, float], ...] | None = None
    snr_db: float = 10.0
    occlusion: str | tuple[int, int, int, int] | None = None  # "middle_third" or (x0, y0, x1, y1)
    occlusion_schedule: tuple[tuple[float, float], ...] | None = None
    duration: float = 8.0
    fps: float = 25.0
    sample_rate: float = 16000.0
    target_size: tuple[int, int] = (40, 32)
    n_distractors: int = 2
    frame_noise: float = 0.02
    reflection: float = 0.0
    camera: CameraSpec = field(default_factory=CameraSpec)
    mics: MicSpec = field(default_factory=MicSpec)
    room: RoomSpec = field(default_factory=RoomSpec)

    def build(self, seed: int) -> SceneConfig:
        cam = self.camera.build()
        region = self.occlusion
        if region == "middle_third":
            region = middle_third_region(cam.image_size)
        elif isinstance(region, str):
            raise ConfigurationError(f"scene.occlusion: unknown region {region!r}")
        try:
            return SceneConfig(
                room=self.room.build(), cam=cam, mics=self.mics.build(), waypoints=np.array(self.waypoints),
                speed=self.speed, speech=None if self.speech is None else [tuple(s) for s in self.speech],
                snr_db=self.snr_db, occlusion_region=None if region is None else tuple(region),
                occlusion_schedule=None if self.occlusion_schedule is None else [tuple(s) for s in self.occlusion_schedule],
                duration=self.duration, fps=self.fps, sample_rate=self.sample_rate,
                target_size=tuple(self.target_size), n_distractors=self.n_distractors,
                frame_noise=self.frame_noise, reflection=self.reflection, seed=seed,
            )
        except ConfigurationError as exc:
            raise ConfigurationError(f"scene: {exc}") from None


@dataclass(frozen=True)
class TrainingSpec:
    params: str | None = None  # load trained parameters instead of training
    scenes: int = 23  # random simulator scenes of `duration` seconds each (4600 stacks at 8 s)
    first_scene_seed: int = 1000
    duration: float = 8.0
    epochs: int = 20
    batch_size: int = 16
    lr: float = 0.01
    reduction: int = 2
    half_window: int = 6
    seed: int = 0


@dataclass(frozen=True)
class TrackerSpec:
    n_particles: int = 100
    mode: str = "mpt"
    reset_fraction: float = 0.25
    sigma: float | None = None  # px; None = 2% of the frame diagonal
    weight_floor: float = 1e-6
    seed: int | None = None  # None = master seed

    def dynamics(self) -> Dynamics:
        return Dynamics(None if self.sigma is None else (self.sigma, self.sigma), self.reset_fraction,
                        self.weight_floor)


@dataclass(frozen=True)
class OutputSpec:
    snapshots: tuple[int, ...] = (0, 50, 100, 150)
    images: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    scene: SceneSpec = field(default_factory=SceneSpec)
    cues: CueSettings = field(default_factory=CueSettings)
    training: TrainingSpec = field(default_factory=TrainingSpec)
    tracker: TrackerSpec = field(default_factory=TrackerSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def __post_init__(self):
        if self.tracker.mode not in MODES:
            raise ConfigurationError(f"tracker.mode: expected one of {MODES}, got {self.tracker.mode!r}")
        if self.tracker.n_particles < 1:
            raise ConfigurationError("tracker.n_particles: must be at least 1")
        if not 0.0 <= self.tracker.reset_fraction <= 1.0:
            raise ConfigurationError("tracker.reset_fraction: must lie in [0, 1]")
        for name in ("epochs", "batch_size", "scenes"):
            if getattr(self.training, name) < 1:
                raise ConfigurationError(f"training.{name}: must be at least 1")
        if self.training.lr <= 0:
            raise ConfigurationError("training.lr: must be positive")
        if self.cues.m2 < 1 or self.cues.m2 > self.cues.m1 + 1:
            raise ConfigurationError("cues.m2: must lie in [1, m1 + 1]")


# --- generic dict -> dataclass conversion ---------------------------------

def _type_name(tp) -> str:
    return getattr(tp, "__name__", None) or str(tp).replace("typing.", "")


def _convert(value, tp, path: str):
    origin = typing.get_origin(tp)
    if tp is typing.Any:
        return value
    if origin in (typing.Union, types.UnionType):
        options = typing.get_args(tp)
        if value is None:
            if type(None) in options:
                return None
            raise ConfigurationError(f"{path}: value required")
        errors = []
        for opt in options:
            if opt is type(None):
                continue
            try:
                return _convert(value, opt, path)
            except ConfigurationError as exc:
                errors.append(str(exc))
        raise ConfigurationError(errors[-1] if len(errors) == 1 else f"{path}: no matching type for {value!r}")
    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value, path)
    if origin is tuple:
        args = typing.get_args(tp)
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{path}: expected a list, got {value!r}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_convert(v, args[0], f"{path}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigurationError(f"{path}: expected {len(args)} items, got {len(value)}")
        return tuple(_convert(v, a, f"{path}[{i}]") for i, (v, a) in enumerate(zip(value, args)))
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp in (str, bool):
        if not isinstance(value, tp):
            raise ConfigurationError(f"{path}: expected {_type_name(tp)}, got {value!r}")
        return value
    raise ConfigurationError(f"{path}: unsupported field type {_type_name(tp)}")


def from_dict(cls, data, path: str = ""):
    """Build dataclass ``cls`` from a mapping, validating keys and value types."""
    where = path or "<root>"
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where}: expected a mapping, got {data!r}")
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        prefix = f"{path}." if path else ""
        raise ConfigurationError(f"unknown field {prefix}{unknown[0]}; allowed: {', '.join(fields)}")
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = _convert(value, hints[key], f"{path}.{key}" if path else key)
    try:
        return cls(**kwargs)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{where}: {exc}") from None


def to_dict(obj):
    """Plain-data (YAML-safe) view of a config dataclass."""
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    return obj


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: invalid YAML: {exc}") from None
    return from_dict(ExperimentConfig, data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form of the fully resolved config."""
    blob = json.dumps(to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (``standard`` or ``occluded``)."""
    path = Path(__file__).with_name("configs") / f"{name}.yaml"
    if not path.is_file():
        raise ConfigurationError(f"no bundled config named {name!r}")
    return path

