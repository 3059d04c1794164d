"""End-to-end runs: simulate (or load) a scene, extract cues, train or load the
attention network, track, evaluate, and write every artifact to one directory."""

from __future__ import annotations

import csv
import json
import platform
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy
import skimage
import yaml

from . import __version__
from .config import ExperimentConfig, config_hash, dump_config, load_config, to_dict
from .datasets import SceneSampler, build_training_set
from .errors import ConfigurationError
from .io import (load_params, read_scene, save_cue_sources, save_params, write_loss_history, write_scene,
                 write_trajectory_csv, write_trajectory_jsonl)
from .metrics import EvalReport, acc_threshold, evaluate
from .perception import PerceptionParams, TrainResult, mode_scores, train
from .pipeline import CueSequence, CueSources, Scene, extract_cues, simulate
from .plots import save_error_plot, save_snapshot
from .tracker import TrackerConfig, Trajectory, track


@dataclass
class ExperimentResult:
    report: EvalReport | None
    trajectory: Trajectory
    params: PerceptionParams | None
    out_dir: Path
    train_result: TrainResult | None = None


def resolve_config(config) -> ExperimentConfig:
    if isinstance(config, ExperimentConfig):
        return config
    return load_config(config)


def make_scene(cfg: ExperimentConfig, scene_dir: Path | None = None) -> Scene:
    """Simulated scene from the config, or the scene directory it points to.

    With ``scene_dir`` the simulated scene is written there and read back, so
    later stages see exactly what a recorded scene would give them.
    """
    if cfg.scene.scene_dir is not None:
        return read_scene(cfg.scene.scene_dir)
    scene = simulate(cfg.scene.build(cfg.seed))
    if scene_dir is None:
        return scene
    write_scene(scene_dir, scene, to_dict(cfg.scene))
    loaded = read_scene(scene_dir)
    loaded.config = scene.config
    return loaded


def training_configs(cfg: ExperimentConfig):
    sampler = SceneSampler(duration=cfg.training.duration)
    return [sampler.sample(cfg.training.first_scene_seed + i) for i in range(cfg.training.scenes)]


def train_params(cfg: ExperimentConfig, workers: int | None = None) -> TrainResult:
    t = cfg.training
    data = build_training_set(training_configs(cfg), cfg.cues, t.half_window, workers)
    return train(data, t.epochs, t.batch_size, t.lr, t.reduction, t.seed, t.half_window)


def obtain_params(cfg: ExperimentConfig, out_dir: Path | None = None, cache_dir=None,
                  workers: int | None = None) -> tuple[PerceptionParams, TrainResult | None]:
    """Load the configured parameter file, reuse a cached training run, or train."""
    if cfg.training.params is not None:
        return load_params(cfg.training.params), None
    cached = None
    if cache_dir is not None:
        key = config_hash(replace(cfg, name="", seed=0, scene=type(cfg.scene)(), tracker=type(cfg.tracker)(),
                                  output=type(cfg.output)()))[:16]
        cached = Path(cache_dir) / f"params-{key}.mptp"
        if cached.is_file():
            return load_params(cached), None
    result = train_params(cfg, workers)
    if cached is not None:
        cached.parent.mkdir(parents=True, exist_ok=True)
        save_params(cached, result.params)
    if out_dir is not None:
        save_params(out_dir / "params.mptp", result.params)
        write_loss_history(out_dir / "loss.csv", result.loss_history)
    return result.params, result


def tracker_config(cfg: ExperimentConfig, bbox) -> TrackerConfig:
    seed = cfg.seed if cfg.tracker.seed is None else cfg.tracker.seed
    return TrackerConfig(tuple(bbox), cfg.tracker.n_particles, seed, cfg.tracker.mode, cfg.tracker.dynamics())


def write_report(path, report: EvalReport, mode: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        w.writerow(["mode", mode])
        w.writerow(["frames", report.n_frames])
        w.writerow(["mae_px", f"{report.mae:.6f}"])
        w.writerow(["acc_percent", f"{report.acc:.6f}"])
        w.writerow(["errors", report.errors])
        w.writerow(["occlusion_rate_percent", f"{report.occlusion_rate:.6f}"])


def write_frame_errors(path, report: EvalReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "error_px"])
        for i, e in enumerate(report.frame_errors):
            w.writerow([i, f"{e:.6f}"])


def manifest(cfg: ExperimentConfig) -> dict:
    return {
        "name": cfg.name,
        "config_sha256": config_hash(cfg),
        "seed": cfg.seed,
        "versions": {"mptrack": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "scikit-image": skimage.__version__, "pyyaml": yaml.__version__},
    }


def track_sources(sources: CueSources, params: PerceptionParams | None, tcfg: TrackerConfig,
                  on_frame=None) -> Trajectory:
    return track(CueSequence(sources), params, tcfg, on_frame)


def run_experiment(config, out_dir, cache_dir=None, workers: int | None = None) -> ExperimentResult:
    """simulate -> extract cues -> train (or load) -> track -> evaluate, with artifacts in ``out_dir``.

    Written files: ``config.yaml``, ``scene/``, ``cues/``, ``params.mptp`` and
    ``loss.csv`` (when trained), ``trajectory.csv``, ``trajectory.jsonl``,
    ``report.csv``, ``frame_errors.csv``, ``snapshots/*.png`` and
    ``manifest.json``. All are deterministic given the config.
    """
    cfg = resolve_config(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dump_config(cfg))
    scene = make_scene(cfg, out / "scene")
    sources = extract_cues(scene, cfg.cues)
    save_cue_sources(out / "cues", sources)

    params, trained = None, None
    if cfg.tracker.mode == "mpt":
        params, trained = obtain_params(cfg, out, cache_dir, workers)
        if params.n_channels != cfg.cues.m2 + len(cfg.cues.scales):
            raise ConfigurationError(f"training.params: network has {params.n_channels} channels, the cue "
                                     f"settings produce {cfg.cues.m2 + len(cfg.cues.scales)}")

    snaps = set(cfg.output.snapshots) if cfg.output.images else set()
    snap_dir = out / "snapshots"
    truth = scene.truth

    def on_frame(t, v, Z, st):
        if t in snaps:
            snap_dir.mkdir(exist_ok=True)
            gt = None if truth is None else truth.positions_2d[t]
            save_snapshot(snap_dir / f"frame_{t:04d}.png", v, Z, mode_scores(v, params, cfg.tracker.mode),
                          st.estimate, gt)

    traj = track_sources(sources, params, tracker_config(cfg, scene.bbox), on_frame if snaps else None)
    write_trajectory_csv(out / "trajectory.csv", traj)
    write_trajectory_jsonl(out / "trajectory.jsonl", traj)

    report = None
    if truth is not None:
        report = evaluate(traj, truth, (scene.bbox[2], scene.bbox[3]))
        write_report(out / "report.csv", report, cfg.tracker.mode)
        write_frame_errors(out / "frame_errors.csv", report)
        if cfg.output.images:
            save_error_plot(out / "errors.png", report.frame_errors, acc_threshold((scene.bbox[2], scene.bbox[3])),
                            truth.occluded)
    (out / "manifest.json").write_text(json.dumps(manifest(cfg), indent=2, sort_keys=True) + "\n")
    return ExperimentResult(report, traj, params, out, trained)
