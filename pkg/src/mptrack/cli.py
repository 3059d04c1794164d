"""Command-line entry point: ``mptrack <subcommand> ...``.

Subcommands mirror the pipeline stages, each reading and writing plain files
so stages can be rerun independently:

    simulate      config -> scene directory
    extract-cues  scene directory -> cue directory
    train         config -> params.mptp + loss.csv
    track         scene (+ cues, params) -> trajectory.csv / .jsonl
    eval          scene truth + trajectory.csv -> report.csv
    run           all of the above in one output directory
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import ExperimentConfig, TrackerSpec, TrainingSpec, bundled_config, dump_config, load_config
from .errors import ConfigurationError, InputError
from .pipeline import CueSettings

_DEFAULT_TRAIN = TrainingSpec()
_DEFAULT_TRACK = TrackerSpec()
_DEFAULT_CUES = CueSettings()


def _config(arg: str, seed: int | None = None) -> ExperimentConfig:
    """A YAML path, or the name of a bundled config."""
    path = Path(arg)
    cfg = load_config(path if path.suffix in (".yaml", ".yml") or path.exists() else bundled_config(arg))
    return cfg if seed is None else replace(cfg, seed=seed)


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default="standard",
                   help="YAML config path or bundled name: standard | occluded (default: standard)")
    p.add_argument("--seed", type=int, default=None, help="override the config's master seed")


def _add_cues(p: argparse.ArgumentParser) -> None:
    d = _DEFAULT_CUES
    p.add_argument("--grid", type=int, nargs=2, metavar=("H", "W"), default=(d.grid_h, d.grid_w),
                   help=f"audio sampling lattice (default: {d.grid_h} {d.grid_w})")
    p.add_argument("--depths", type=int, default=d.n_depths, help=f"depth planes (default: {d.n_depths})")
    p.add_argument("--m1", type=int, default=d.m1, help=f"stGCF history length in frames (default: {d.m1})")
    p.add_argument("--m2", type=int, default=d.m2, help=f"audio channels kept (default: {d.m2})")
    p.add_argument("--scales", type=float, nargs="+", default=d.scales,
                   help=f"visual template scales (default: {' '.join(map(str, d.scales))})")


def _cue_settings(args) -> CueSettings:
    return replace(_DEFAULT_CUES, grid_h=args.grid[0], grid_w=args.grid[1], n_depths=args.depths,
                   m1=args.m1, m2=args.m2, scales=tuple(args.scales))


def _add_tracker(p: argparse.ArgumentParser) -> None:
    d = _DEFAULT_TRACK
    p.add_argument("--mode", choices=("mpt", "avg", "audio", "visual"), default=None,
                   help=f"fusion mode (default: config value, {d.mode})")
    p.add_argument("--particles", type=int, default=None,
                   help=f"particle count (default: config value, {d.n_particles})")


def _tracker_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    t = cfg.tracker
    if args.mode is not None:
        t = replace(t, mode=args.mode)
    if args.particles is not None:
        t = replace(t, n_particles=args.particles)
    return replace(cfg, tracker=t)


def cmd_simulate(args) -> int:
    from .experiment import make_scene

    cfg = _config(args.config, args.seed)
    scene = make_scene(cfg, Path(args.out))
    print(f"wrote {scene.n_frames} frames, {scene.audio.shape[1]} audio samples x {scene.audio.shape[0]} mics "
          f"to {args.out}")
    return 0


def cmd_extract_cues(args) -> int:
    from .io import read_scene, save_cue_sources
    from .pipeline import extract_cues

    scene = read_scene(args.scene)
    src = extract_cues(scene, _cue_settings(args))
    save_cue_sources(args.out, src)
    print(f"wrote cue sources for {len(src)} frames to {args.out}")
    return 0


def cmd_train(args) -> int:
    from .experiment import obtain_params

    cfg = _config(args.config, args.seed)
    tr = replace(cfg.training, params=None)
    for name in ("scenes", "epochs", "batch_size", "lr"):
        if getattr(args, name) is not None:
            tr = replace(tr, **{name: getattr(args, name)})
    cfg = replace(cfg, training=tr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _, result = obtain_params(cfg, out, workers=args.workers)
    h = result.loss_history
    print(f"trained on {cfg.training.scenes} scenes: loss {h[0]:.6f} -> {h[-1]:.6f}; wrote {out / 'params.mptp'}")
    return 0


def cmd_track(args) -> int:
    from .experiment import track_sources, tracker_config
    from .io import load_cue_sources, load_params, read_scene, write_trajectory_csv, write_trajectory_jsonl
    from .pipeline import extract_cues

    cfg = _tracker_overrides(_config(args.config, args.seed), args)
    scene = read_scene(args.scene)
    src = load_cue_sources(args.cues) if args.cues else extract_cues(scene, cfg.cues)
    params = None
    if cfg.tracker.mode == "mpt":
        if not args.params:
            raise ConfigurationError("--params: required for mode mpt (run `mptrack train` first)")
        params = load_params(args.params)
    bbox = tuple(args.bbox) if args.bbox else scene.bbox
    traj = track_sources(src, params, tracker_config(cfg, bbox))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out / "trajectory.csv", traj)
    write_trajectory_jsonl(out / "trajectory.jsonl", traj)
    print(f"tracked {len(traj.states)} frames ({cfg.tracker.mode}); wrote {out / 'trajectory.csv'}")
    return 0


def cmd_eval(args) -> int:
    from .experiment import write_frame_errors, write_report
    from .io import read_scene, read_trajectory_csv
    from .metrics import evaluate

    scene = read_scene(args.scene)
    if scene.truth is None:
        raise InputError(f"{args.scene}: no truth.csv to evaluate against")
    est = read_trajectory_csv(args.trajectory)
    report = evaluate(est, scene.truth, (scene.bbox[2], scene.bbox[3]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "report.csv", report, args.label)
    write_frame_errors(out / "frame_errors.csv", report)
    _print_report(report)
    return 0


def cmd_run(args) -> int:
    from .experiment import run_experiment

    cfg = _tracker_overrides(_config(args.config, args.seed), args)
    if args.params:
        cfg = replace(cfg, training=replace(cfg.training, params=args.params))
    if args.dump_config:
        print(dump_config(cfg), end="")
        return 0
    if args.out is None:
        raise ConfigurationError("--out: required to run an experiment")
    res = run_experiment(cfg, args.out, cache_dir=args.cache, workers=args.workers)
    if res.report is not None:
        _print_report(res.report)
    print(f"artifacts in {res.out_dir}")
    return 0


def _print_report(report) -> None:
    s = report.summary()
    print(f"MAE {s['mae']:.2f} px  ACC {s['acc']:.2f}%  errors {s['errors']}/{s['frames']}  "
          f"occlusion {s['occlusion_rate']:.1f}%")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mptrack", description=__doc__.splitlines()[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic scene directory")
    _add_config(p)
    p.add_argument("--out", required=True, help="scene directory to write")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract-cues", help="compute audio and visual cue sources for a scene")
    p.add_argument("--scene", required=True, help="scene directory")
    p.add_argument("--out", required=True, help="cue directory to write")
    _add_cues(p)
    p.set_defaults(func=cmd_extract_cues)

    p = sub.add_parser("train", help="train the attention network on random simulator scenes")
    _add_config(p)
    d = _DEFAULT_TRAIN
    p.add_argument("--out", required=True, help="directory for params.mptp and loss.csv")
    p.add_argument("--scenes", type=int, default=None, help=f"training scenes (default: {d.scenes})")
    p.add_argument("--epochs", type=int, default=None, help=f"(default: {d.epochs})")
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None, help=f"(default: {d.batch_size})")
    p.add_argument("--lr", type=float, default=None, help=f"SGD learning rate (default: {d.lr})")
    p.add_argument("--workers", type=int, default=None, help="processes (default: MPT_WORKERS or 1)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("track", help="run the particle filter over a scene")
    _add_config(p)
    _add_tracker(p)
    p.add_argument("--scene", required=True, help="scene directory")
    p.add_argument("--cues", default=None, help="cue directory (default: extract with the config's settings)")
    p.add_argument("--params", default=None, help="params.mptp (required for mode mpt)")
    p.add_argument("--bbox", type=float, nargs=4, metavar=("CX", "CY", "W", "H"), default=None,
                   help="first-frame target box (default: from scene.yaml)")
    p.add_argument("--out", required=True, help="directory for trajectory.csv and trajectory.jsonl")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score a trajectory against scene truth")
    p.add_argument("--scene", required=True, help="scene directory with truth.csv")
    p.add_argument("--trajectory", required=True, help="trajectory.csv")
    p.add_argument("--label", default="mpt", help="mode name written to the report (default: mpt)")
    p.add_argument("--out", required=True, help="directory for report.csv and frame_errors.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="simulate, extract cues, train, track and evaluate in one go")
    _add_config(p)
    _add_tracker(p)
    p.add_argument("--out", default=None, help="output directory (required unless --dump-config)")
    p.add_argument("--params", default=None, help="use these trained parameters instead of training")
    p.add_argument("--cache", default=None, help="reuse trained parameters across runs from this directory")
    p.add_argument("--workers", type=int, default=None, help="processes for training (default: MPT_WORKERS or 1)")
    p.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
