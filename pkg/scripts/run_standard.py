"""Track the standard scene in every fusion mode and print one MAE/ACC row per mode.

Usage: python3 scripts/run_standard.py [--config standard] [--out runs/standard] [--cache runs/cache]

The attention network is trained once and cached, so reruns only track.
"""

from __future__ import annotations

import argparse
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from mptrack.config import bundled_config, load_config
from mptrack.datasets import workers_from_env
from mptrack.experiment import run_experiment
from mptrack.perception import MODES


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="standard")
    ap.add_argument("--out", default="runs/standard")
    ap.add_argument("--cache", default="runs/cache")
    args = ap.parse_args()

    path = Path(args.config)
    cfg = load_config(path if path.exists() else bundled_config(args.config))
    print(f"{'mode':8s} {'MAE px':>8s} {'ACC %':>7s} {'alpha A':>8s} {'alpha V':>8s} {'time s':>7s}")
    for mode in MODES:
        t0 = time.perf_counter()
        res = run_experiment(replace(cfg, tracker=replace(cfg.tracker, mode=mode)), Path(args.out) / mode,
                             cache_dir=args.cache, workers=workers_from_env())
        alpha = np.mean(res.trajectory.alphas, axis=0)
        m2 = cfg.cues.m2
        print(f"{mode:8s} {res.report.mae:8.2f} {res.report.acc:7.1f} {alpha[:m2].mean():8.3f} "
              f"{alpha[m2:].mean():8.3f} {time.perf_counter() - t0:7.1f}", flush=True)


if __name__ == "__main__":
    main()
