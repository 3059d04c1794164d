"""Compare attention fusion against visual-only tracking on the occluded scene over several seeds.

Usage: python3 scripts/occlusion_sweep.py [--seeds 10] [--out runs/occlusion.csv] [--cache runs/cache]

Trains (or loads from the cache) one network, then for each seed simulates the
scene, extracts cues once and tracks it in both modes. Training uses
``MPT_WORKERS`` processes.
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import replace
from pathlib import Path

from mptrack.config import bundled_config, load_config
from mptrack.datasets import workers_from_env
from mptrack.experiment import make_scene, obtain_params, tracker_config
from mptrack.metrics import evaluate
from mptrack.pipeline import CueSequence, extract_cues
from mptrack.tracker import track


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="occluded")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--out", default="runs/occlusion.csv")
    ap.add_argument("--cache", default="runs/cache")
    args = ap.parse_args()

    path = Path(args.config)
    base = load_config(path if path.exists() else bundled_config(args.config))
    params, _ = obtain_params(base, cache_dir=args.cache, workers=workers_from_env())
    rows = []
    print(f"{'seed':>4s} {'occl %':>7s} {'MPT MAE':>8s} {'VO MAE':>8s} {'MPT ACC':>8s} {'VO ACC':>8s}")
    for seed in range(args.seeds):
        cfg = replace(base, seed=seed)
        scene = make_scene(cfg)
        seq = CueSequence(extract_cues(scene, cfg.cues), 32)
        rep = {}
        for mode in ("mpt", "visual"):
            tcfg = tracker_config(replace(cfg, tracker=replace(cfg.tracker, mode=mode)), scene.bbox)
            rep[mode] = evaluate(track(seq, params, tcfg), scene.truth, (scene.bbox[2], scene.bbox[3]))
        occ = scene.truth.occlusion_rate
        rows.append([seed, f"{occ:.1f}", f"{rep['mpt'].mae:.3f}", f"{rep['visual'].mae:.3f}",
                     f"{rep['mpt'].acc:.1f}", f"{rep['visual'].acc:.1f}"])
        print(f"{seed:4d} {occ:7.1f} {rep['mpt'].mae:8.2f} {rep['visual'].mae:8.2f} "
              f"{rep['mpt'].acc:8.1f} {rep['visual'].acc:8.1f}", flush=True)
    wins = sum(float(r[2]) < float(r[3]) for r in rows)
    print(f"attention fusion beats visual-only on {wins}/{len(rows)} seeds")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "occlusion_percent", "mpt_mae", "visual_mae", "mpt_acc", "visual_acc"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
