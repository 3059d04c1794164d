"""Train the attention network on random simulator scenes and check it on corrupted held-out stacks.

Usage: python3 scripts/train_attention.py [--scenes 23] [--out runs/model]

Writes ``params.mptp`` and ``loss.csv``, then reports how often replacing one
modality's maps with noise lowers that modality's mean score below the other's.
"""

from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from mptrack.config import bundled_config, load_config
from mptrack.datasets import SceneSampler, corrupt, workers_from_env
from mptrack.experiment import obtain_params
from mptrack.perception import attention_forward
from mptrack.pipeline import CueSequence, extract_cues, simulate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="standard")
    ap.add_argument("--scenes", type=int, default=None)
    ap.add_argument("--epochs", type=int, default=None)
    ap.add_argument("--out", default="runs/model")
    ap.add_argument("--held-out", type=int, default=6, help="held-out scenes for the corruption check")
    args = ap.parse_args()

    path = Path(args.config)
    cfg = load_config(path if path.exists() else bundled_config(args.config))
    tr = cfg.training
    if args.scenes is not None:
        tr = replace(tr, scenes=args.scenes)
    if args.epochs is not None:
        tr = replace(tr, epochs=args.epochs)
    cfg = replace(cfg, training=replace(tr, params=None))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params, result = obtain_params(cfg, out, workers=workers_from_env())
    h = result.loss_history
    print(f"{tr.scenes} scenes, {tr.epochs} epochs: loss {h[0]:.4f} -> {h[-1]:.4f} ({100 * h[-1] / h[0]:.0f}%)")

    sampler = SceneSampler(glitch_prob=0.0, occlusion_prob=0.0)
    wins = {"audio": 0, "visual": 0}
    total = 0
    for seed in range(5001, 5001 + args.held_out):
        seq = CueSequence(extract_cues(simulate(replace(sampler.sample(seed), speech=None, snr_db=10.0))), 8)
        rng = np.random.default_rng(seed)
        for t in range(0, len(seq), 4):
            total += 1
            for modality in wins:
                v = corrupt(seq[t], modality, rng)
                a = attention_forward(v, params)
                audio, visual = a[: v.n_audio].mean(), a[v.n_audio:].mean()
                wins[modality] += bool(audio < visual if modality == "audio" else visual < audio)
    for modality, n in wins.items():
        print(f"{modality} corrupted: scored lower in {n}/{total} stacks")
    print(f"params in {out / 'params.mptp'}")


if __name__ == "__main__":
    main()
