"""Rare-label F1 of the full game as the curiosity weight varies."""

from dataclasses import replace

import numpy as np

from common import base_config, parser, reference_splits
from tailgame.training import ablation_run


def main():
    p = parser(__doc__)
    p.add_argument("--alphas", default="0,0.3,0.6")
    p.add_argument("--seeds", type=int, default=3)
    args = p.parse_args()
    tr, va, te = reference_splits()
    cfg = base_config(args)
    for alpha in (float(a) for a in args.alphas.split(",")):
        c = replace(cfg, curiosity=replace(cfg.curiosity, alpha=alpha))
        rare = [ablation_run(tr, va, replace(c, seed=s), "full", te)["metrics"]["rare_f1"] for s in range(args.seeds)]
        print(f"alpha {alpha:<5} rare_f1 {np.mean(rare) * 100:6.2f} ± {np.std(rare) * 100:.2f}")


if __name__ == "__main__":
    main()
