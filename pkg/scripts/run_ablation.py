"""Compare the full game against no-curiosity and single-predictor variants."""

from dataclasses import replace

import numpy as np

from common import base_config, parser, reference_splits
from tailgame.training import ablation_run


def main():
    p = parser(__doc__)
    p.add_argument("--seeds", type=int, default=5)
    args = p.parse_args()
    tr, va, te = reference_splits()
    cfg = base_config(args)
    print(f"{'variant':<18}{'rare_f1':>10}{'micro_f1':>10}{'map':>10}")
    for variant in ("full", "no_curiosity", "single_predictor"):
        runs = [ablation_run(tr, va, replace(cfg, seed=s), variant, te)["metrics"] for s in range(args.seeds)]
        row = {k: np.mean([m[k] for m in runs]) * 100 for k in ("rare_f1", "micro_f1", "map")}
        print(f"{variant:<18}{row['rare_f1']:>10.2f}{row['micro_f1']:>10.2f}{row['map']:>10.2f}")


if __name__ == "__main__":
    main()
