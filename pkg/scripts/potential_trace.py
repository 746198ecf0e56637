"""Per-epoch potential and head/tail disagreement for one training run."""

from dataclasses import replace

from common import base_config, parser, reference_splits
from tailgame.training import train


def main():
    p = parser(__doc__)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--full-batch", action="store_true", help="plain gradient ascent on the whole train split")
    p.add_argument("--lr", type=float, default=None)
    args = p.parse_args()
    tr, va, _ = reference_splits()
    cfg = replace(base_config(args), seed=args.seed)
    if args.full_batch:
        cfg = replace(cfg, batch_size=None, optimizer="sgd", lr=args.lr or 16.0)
    elif args.lr:
        cfg = replace(cfg, lr=args.lr)
    print(f"{'epoch':>5}{'phi':>12}{'delta':>12}{'kl_head':>12}{'kl_tail':>12}")
    for r in train(tr, va, cfg).diagnostics:
        print(f"{r['epoch']:>5}{r['phi']:>12.5f}{r['phi_delta']:>12.2e}{r['kl_head']:>12.3e}{r['kl_tail']:>12.3e}")


if __name__ == "__main__":
    main()
