"""Command-line entry point: generate, train, eval, ablate, sweep, inspect-partition.

Exit codes: 0 success, 2 input or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import SWEEP_PARAMS, ConfigError, RunConfig, load_config
from .data import DataFormatError, downsample_rare, generate_synthetic, load_sparse, save_sparse, split
from .diagnostics import trace_summary
from .fusion import fuse
from .label_space import FrequencyTable, compute_frequencies, partition_labels, split_head_tail
from .metrics import metric_report, specialization_ranks
from .players import load_checkpoint
from .training import VARIANTS, NumericalDivergence, ablation_run, forward_all, train

log = logging.getLogger("tailgame")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
SPLIT_NAMES = ("train", "val", "test")
TABLE_COLUMNS = ("map", "micro_f1", "rare_f1")


class InputError(Exception):
    pass


def _dump(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1) + "\n")


def _out_dir(cfg: RunConfig, args, default) -> Path:
    out = Path(args.out) if args.out else cfg.path(default)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InputError(f"cannot create output directory {out}: {e.strerror}") from None
    return out


def _data_dir(cfg: RunConfig, args) -> Path:
    return Path(args.data) if getattr(args, "data", None) else cfg.path(cfg.data.dir)


def materialize(cfg: RunConfig):
    """Build (train, val, test) from the configured source; downsampling touches train only."""
    if cfg.data.source == "synthetic":
        full = generate_synthetic(cfg.data.synthetic, cfg.seed)
    else:
        full = load_sparse(cfg.path(cfg.data.sparse_path))
    tr, va, te = split(full, cfg.data.split, cfg.seed)
    ds = cfg.data.downsample
    if ds is not None:
        tr = downsample_rare(tr, ds["k_rarest"], ds["q"], cfg.seed)
    return tr, va, te


def load_splits(data_dir: Path):
    out = []
    for name in SPLIT_NAMES:
        path = data_dir / f"{name}.txt"
        if not path.is_file():
            raise InputError(f"missing data file {path}; run 'generate' first")
        out.append(load_sparse(path))
    return tuple(out)


def _mean_std(values):
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std())


# ----------------------------------------------------------------------------
# commands


def cmd_generate(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args, cfg.data.dir)
    splits = materialize(cfg)
    for name, ds in zip(SPLIT_NAMES, splits):
        save_sparse(ds, out / f"{name}.txt")
    syn = cfg.data.synthetic
    manifest = {
        "seed": cfg.seed,
        "source": cfg.data.source,
        "spec": None if syn is None else syn.to_dict(),
        "sparse_path": cfg.data.sparse_path,
        "split_ratios": list(cfg.data.split),
        "downsample": cfg.data.downsample,
        "split_sizes": {name: len(ds) for name, ds in zip(SPLIT_NAMES, splits)},
        "label_counts": {name: [int(c) for c in ds.Y.sum(axis=0)] for name, ds in zip(SPLIT_NAMES, splits)},
    }
    _dump(manifest, out / "manifest.json")
    print(f"wrote {', '.join(f'{n}.txt' for n in SPLIT_NAMES)} and manifest.json to {out}")
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    tr, va, te = load_splits(_data_dir(cfg, args))
    out = _out_dir(cfg, args, cfg.output_dir)
    diag_path = out / "diagnostics.jsonl"
    diag_path.write_text("")

    def on_epoch(rec):
        with open(diag_path, "a") as fh:
            fh.write(json.dumps(rec) + "\n")

    res = train(tr, va, cfg.train, on_epoch=on_epoch)
    _dump(res.checkpoint(), out / "checkpoint.json")
    _dump(cfg.to_dict(), out / "config.json")
    if len(res.diagnostics) >= 2:
        _dump(trace_summary(res.diagnostics), out / "summary.json")
    tail = split_head_tail(res.freq, cfg.metrics.tail_rule).tail
    report = metric_report(res.predict(te.X), te.Y, tail, res.thresholds, cfg.metrics.ks)
    _dump({"split": "test", "metrics": report.to_dict()}, out / "metrics.json")
    print(f"rare_f1 {report.rare_f1:.6f}")
    print(f"micro_f1 {report.micro_f1:.6f}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args) -> int:
    if not args.checkpoint or not args.data:
        raise InputError("eval needs --checkpoint and --data")
    try:
        players, partition, freq, tau = load_checkpoint(args.checkpoint)
    except FileNotFoundError:
        raise InputError(f"missing checkpoint {args.checkpoint}") from None
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise InputError(f"malformed checkpoint {args.checkpoint}: {e}") from None
    ds_path = Path(args.data)
    if not ds_path.is_file():
        raise InputError(f"missing data file {ds_path}")
    ds = load_sparse(ds_path)
    if ds.num_labels != partition.num_labels:
        raise InputError(f"label count mismatch: checkpoint has {partition.num_labels}, data has {ds.num_labels}")
    if ds.feature_dim != players[0].feature_dim:
        raise InputError(f"feature dimension mismatch: checkpoint has {players[0].feature_dim}, data has {ds.feature_dim}")
    out = _out_dir(cfg, args, cfg.output_dir)
    ft = FrequencyTable.from_frequencies(freq) if freq is not None else compute_frequencies(ds.Y)
    if tau is None:
        tau = cfg.train.fusion.thresholds(ds.num_labels)
    p_hat, _ = fuse(forward_all(players, ds.X), partition, cfg.train.fusion)
    tail_split = split_head_tail(ft, cfg.metrics.tail_rule)
    report = metric_report(p_hat, ds.Y, tail_split.tail, tau, cfg.metrics.ks)
    ranks = specialization_ranks(players, ds.X, ds.Y, tail_split, tau)
    _dump({"data": str(ds_path), "metrics": report.to_dict(), "specialization": ranks}, out / "eval.json")
    print(f"rare_f1 {report.rare_f1:.6f}")
    print(f"micro_f1 {report.micro_f1:.6f}")
    return EXIT_OK


def cmd_ablate(cfg: RunConfig, args) -> int:
    tr, va, te = load_splits(_data_dir(cfg, args))
    out = _out_dir(cfg, args, cfg.output_dir)
    rows = []
    for variant in VARIANTS:
        runs = []
        for seed in cfg.ablation_seeds:
            base = dataclasses.replace(cfg.train, seed=seed)
            r = ablation_run(tr, va, base, variant, te)
            runs.append({"seed": seed, "metrics": r["metrics"]})
            log.info("%s seed %d rare_f1 %.4f", variant, seed, r["metrics"]["rare_f1"])
        row = {"variant": variant, "config": r["config"], "runs": runs}
        for col in TABLE_COLUMNS:
            row[col] = dict(zip(("mean", "std"), _mean_std([x["metrics"][col] for x in runs])))
        rows.append(row)
    _dump({"seeds": list(cfg.ablation_seeds), "split": "test", "rows": rows}, out / "ablation.json")
    with open(out / "ablation.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant"] + [f"{c}_{s}" for c in TABLE_COLUMNS for s in ("mean", "std")])
        for row in rows:
            w.writerow([row["variant"]] + [repr(row[c][s]) for c in TABLE_COLUMNS for s in ("mean", "std")])
    for row in rows:
        print(f"{row['variant']:<17} rare_f1 {row['rare_f1']['mean']:.4f}±{row['rare_f1']['std']:.4f} "
              f"micro_f1 {row['micro_f1']['mean']:.4f}±{row['micro_f1']['std']:.4f}")
    return EXIT_OK


def sweep_config(base, param, value):
    if param == "alpha":
        return dataclasses.replace(base, curiosity=dataclasses.replace(base.curiosity, alpha=float(value)))
    if param == "beta":
        return dataclasses.replace(base, curiosity=dataclasses.replace(base.curiosity, beta=float(value)))
    if param == "rho":
        return dataclasses.replace(base, rho=float(value))
    if param == "n_players":
        if float(value) != int(float(value)):
            raise ValueError(f"n_players must be an integer, got {value}")
        return dataclasses.replace(base, n_players=int(float(value)), lr_per_player=None)
    raise ValueError(f"unknown sweep parameter {param!r}")


def _parse_values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--values must be comma-separated numbers, got {text!r}") from None


def cmd_sweep(cfg: RunConfig, args) -> int:
    if args.param not in SWEEP_PARAMS:
        raise InputError(f"--param must be one of {', '.join(SWEEP_PARAMS)}")
    values = _parse_values(args.values or "")
    if not values:
        raise InputError("--values is required")
    tr, va, te = load_splits(_data_dir(cfg, args))
    out = _out_dir(cfg, args, cfg.output_dir)
    rows = []
    for value in values:
        for seed in cfg.sweep_seeds:
            row = {"param": args.param, "value": value, "seed": seed}
            try:
                tcfg = sweep_config(dataclasses.replace(cfg.train, seed=seed), args.param, value)
                m = ablation_run(tr, va, tcfg, "full", te)["metrics"]
                row.update(status="ok", rare_f1=m["rare_f1"], micro_f1=m["micro_f1"], map=m["map"])
            except (ValueError, NumericalDivergence) as e:
                # one failed value must not sink the rest of the sweep
                row.update(status="error", error=str(e))
            rows.append(row)
    summary = []
    for value in values:
        ok = [r for r in rows if r["value"] == value and r["status"] == "ok"]
        if ok:
            summary.append({"value": value, "status": "ok", "runs": len(ok),
                            "rare_f1": float(np.mean([r["rare_f1"] for r in ok])),
                            "micro_f1": float(np.mean([r["micro_f1"] for r in ok]))})
        else:
            summary.append({"value": value, "status": "error", "runs": 0, "rare_f1": None, "micro_f1": None})
    _dump({"param": args.param, "seeds": list(cfg.sweep_seeds), "rows": rows, "summary": summary}, out / "sweep.json")
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value", "status", "rare_f1", "micro_f1"])
        for s in summary:
            w.writerow([repr(s["value"]), s["status"],
                        "" if s["rare_f1"] is None else repr(s["rare_f1"]),
                        "" if s["micro_f1"] is None else repr(s["micro_f1"])])
    for s in summary:
        if s["status"] == "ok":
            print(f"{args.param}={s['value']:g} rare_f1 {s['rare_f1']:.4f} micro_f1 {s['micro_f1']:.4f}")
        else:
            print(f"{args.param}={s['value']:g} error")
    return EXIT_OK


def cmd_inspect_partition(cfg: RunConfig, args) -> int:
    data_dir = _data_dir(cfg, args)
    if (data_dir / "train.txt").is_file():
        tr = load_sparse(data_dir / "train.txt")
    else:
        tr = materialize(cfg)[0]
    part = partition_labels(compute_frequencies(tr.Y), cfg.train.n_players, cfg.train.rho)
    text = json.dumps(part.to_dict(), indent=1)
    if args.out:
        _dump(part.to_dict(), _out_dir(cfg, args, cfg.output_dir) / "partition.json")
    print(text)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
    "inspect-partition": cmd_inspect_partition,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tailgame", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration (JSON)")
        p.add_argument("--seed", type=int, help="overrides the configured seed")
        p.add_argument("--out", help="output directory")
        if name != "generate":
            p.add_argument("--data", help="data directory (eval: a sparse data file)")
        if name == "eval":
            p.add_argument("--checkpoint")
        if name == "sweep":
            p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
            p.add_argument("--values", required=True, help="comma-separated values")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        return COMMANDS[args.command](cfg, args)
    except NumericalDivergence as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DataFormatError, InputError, OSError, ValueError) as e:
        # ConfigError and DataFormatError are ValueErrors; listed for the reader
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
