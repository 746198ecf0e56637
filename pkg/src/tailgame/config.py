"""JSON run configuration with exhaustive key validation."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .data import SynthSpec
from .fusion import FusionSpec
from .label_space import RARE_F1_RULE, TailRule
from .rewards import CuriositySpec, SurrogateSpec
from .training import TrainConfig

SWEEP_PARAMS = ("alpha", "n_players", "beta", "rho")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"  # or "sparse"
    synthetic: SynthSpec | None = field(default_factory=SynthSpec)
    sparse_path: str | None = None
    split: tuple = (0.25, 0.25, 0.5)
    downsample: dict | None = None  # {"k_rarest": int, "q": float}
    dir: str = "data"


@dataclass(frozen=True)
class MetricOptions:
    tail_rule: TailRule = RARE_F1_RULE
    ks: tuple = (1, 3, 5)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    output_dir: str = "runs"
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    metrics: MetricOptions = field(default_factory=MetricOptions)
    ablation_seeds: tuple = (0, 1, 2, 3, 4)
    sweep_seeds: tuple = (0,)
    base_dir: str = "."  # directory relative paths resolve against

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, seed=seed, train=dataclasses.replace(self.train, seed=seed))

    def to_dict(self) -> dict:
        syn = self.data.synthetic
        return {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "data": {
                "source": self.data.source,
                "synthetic": None if syn is None else syn.to_dict(),
                "sparse_path": self.data.sparse_path,
                "split": list(self.data.split),
                "downsample": self.data.downsample,
                "dir": self.data.dir,
            },
            "train": self.train.to_dict(),
            "metrics": {"tail_rule": self.metrics.tail_rule.to_dict(), "ks": list(self.metrics.ks)},
            "ablation": {"seeds": list(self.ablation_seeds)},
            "sweep": {"seeds": list(self.sweep_seeds)},
        }


# ----------------------------------------------------------------------------
# parsing


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where or 'configuration'}: expected an object")
    for k in obj:
        if k not in allowed:
            name = f"{where}.{k}" if where else k
            raise ConfigError(f"unknown configuration key {name!r}")


def _build(cls, obj, where, convert=None):
    """Instantiate a dataclass from a dict, naming the key on any failure."""
    convert = convert or {}
    names = [f.name for f in dataclasses.fields(cls)]
    _check_keys(obj, names, where)
    kwargs = {}
    for k, v in obj.items():
        try:
            kwargs[k] = convert[k](v, f"{where}.{k}") if k in convert else v
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid value for {where}.{k}: {e}") from None
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {where}: {e}") from None


def _rule(v, where):
    return _build(TailRule, v, where)


def _fusion(v, where):
    _check_keys(v, ("strategy", "weights", "threshold"), where)
    v = dict(v)
    if isinstance(v.get("threshold"), list):
        v["threshold"] = tuple(v["threshold"])
    if v.get("weights") is not None:
        v["weights"] = tuple(tuple(w) for w in v["weights"])
    return _build(FusionSpec, v, where)


def _tuple(v, where):
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"invalid value for {where}: expected a list")
    return tuple(v)


def _int(v, where):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"invalid value for {where}: expected an integer")
    return v


def _opt_int(v, where):
    return None if v is None else _int(v, where)


def parse_train(obj, where="train") -> TrainConfig:
    convert = {
        "n_players": _int,
        "epochs": _int,
        "batch_size": _opt_int,
        "seed": _int,
        "patience": _int,
        "probe_size": _int,
        "lr_per_player": lambda v, w: None if v is None else _tuple(v, w),
        "ks": _tuple,
        "curiosity": lambda v, w: _build(CuriositySpec, v, w),
        "surrogate": lambda v, w: _build(SurrogateSpec, v, w),
        "fusion": _fusion,
        "rare_rule": _rule,
        "diag_rule": _rule,
    }
    return _build(TrainConfig, obj, where, convert)


def parse_config(obj, base_dir=".") -> RunConfig:
    top = ("seed", "output_dir", "data", "train", "fusion", "metrics", "ablation", "sweep")
    _check_keys(obj, top, "")
    seed = _int(obj.get("seed", 0), "seed")

    d = obj.get("data", {})
    _check_keys(d, [f.name for f in dataclasses.fields(DataConfig)], "data")
    source = d.get("source", "synthetic")
    if source not in ("synthetic", "sparse"):
        raise ConfigError(f"invalid value for data.source: {source!r}")
    synthetic = None
    if source == "synthetic":
        synthetic = _build(SynthSpec, d.get("synthetic", {}), "data.synthetic",
                           {"num_labels": _int, "feature_dim": _int, "num_samples": _int})
    elif not isinstance(d.get("sparse_path"), str):
        raise ConfigError("data.sparse_path is required when data.source is 'sparse'")
    ds_opt = d.get("downsample")
    if ds_opt is not None:
        _check_keys(ds_opt, ("k_rarest", "q"), "data.downsample")
        for k in ("k_rarest", "q"):
            if k not in ds_opt:
                raise ConfigError(f"missing configuration key 'data.downsample.{k}'")
        _int(ds_opt["k_rarest"], "data.downsample.k_rarest")
        q = ds_opt["q"]
        if isinstance(q, bool) or not isinstance(q, (int, float)) or not 0.0 <= q <= 1.0:
            raise ConfigError("invalid value for data.downsample.q: must lie in [0, 1]")
    split = _tuple(d.get("split", DataConfig.split), "data.split")
    if len(split) != 3 or any(not isinstance(r, (int, float)) or r <= 0 for r in split) \
            or abs(sum(split) - 1.0) > 1e-9:
        raise ConfigError("invalid value for data.split: need three positive ratios summing to 1")
    data = DataConfig(source, synthetic, d.get("sparse_path"), split, ds_opt, str(d.get("dir", "data")))

    tr = obj.get("train", {})
    if not isinstance(tr, dict):
        raise ConfigError("train: expected an object")
    tr = dict(tr)
    for k, home in (("rare_rule", "metrics.tail_rule"), ("ks", "metrics.ks"), ("seed", "seed")):
        if k in tr:
            raise ConfigError(f"configuration key 'train.{k}' is not accepted; set {home!r} instead")
    if "fusion" in obj:
        if "fusion" in tr:
            raise ConfigError("fusion given both at top level and under train; keep one")
        tr["fusion"] = obj["fusion"]
    m = obj.get("metrics", {})
    _check_keys(m, ("tail_rule", "ks"), "metrics")
    metrics = MetricOptions(
        _rule(m["tail_rule"], "metrics.tail_rule") if "tail_rule" in m else RARE_F1_RULE,
        _tuple(m.get("ks", (1, 3, 5)), "metrics.ks"),
    )
    tr["rare_rule"] = metrics.tail_rule.to_dict()
    tr["ks"] = list(metrics.ks)
    tr["seed"] = seed
    train = parse_train(tr)

    ab = obj.get("ablation", {})
    _check_keys(ab, ("seeds",), "ablation")
    sw = obj.get("sweep", {})
    _check_keys(sw, ("seeds",), "sweep")
    ablation_seeds = tuple(_int(s, "ablation.seeds") for s in _tuple(ab.get("seeds", (0, 1, 2, 3, 4)), "ablation.seeds"))
    sweep_seeds = tuple(_int(s, "sweep.seeds") for s in _tuple(sw.get("seeds", (0,)), "sweep.seeds"))
    if not ablation_seeds or not sweep_seeds:
        raise ConfigError("seed lists must not be empty")
    return RunConfig(seed, str(obj.get("output_dir", "runs")), data, train, metrics,
                     ablation_seeds, sweep_seeds, str(base_dir))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    return parse_config(obj, path.parent)
