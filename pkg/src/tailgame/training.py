"""Cyclic best-response minibatch gradient ascent over the players."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics
from .fusion import FusionSpec, fuse, tune_thresholds
from .label_space import (
    HEAD_MASS_RULE,
    RARE_F1_RULE,
    FrequencyTable,
    Partition,
    TailRule,
    compute_frequencies,
    partition_labels,
    split_head_tail,
)
from .metrics import metric_report
from .players import EPS, PlayerModel, checkpoint_dict, init_players, player_forward, player_logits, sigmoid
from .rewards import (
    CuriositySpec,
    SurrogateSpec,
    evaluate_rewards,
    objective_grad_wrt_probs,
    tail_recall_surrogate,
)

log = logging.getLogger(__name__)

OPTIMIZERS = ("sgd", "adaptive_moments")
VARIANTS = ("full", "no_curiosity", "single_predictor")
THRESHOLD_PROTOCOLS = ("fixed", "validation_tuned")


class NumericalDivergence(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    n_players: int = 3
    rho: float = 0.2
    epochs: int = 40
    batch_size: int | None = 64  # None: full batch
    lr: float = 0.05
    lr_per_player: tuple | None = None
    optimizer: str = "adaptive_moments"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    init_sigma: float = 0.1
    seed: int = 0
    curiosity: CuriositySpec = field(default_factory=CuriositySpec)
    surrogate: SurrogateSpec = field(default_factory=SurrogateSpec)
    fusion: FusionSpec = field(default_factory=FusionSpec)
    stopping: str = "fixed_epochs"  # or "patience"
    patience: int = 5
    patience_metric: str = "rare_f1"
    rare_rule: TailRule = RARE_F1_RULE
    # head/tail split used for the disagreement traces
    diag_rule: TailRule = HEAD_MASS_RULE
    probe_size: int = 256
    ks: tuple = (1, 3, 5)
    # decision thresholds of the returned model: the fusion spec's, or tuned per label on validation
    threshold_protocol: str = "fixed"

    def __post_init__(self):
        if self.n_players < 1:
            raise ValueError("n_players must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.threshold_protocol not in THRESHOLD_PROTOCOLS:
            raise ValueError(f"unknown threshold protocol {self.threshold_protocol!r}")
        if self.stopping not in ("fixed_epochs", "patience"):
            raise ValueError(f"unknown stopping rule {self.stopping!r}")
        for lr in self.learning_rates():
            if not lr > 0:
                raise ValueError("learning rates must be positive")
        if self.lr_per_player is not None and len(self.lr_per_player) != self.n_players:
            raise ValueError("lr_per_player needs one entry per player")

    def learning_rates(self) -> tuple:
        if self.lr_per_player is not None:
            return tuple(float(v) for v in self.lr_per_player)
        return (float(self.lr),) * self.n_players

    def to_dict(self) -> dict:
        return {
            "n_players": self.n_players,
            "rho": self.rho,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "lr_per_player": None if self.lr_per_player is None else list(self.lr_per_player),
            "optimizer": self.optimizer,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_eps": self.adam_eps,
            "init_sigma": self.init_sigma,
            "seed": self.seed,
            "curiosity": self.curiosity.to_dict(),
            "surrogate": self.surrogate.to_dict(),
            "fusion": self.fusion.to_dict(),
            "stopping": self.stopping,
            "patience": self.patience,
            "patience_metric": self.patience_metric,
            "rare_rule": self.rare_rule.to_dict(),
            "diag_rule": self.diag_rule.to_dict(),
            "probe_size": self.probe_size,
            "ks": list(self.ks),
            "threshold_protocol": self.threshold_protocol,
        }


# ----------------------------------------------------------------------------
# gradient and update


def forward_all(players, X) -> list:
    return [player_forward(p, X) for p in players]


def player_gradient(i, players, X, Y, partition, ft, fusion=FusionSpec(), cur=CuriositySpec(), sur=SurrogateSpec()):
    """Batch gradient of J_i w.r.t. (weights, bias) of player i, peers fixed.

    Returned as an ascent direction: a step along it increases J_i.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    outputs = forward_all(players, X)
    g_pi = objective_grad_wrt_probs(i, outputs, Y, partition, ft, fusion, cur, sur)
    s = sigmoid(player_logits(players[i], X))
    # the probability clamp has zero slope where it is active
    live = (s >= EPS) & (s <= 1.0 - EPS)
    g_z = g_pi * s * (1.0 - s) * live
    return g_z.T @ X, g_z.sum(axis=0)


@dataclass
class OptimizerState:
    step: int = 0
    m_w: np.ndarray | None = None
    m_b: np.ndarray | None = None
    v_w: np.ndarray | None = None
    v_b: np.ndarray | None = None


def apply_update(player: PlayerModel, grad, lr: float, state: OptimizerState | None = None,
                 optimizer: str = "sgd", beta1=0.9, beta2=0.999, eps=1e-8):
    """One ascent step on the player's parameters (in place). Returns (player, state)."""
    g_w, g_b = grad
    g_w = np.asarray(g_w, dtype=np.float64)
    g_b = np.asarray(g_b, dtype=np.float64)
    if g_w.shape != player.weights.shape or g_b.shape != player.bias.shape:
        raise ValueError("gradient shape does not match player parameters")
    state = state if state is not None else OptimizerState()
    if optimizer == "sgd":
        player.weights += lr * g_w
        player.bias += lr * g_b
        state.step += 1
        return player, state
    if state.m_w is None:
        state.m_w, state.v_w = np.zeros_like(g_w), np.zeros_like(g_w)
        state.m_b, state.v_b = np.zeros_like(g_b), np.zeros_like(g_b)
    state.step += 1
    t = state.step
    state.m_w = beta1 * state.m_w + (1 - beta1) * g_w
    state.m_b = beta1 * state.m_b + (1 - beta1) * g_b
    state.v_w = beta2 * state.v_w + (1 - beta2) * g_w**2
    state.v_b = beta2 * state.v_b + (1 - beta2) * g_b**2
    c1 = 1 - beta1**t
    c2 = 1 - beta2**t
    player.weights += lr * (state.m_w / c1) / (np.sqrt(state.v_w / c2) + eps)
    player.bias += lr * (state.m_b / c1) / (np.sqrt(state.v_b / c2) + eps)
    return player, state


# ----------------------------------------------------------------------------
# training loop


@dataclass
class TrainResult:
    players: list
    partition: Partition
    freq: FrequencyTable
    diagnostics: list
    config: TrainConfig
    phi_init: float = 0.0
    thresholds: np.ndarray | None = None

    def checkpoint(self) -> dict:
        return checkpoint_dict(self.players, self.partition, self.freq.freq, self.thresholds)

    def predict(self, X):
        p_hat, _ = fuse(forward_all(self.players, X), self.partition, self.config.fusion)
        return p_hat


def _batches(n, batch_size, rng):
    if batch_size is None or batch_size >= n:
        yield np.arange(n)
        return
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]


def _epoch_record(epoch, players, partition, ft, cfg, train, val, probe, splits, prev_phi):
    X, Y = train.X, train.Y
    outputs = forward_all(players, X)
    p_hat, _ = fuse(outputs, partition, cfg.fusion)
    rb = evaluate_rewards(outputs, Y, partition, ft, cfg.fusion, cfg.curiosity, cfg.surrogate, p_hat=p_hat)
    rare_split, diag_split = splits
    kl = diagnostics.disagreement_by_split(forward_all(players, probe), partition, diag_split)
    tau = cfg.fusion.thresholds(partition.num_labels)
    val_p = fuse(forward_all(players, val.X), partition, cfg.fusion)[0]
    val_metrics = metric_report(val_p, val.Y, rare_split.tail, tau, cfg.ks).to_dict(per_label=False)
    return {
        "epoch": epoch,
        "phi": rb.phi,
        "phi_delta": rb.phi - prev_phi,
        "M": rb.M,
        "per_player": rb.per_player(),
        "kl_head": kl["kl_head"],
        "kl_tail": kl["kl_tail"],
        "kl_flags": kl["flags"],
        "tail_recall_surrogate": tail_recall_surrogate(p_hat, Y, ft, rare_split.tail, partition),
        "val_metrics": val_metrics,
    }


def initial_phi(players, partition, ft, cfg, train) -> float:
    outputs = forward_all(players, train.X)
    return evaluate_rewards(outputs, train.Y, partition, ft, cfg.fusion, cfg.curiosity, cfg.surrogate).phi


def train(train_ds, val_ds, cfg: TrainConfig, on_epoch=None) -> TrainResult:
    """Run cyclic best response; ``on_epoch(record)`` is called after every epoch."""
    if train_ds.num_labels != val_ds.num_labels or train_ds.feature_dim != val_ds.feature_dim:
        raise ValueError("train and validation label/feature spaces differ")
    ft = compute_frequencies(train_ds.Y)
    partition = partition_labels(ft, cfg.n_players, cfg.rho)
    splits = (split_head_tail(ft, cfg.rare_rule), split_head_tail(ft, cfg.diag_rule))
    players = init_players(partition, train_ds.feature_dim, cfg.init_sigma, cfg.seed)
    states = [OptimizerState() for _ in players]
    lrs = cfg.learning_rates()
    rng = np.random.default_rng([cfg.seed, 1])
    probe = val_ds.X[: cfg.probe_size]
    X, Y = train_ds.X, train_ds.Y.astype(np.float64)

    phi0 = initial_phi(players, partition, ft, cfg, train_ds)
    prev_phi = phi0
    history = []
    best, since_best = -np.inf, 0
    for epoch in range(1, cfg.epochs + 1):
        for idx in _batches(len(train_ds), cfg.batch_size, rng):
            xb, yb = X[idx], Y[idx]
            # peers j < i are already updated on this batch
            for i in range(partition.n_players):
                g = player_gradient(i, players, xb, yb, partition, ft, cfg.fusion, cfg.curiosity, cfg.surrogate)
                apply_update(players[i], g, lrs[i], states[i], cfg.optimizer,
                             cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
                if not players[i].is_finite():
                    raise NumericalDivergence("numerical divergence; reduce η")
        rec = _epoch_record(epoch, players, partition, ft, cfg, train_ds, val_ds, probe, splits, prev_phi)
        if not np.isfinite(rec["phi"]):
            raise NumericalDivergence("numerical divergence; reduce η")
        prev_phi = rec["phi"]
        history.append(rec)
        log.debug("epoch %d phi=%.6f", epoch, rec["phi"])
        if on_epoch is not None:
            on_epoch(rec)
        if cfg.stopping == "patience":
            score = rec["val_metrics"][cfg.patience_metric]
            if score > best:
                best, since_best = score, 0
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    break
    result = TrainResult(players, partition, ft, history, cfg, phi0)
    fixed = cfg.fusion.thresholds(partition.num_labels)
    if cfg.threshold_protocol == "validation_tuned":
        result.thresholds = tune_thresholds(result.predict(val_ds.X), val_ds.Y, default=fixed)
    else:
        result.thresholds = fixed
    return result


def variant_config(base: TrainConfig, variant: str) -> TrainConfig:
    if variant == "full":
        return base
    if variant == "no_curiosity":
        return replace(base, curiosity=replace(base.curiosity, alpha=0.0))
    if variant == "single_predictor":
        return replace(
            base,
            n_players=1,
            rho=0.0,
            lr_per_player=None if base.lr_per_player is None else base.lr_per_player[:1],
            curiosity=replace(base.curiosity, alpha=0.0),
            surrogate=replace(base.surrogate, rarity_weighted=True),
        )
    raise ValueError(f"unknown ablation variant {variant!r}")


def ablation_run(train_ds, val_ds, base: TrainConfig, variant: str, test_ds=None) -> dict:
    """Train one ablation variant and report metrics on ``test_ds`` (validation if omitted)."""
    cfg = variant_config(base, variant)
    result = train(train_ds, val_ds, cfg)
    ev = test_ds if test_ds is not None else val_ds
    tail = split_head_tail(result.freq, cfg.rare_rule).tail
    report = metric_report(result.predict(ev.X), ev.Y, tail, result.thresholds, cfg.ks)
    return {"variant": variant, "config": cfg.to_dict(), "metrics": report.to_dict(per_label=False),
            "result": result}
