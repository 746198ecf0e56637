"""Shared payoff, curiosity rewards, per-player objectives and the global potential.

All batch quantities are Monte-Carlo means over the rows of the batch. The
soft-F1 payoff is the exception: it pools counts over the whole batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fusion import FusionSpec, fuse, fusion_jacobian, threshold
from .label_space import FrequencyTable, Partition

SOFT_F1_SMOOTHING = 1e-6
CORRECTNESS_MODES = ("soft_probability", "hard_indicator")
SURROGATES = ("soft_f1", "neg_bce")


@dataclass(frozen=True)
class CuriositySpec:
    alpha: float = 0.5
    beta: float = 0.2
    correctness_mode: str = "soft_probability"

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.correctness_mode not in CORRECTNESS_MODES:
            raise ValueError(f"unknown correctness mode {self.correctness_mode!r}")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "correctness_mode": self.correctness_mode}


@dataclass(frozen=True)
class SurrogateSpec:
    kind: str = "soft_f1"
    # multiply each label's term by 1/(1+freq); used by the single-predictor ablation
    rarity_weighted: bool = False

    def __post_init__(self):
        if self.kind not in SURROGATES:
            raise ValueError(f"unknown surrogate {self.kind!r}")

    @property
    def m_max(self) -> float:
        return 1.0 if self.kind == "soft_f1" else 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "rarity_weighted": self.rarity_weighted}


# ----------------------------------------------------------------------------
# surrogate payoff M


def _label_weights(L, label_weights):
    return np.ones(L) if label_weights is None else np.asarray(label_weights, dtype=np.float64)


def surrogate_score(p_hat, Y, spec: SurrogateSpec = SurrogateSpec(), label_weights=None) -> float:
    p_hat = np.atleast_2d(np.asarray(p_hat, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    w = _label_weights(p_hat.shape[1], label_weights)
    if spec.kind == "soft_f1":
        s = SOFT_F1_SMOOTHING
        num = 2.0 * np.sum(w * p_hat * Y) + s
        den = np.sum(w * p_hat) + np.sum(w * Y) + s
        return float(num / den)
    bce = -(Y * np.log(p_hat) + (1.0 - Y) * np.log1p(-p_hat))
    return float(-np.mean(w * bce))


def surrogate_grad(p_hat, Y, spec: SurrogateSpec = SurrogateSpec(), label_weights=None) -> np.ndarray:
    """dM/dp_hat, same shape as the batch."""
    p_hat = np.atleast_2d(np.asarray(p_hat, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    w = _label_weights(p_hat.shape[1], label_weights)
    if spec.kind == "soft_f1":
        s = SOFT_F1_SMOOTHING
        num = 2.0 * np.sum(w * p_hat * Y) + s
        den = np.sum(w * p_hat) + np.sum(w * Y) + s
        return w * (2.0 * Y * den - num) / den**2
    return w * (Y / p_hat - (1.0 - Y) / (1.0 - p_hat)) / p_hat.size


# ----------------------------------------------------------------------------
# curiosity: rarity bonus and disagreement


def _correctness(p_hat, Y, mode, tau=0.5):
    if mode == "hard_indicator":
        return (threshold(p_hat, tau) == (Y > 0.5)).astype(np.float64)
    return np.where(Y > 0.5, p_hat, 1.0 - p_hat)


def rarity_bonus(block, p_hat, Y, ft: FrequencyTable, mode: str = "soft_probability", tau=0.5):
    """Rarity-weighted correctness summed over the block; one value per sample.

    ``p_hat`` is the fused prediction over all L labels.
    """
    block = np.asarray(block, dtype=np.int64)
    p_hat = np.asarray(p_hat, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    tau = np.broadcast_to(np.asarray(tau, dtype=np.float64), (p_hat.shape[-1],))
    q = _correctness(p_hat[..., block], Y[..., block], mode, tau[block])
    return np.sum(q / (1.0 + ft.freq[block]), axis=-1)


def bernoulli_kl(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))


def peer_means(outputs, partition: Partition):
    """Per player: (peer mean ``B x |L_i|``, shared-label mask ``|L_i|``)."""
    outputs = [np.atleast_2d(o) for o in outputs]
    blocks = partition.block_arrays()
    B = outputs[0].shape[0]
    total = np.zeros((B, partition.num_labels))
    for o, b in zip(outputs, blocks):
        total[:, b] += o
    cover = partition.cover_counts()
    result = []
    for o, b in zip(outputs, blocks):
        n_peers = cover[b] - 1
        shared = n_peers > 0
        mean = np.full_like(o, 0.5)
        mean[:, shared] = (total[:, b][:, shared] - o[:, shared]) / n_peers[shared]
        result.append((mean, shared))
    return result


def disagreement(player: int, outputs, partition: Partition, peers=None):
    """Mean Bernoulli KL of a player to its peer mean over shared labels; per sample."""
    if peers is None:
        peers = peer_means(outputs, partition)
    p = np.atleast_2d(outputs[player])
    mean, shared = peers[player]
    if not shared.any():
        return np.zeros(p.shape[0])
    kl = bernoulli_kl(p[:, shared], mean[:, shared])
    return np.maximum(kl.mean(axis=1), 0.0)


def curiosity(r, d, beta: float):
    return r + beta * d


def per_player_objective(M: float, C, alpha: float):
    return M + alpha * C


def potential(M: float, curiosities, alpha: float) -> float:
    return float(M + alpha * float(np.sum(curiosities)))


def tail_recall_surrogate(p_hat, Y, ft: FrequencyTable, tail, partition: Partition) -> float:
    """sum over tail labels of cover_count/(1+freq) times soft true positives."""
    tail = np.array(sorted(tail), dtype=np.int64)
    if tail.size == 0:
        raise ValueError("empty tail set")
    p_hat = np.atleast_2d(np.asarray(p_hat, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    w = partition.cover_counts()[tail] / (1.0 + ft.freq[tail])
    tp = np.sum(p_hat[:, tail] * Y[:, tail], axis=0)
    return float(np.sum(w * tp))


# ----------------------------------------------------------------------------
# batch evaluation


@dataclass
class RewardBreakdown:
    M: float
    r: np.ndarray
    d: np.ndarray
    C: np.ndarray
    J: np.ndarray
    phi: float

    def per_player(self) -> list:
        return [
            {"r": float(r), "d": float(d), "C": float(c), "J": float(j)}
            for r, d, c, j in zip(self.r, self.d, self.C, self.J)
        ]


def evaluate_rewards(
    outputs,
    Y,
    partition: Partition,
    ft: FrequencyTable,
    fusion: FusionSpec = FusionSpec(),
    cur: CuriositySpec = CuriositySpec(),
    sur: SurrogateSpec = SurrogateSpec(),
    p_hat=None,
) -> RewardBreakdown:
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if p_hat is None:
        p_hat, _ = fuse(outputs, partition, fusion)
    lw = ft.rarity_weights() if sur.rarity_weighted else None
    M = surrogate_score(p_hat, Y, sur, lw)
    tau = fusion.thresholds(partition.num_labels)
    peers = peer_means(outputs, partition)
    r = np.array([
        rarity_bonus(b, p_hat, Y, ft, cur.correctness_mode, tau).mean() for b in partition.block_arrays()
    ])
    d = np.array([disagreement(i, outputs, partition, peers).mean() for i in range(partition.n_players)])
    C = curiosity(r, d, cur.beta)
    J = per_player_objective(M, C, cur.alpha)
    return RewardBreakdown(M=M, r=r, d=d, C=C, J=J, phi=potential(M, C, cur.alpha))


def objective_grad_wrt_probs(
    player: int,
    outputs,
    Y,
    partition: Partition,
    ft: FrequencyTable,
    fusion: FusionSpec = FusionSpec(),
    cur: CuriositySpec = CuriositySpec(),
    sur: SurrogateSpec = SurrogateSpec(),
) -> np.ndarray:
    """dJ_i/dpi_i (``B x |L_i|``) with peers held fixed.

    M and the rarity bonus flow through the fusion operator; disagreement
    flows through pi_i only, the peer mean being treated as a constant. The
    hard correctness indicator is piecewise constant and contributes no
    gradient.
    """
    outputs = [np.atleast_2d(o) for o in outputs]
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    B = Y.shape[0]
    block = partition.block_arrays()[player]
    p_hat, route = fuse(outputs, partition, fusion)
    lw = ft.rarity_weights() if sur.rarity_weighted else None

    g_phat = surrogate_grad(p_hat, Y, sur, lw)[:, block]
    if cur.alpha > 0 and cur.correctness_mode == "soft_probability":
        sign = 2.0 * Y[:, block] - 1.0
        g_phat = g_phat + cur.alpha * sign / (1.0 + ft.freq[block]) / B
    g = g_phat * fusion_jacobian(route, partition, player, B)

    if cur.alpha > 0 and cur.beta > 0:
        mean, shared = peer_means(outputs, partition)[player]
        if shared.any():
            p = outputs[player][:, shared]
            q = mean[:, shared]
            dkl = np.log(p / q) - np.log((1.0 - p) / (1.0 - q))
            g[:, shared] += cur.alpha * cur.beta * dkl / shared.sum() / B
    return g
