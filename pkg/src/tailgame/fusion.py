"""Label-wise fusion of player outputs and thresholding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .label_space import Partition

STRATEGIES = ("weighted_average", "max_pool")


@dataclass(frozen=True)
class FusionSpec:
    strategy: str = "weighted_average"
    # per-player arrays aligned with each block; None means uniform over covering players
    weights: tuple | None = None
    threshold: float | tuple = 0.5

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown fusion strategy {self.strategy!r}")
        tau = np.atleast_1d(np.asarray(self.threshold, dtype=np.float64))
        if np.any(tau <= 0.0) or np.any(tau >= 1.0):
            raise ValueError("thresholds must lie strictly inside (0, 1)")

    def thresholds(self, num_labels: int) -> np.ndarray:
        tau = np.asarray(self.threshold, dtype=np.float64)
        if tau.ndim == 0:
            return np.full(num_labels, float(tau))
        if tau.shape != (num_labels,):
            raise ValueError(f"per-label thresholds need length {num_labels}")
        return tau

    def fusion_weights(self, partition: Partition) -> list:
        if self.weights is None:
            return uniform_weights(partition)
        w = [np.asarray(wi, dtype=np.float64) for wi in self.weights]
        check_weights(w, partition)
        return w

    def to_dict(self) -> dict:
        tau = self.threshold
        return {
            "strategy": self.strategy,
            "threshold": tau if np.ndim(tau) == 0 else [float(t) for t in tau],
        }


def uniform_weights(partition: Partition) -> list:
    cover = partition.cover_counts().astype(np.float64)
    return [1.0 / cover[b] for b in partition.block_arrays()]


def check_weights(weights, partition: Partition, tol: float = 1e-9) -> None:
    total = np.zeros(partition.num_labels)
    for w, b in zip(weights, partition.block_arrays()):
        if w.shape != b.shape:
            raise ValueError("fusion weights must align with label blocks")
        if np.any(w < 0):
            raise ValueError("fusion weights must be non-negative")
        np.add.at(total, b, w)
    if np.any(total <= 0.0):
        raise ValueError("unnormalized fusion weights")
    if np.any(np.abs(total - 1.0) > tol):
        raise ValueError("unnormalized fusion weights")


def fuse(outputs, partition: Partition, spec: FusionSpec = FusionSpec()):
    """Fuse per-player probabilities (each ``B x |L_i|``) into ``B x L``.

    Returns ``(p_hat, route)``. For weighted averaging ``route`` is the list of
    per-player weight arrays (the exact partial derivatives dp_hat/dpi). For
    max pooling it is a ``B x L`` array holding the argmax player per entry
    (ties go to the lowest player id).
    """
    outputs = [np.atleast_2d(np.asarray(o, dtype=np.float64)) for o in outputs]
    blocks = partition.block_arrays()
    B = outputs[0].shape[0]
    L = partition.num_labels
    if spec.strategy == "weighted_average":
        weights = spec.fusion_weights(partition)
        p_hat = np.zeros((B, L))
        for o, b, w in zip(outputs, blocks, weights):
            p_hat[:, b] += o * w
        return p_hat, weights
    stacked = np.full((len(outputs), B, L), -np.inf)
    for i, (o, b) in enumerate(zip(outputs, blocks)):
        stacked[i][:, b] = o
    if np.any(np.all(np.isneginf(stacked), axis=0)):
        raise ValueError("label not covered by any player")
    # argmax returns the first maximum, i.e. the lowest player id
    route = np.argmax(stacked, axis=0)
    p_hat = np.take_along_axis(stacked, route[None], axis=0)[0]
    return p_hat, route


def fusion_jacobian(route, partition: Partition, player: int, B: int) -> np.ndarray:
    """dp_hat[:, l] / dpi_player[:, l] for the player's block, shape ``B x |L_i|``."""
    block = partition.block_arrays()[player]
    if isinstance(route, list):
        return np.broadcast_to(route[player], (B, len(block)))
    return (route[:, block] == player).astype(np.float64)


def threshold(p_hat, tau) -> np.ndarray:
    p_hat = np.asarray(p_hat, dtype=np.float64)
    return (p_hat > np.asarray(tau, dtype=np.float64)).astype(np.int8)


def _f1_counts(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return np.where(denom > 0, 2 * tp / np.maximum(denom, 1), 1.0)


def tune_thresholds(p_hat, Y, default=0.5) -> np.ndarray:
    """Per-label thresholds maximising validation F1 over midpoints of sorted scores.

    Ties keep the smallest threshold; labels without validation positives
    (or with a single distinct score) keep ``default``.
    """
    p_hat = np.asarray(p_hat, dtype=np.float64)
    Y = np.asarray(Y).astype(bool)
    if p_hat.ndim != 2 or p_hat.shape[0] == 0:
        raise ValueError("empty validation set")
    L = p_hat.shape[1]
    taus = np.array(np.broadcast_to(np.asarray(default, dtype=np.float64), (L,)))
    for l in range(L):
        y = Y[:, l]
        if not y.any():
            continue
        s = np.unique(p_hat[:, l])
        if s.size < 2:
            continue
        cands = (s[:-1] + s[1:]) / 2.0
        pred = p_hat[:, l][None, :] > cands[:, None]
        tp = (pred & y).sum(axis=1)
        fp = (pred & ~y).sum(axis=1)
        fn = (~pred & y).sum(axis=1)
        f1 = _f1_counts(tp, fp, fn)
        taus[l] = cands[int(np.argmax(f1))]
    return taus
