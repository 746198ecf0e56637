"""Per-player linear logistic heads over shared raw features."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .label_space import Partition

EPS = 1e-7
CHECKPOINT_VERSION = 1


@dataclass
class PlayerModel:
    player_id: int
    label_block: np.ndarray
    weights: np.ndarray  # |L_i| x d
    bias: np.ndarray  # |L_i|

    def __post_init__(self):
        self.label_block = np.asarray(self.label_block, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[0] != len(self.label_block):
            raise ValueError("weights must have one row per label in the block")
        if self.bias.shape != (len(self.label_block),):
            raise ValueError("bias length must equal block size")

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "PlayerModel":
        return PlayerModel(self.player_id, self.label_block.copy(), self.weights.copy(), self.bias.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias)))


def init_players(partition: Partition, d: int, sigma: float, seed: int) -> list:
    if d < 1:
        raise ValueError("feature dimension must be positive")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    rng = np.random.default_rng(seed)
    players = []
    for i, block in enumerate(partition.blocks):
        w = rng.normal(0.0, 1.0, size=(len(block), d)) * sigma
        b = rng.normal(0.0, 1.0, size=len(block)) * sigma
        players.append(PlayerModel(i, np.asarray(block), w, b))
    return players


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def player_logits(player: PlayerModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    squeeze = X.ndim == 1
    X2 = X[None, :] if squeeze else X
    if X2.shape[1] != player.feature_dim:
        raise ValueError(f"feature dimension mismatch: expected {player.feature_dim}, got {X2.shape[1]}")
    z = X2 @ player.weights.T + player.bias
    return z[0] if squeeze else z


def player_forward(player: PlayerModel, X) -> np.ndarray:
    """Clamped sigmoid probabilities aligned with ``player.label_block``.

    Accepts a single feature vector (returns ``|L_i|``) or a batch
    (returns ``B x |L_i|``).
    """
    return np.clip(sigmoid(player_logits(player, X)), EPS, 1.0 - EPS)


class Checkpoint(NamedTuple):
    players: list
    partition: Partition
    train_freq: np.ndarray | None
    thresholds: np.ndarray | None


def checkpoint_dict(players, partition: Partition, train_freq=None, thresholds=None) -> dict:
    out = {
        "format_version": CHECKPOINT_VERSION,
        "partition": partition.to_dict(),
        "feature_dim": int(players[0].feature_dim),
        "players": [
            {
                "id": int(p.player_id),
                "label_block": [int(l) for l in p.label_block],
                "weights": [[float(v) for v in row] for row in p.weights],
                "bias": [float(v) for v in p.bias],
            }
            for p in players
        ],
    }
    if train_freq is not None:
        out["train_freq"] = [float(f) for f in train_freq]
    if thresholds is not None:
        out["thresholds"] = [float(t) for t in thresholds]
    return out


def save_checkpoint(path, players, partition: Partition, train_freq=None, thresholds=None) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    with open(path, "w") as fh:
        json.dump(checkpoint_dict(players, partition, train_freq, thresholds), fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    with open(path) as fh:
        d = json.load(fh)
    if d.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {d.get('format_version')!r}")
    partition = Partition.from_dict(d["partition"])
    dim = int(d["feature_dim"])
    players = []
    for rec in d["players"]:
        w = np.asarray(rec["weights"], dtype=np.float64).reshape(len(rec["label_block"]), dim)
        players.append(PlayerModel(int(rec["id"]), rec["label_block"], w, rec["bias"]))
    freq, tau = d.get("train_freq"), d.get("thresholds")
    return Checkpoint(
        players,
        partition,
        None if freq is None else np.asarray(freq, dtype=np.float64),
        None if tau is None else np.asarray(tau, dtype=np.float64),
    )
