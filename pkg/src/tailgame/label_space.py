"""Label frequencies, head/tail splits and the frequency-ranked overlapping partition."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FrequencyTable:
    """Empirical prevalence of every label over ``source_count`` samples."""

    freq: np.ndarray
    source_count: int
    counts: np.ndarray | None = field(default=None, repr=False)

    @property
    def num_labels(self) -> int:
        return len(self.freq)

    @classmethod
    def from_counts(cls, counts, source_count: int) -> "FrequencyTable":
        counts = np.asarray(counts, dtype=np.int64)
        if source_count < 1 or counts.size < 1:
            raise ValueError("empty dataset")
        if np.any(counts < 0) or np.any(counts > source_count):
            raise ValueError("label counts must lie in [0, source_count]")
        freq = counts / float(source_count)
        freq.setflags(write=False)
        counts.setflags(write=False)
        return cls(freq=freq, source_count=int(source_count), counts=counts)

    @classmethod
    def from_frequencies(cls, freq) -> "FrequencyTable":
        """Table restored from stored frequencies (e.g. a checkpoint); counts unknown."""
        freq = np.array(freq, dtype=np.float64)
        if freq.ndim != 1 or freq.size < 1:
            raise ValueError("empty dataset")
        if np.any(freq < 0) or np.any(freq > 1):
            raise ValueError("frequencies must lie in [0, 1]")
        freq.setflags(write=False)
        return cls(freq=freq, source_count=0)

    def rank_order(self) -> np.ndarray:
        """Label ids sorted by frequency descending, ties by ascending id."""
        # count/m keeps count ties and order exactly; lexsort's last key is primary
        return np.lexsort((np.arange(self.num_labels), -self.freq))

    def rarity_weights(self) -> np.ndarray:
        return 1.0 / (1.0 + self.freq)


def compute_frequencies(Y) -> FrequencyTable:
    """Label frequencies from a binary label matrix (samples x labels) or a dataset."""
    if hasattr(Y, "label_matrix"):
        Y = Y.label_matrix()
    Y = np.asarray(Y)
    if Y.ndim != 2 or Y.shape[0] == 0 or Y.shape[1] == 0:
        raise ValueError("empty dataset")
    return FrequencyTable.from_counts(Y.astype(bool).sum(axis=0), Y.shape[0])


def rarity_weight(ft: FrequencyTable, label: int) -> float:
    if not 0 <= label < ft.num_labels:
        raise IndexError(f"label id {label} out of range [0, {ft.num_labels})")
    return 1.0 / (1.0 + float(ft.freq[label]))


@dataclass(frozen=True)
class TailRule:
    kind: str  # "count_fraction" | "cumulative_mass"
    fraction: float

    def __post_init__(self):
        if self.kind not in ("count_fraction", "cumulative_mass"):
            raise ValueError(f"unknown head/tail rule {self.kind!r}")
        if not 0.0 < self.fraction < 1.0:
            raise ValueError(f"head/tail fraction must lie in (0, 1), got {self.fraction}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "fraction": self.fraction}


RARE_F1_RULE = TailRule("count_fraction", 0.2)
HEAD_MASS_RULE = TailRule("cumulative_mass", 0.1)


@dataclass(frozen=True)
class HeadTailSplit:
    head: frozenset
    tail: frozenset
    rule: TailRule

    def tail_array(self) -> np.ndarray:
        return np.array(sorted(self.tail), dtype=np.int64)

    def head_array(self) -> np.ndarray:
        return np.array(sorted(self.head), dtype=np.int64)


def split_head_tail(ft: FrequencyTable, rule: TailRule = RARE_F1_RULE) -> HeadTailSplit:
    order = ft.rank_order()
    L = ft.num_labels
    if rule.kind == "count_fraction":
        n_tail = min(L, math.ceil(rule.fraction * L - 1e-12))
        n_head = L - n_tail
    else:
        target = rule.fraction * float(ft.freq.sum())
        csum = np.cumsum(ft.freq[order])
        # minimal prefix whose mass reaches the target
        n_head = int(np.searchsorted(csum, target - 1e-12, side="left")) + 1
        n_head = min(n_head, L)
    head = frozenset(int(l) for l in order[:n_head])
    tail = frozenset(int(l) for l in order[n_head:])
    return HeadTailSplit(head=head, tail=tail, rule=rule)


@dataclass(frozen=True)
class Partition:
    """N overlapping label blocks, each a contiguous run of the frequency ranking."""

    blocks: tuple
    cores: tuple
    rho: float
    num_labels: int

    @property
    def n_players(self) -> int:
        return len(self.blocks)

    @property
    def overlaps(self) -> tuple:
        cover = self.cover_counts()
        return tuple(tuple(l for l in b if cover[l] > 1) for b in self.blocks)

    def cover_counts(self) -> np.ndarray:
        c = np.zeros(self.num_labels, dtype=np.int64)
        for b in self.blocks:
            c[list(b)] += 1
        return c

    def block_arrays(self) -> list:
        return [np.asarray(b, dtype=np.int64) for b in self.blocks]

    def to_dict(self) -> dict:
        return {
            "N": self.n_players,
            "rho": self.rho,
            "num_labels": self.num_labels,
            "blocks": [list(b) for b in self.blocks],
            "cores": [list(c) for c in self.cores],
            "overlaps": [list(o) for o in self.overlaps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Partition":
        blocks = tuple(tuple(int(l) for l in b) for b in d["blocks"])
        cores = tuple(tuple(int(l) for l in c) for c in d["cores"])
        num_labels = int(d.get("num_labels", 1 + max(max(b) for b in blocks)))
        part = cls(blocks=blocks, cores=cores, rho=float(d["rho"]), num_labels=num_labels)
        if np.any(part.cover_counts() == 0):
            raise ValueError("partition does not cover every label")
        return part


def partition_labels(ft: FrequencyTable, n_players: int, rho: float) -> Partition:
    L = ft.num_labels
    if n_players < 1:
        raise ValueError("need at least one player")
    if n_players > L:
        raise ValueError("more players than labels")
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"overlap ratio must lie in [0, 1), got {rho}")
    ranked = [int(l) for l in ft.rank_order()]
    S = L // n_players
    # guard against products like 0.57 * 100 = 56.99999999999999
    O = int(math.floor(S * rho / 2 + 1e-9))
    blocks, cores = [], []
    for i in range(n_players):
        start = i * S
        # remainder ranks NS..L-1 go to the last core so the blocks cover every label
        end = L - 1 if i == n_players - 1 else (i + 1) * S - 1
        lo = max(0, start - O)
        hi = min(L - 1, end + O)
        cores.append(tuple(ranked[start : end + 1]))
        blocks.append(tuple(ranked[lo : hi + 1]))
    return Partition(blocks=tuple(blocks), cores=tuple(cores), rho=float(rho), num_labels=L)


def single_block_partition(num_labels: int) -> Partition:
    block = tuple(range(num_labels))
    return Partition(blocks=(block,), cores=(block,), rho=0.0, num_labels=num_labels)


def sweep_cost(partition: Partition) -> int:
    """Per-sweep operation count sum_i (|L_i| + |O_i|) of the reward terms."""
    return sum(len(b) for b in partition.blocks) + sum(len(o) for o in partition.overlaps)
