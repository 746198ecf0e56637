"""Evaluation metrics and the per-player specialization ranking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fusion import threshold
from .players import player_forward


def _counts(Y_hat, Y):
    Y_hat = np.asarray(Y_hat).astype(bool)
    Y = np.asarray(Y).astype(bool)
    if Y_hat.shape != Y.shape:
        raise ValueError("prediction and label shapes differ")
    tp = np.sum(Y_hat & Y, axis=0)
    fp = np.sum(Y_hat & ~Y, axis=0)
    fn = np.sum(~Y_hat & Y, axis=0)
    return tp, fp, fn


def _pooled_f1(tp, fp, fn) -> float:
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2.0 * tp / denom


def per_label_f1(Y_hat, Y) -> np.ndarray:
    tp, fp, fn = _counts(Y_hat, Y)
    denom = 2 * tp + fp + fn
    # nothing to find and nothing predicted counts as perfect
    return np.where(denom > 0, 2.0 * tp / np.maximum(denom, 1), 1.0)


def micro_f1(Y_hat, Y) -> float:
    tp, fp, fn = _counts(Y_hat, Y)
    return _pooled_f1(tp.sum(), fp.sum(), fn.sum())


def macro_f1(Y_hat, Y) -> float:
    return float(np.mean(per_label_f1(Y_hat, Y)))


def rare_f1(Y_hat, Y, tail) -> float:
    tail = np.array(sorted(tail), dtype=np.int64)
    if tail.size == 0:
        raise ValueError("empty tail set")
    tp, fp, fn = _counts(np.asarray(Y_hat)[:, tail], np.asarray(Y)[:, tail])
    return _pooled_f1(tp.sum(), fp.sum(), fn.sum())


def f1_scores(Y_hat, Y, tail):
    return micro_f1(Y_hat, Y), macro_f1(Y_hat, Y), rare_f1(Y_hat, Y, tail)


def precision_at_k(scores, Y, k: int) -> float:
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y)).astype(bool)
    L = scores.shape[1]
    if k < 1 or k > L:
        raise ValueError(f"k must lie in [1, {L}], got {k}")
    # stable sort on negated scores keeps lower label ids first among ties
    top = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    hits = np.take_along_axis(Y, top, axis=1)
    return float(hits.sum(axis=1).mean() / k)


def average_precision(scores, y) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y).astype(bool)
    order = np.argsort(-scores, kind="stable")
    rel = y[order]
    if not rel.any():
        raise ValueError("no positives")
    hits = np.cumsum(rel)
    ranks = np.arange(1, len(rel) + 1)
    return float(np.mean(hits[rel] / ranks[rel]))


def mean_average_precision(scores, Y) -> float:
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y)).astype(bool)
    aps = [average_precision(scores[:, l], Y[:, l]) for l in range(Y.shape[1]) if Y[:, l].any()]
    if not aps:
        raise ValueError("no label has positives in the evaluation set")
    return float(np.mean(aps))


@dataclass
class MetricReport:
    micro_f1: float
    macro_f1: float
    rare_f1: float
    map: float
    p_at_k: dict
    per_label: dict = field(default_factory=dict)

    def to_dict(self, per_label: bool = True) -> dict:
        out = {
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "rare_f1": self.rare_f1,
            "map": self.map,
            "p_at_k": {str(k): v for k, v in self.p_at_k.items()},
        }
        if per_label:
            out["per_label"] = self.per_label
        return out


def metric_report(p_hat, Y, tail, tau=0.5, ks=(1, 3, 5)) -> MetricReport:
    p_hat = np.atleast_2d(np.asarray(p_hat, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y)).astype(bool)
    Y_hat = threshold(p_hat, tau).astype(bool)
    tp, fp, fn = _counts(Y_hat, Y)
    prec = np.where(tp + fp > 0, tp / np.maximum(tp + fp, 1), 0.0)
    rec = np.where(tp + fn > 0, tp / np.maximum(tp + fn, 1), 0.0)
    L = Y.shape[1]
    try:
        mean_ap = mean_average_precision(p_hat, Y)
    except ValueError:
        mean_ap = 0.0
    return MetricReport(
        micro_f1=micro_f1(Y_hat, Y),
        macro_f1=macro_f1(Y_hat, Y),
        rare_f1=rare_f1(Y_hat, Y, tail),
        map=mean_ap,
        p_at_k={k: precision_at_k(p_hat, Y, k) for k in ks if k <= L},
        per_label={
            "precision": [float(v) for v in prec],
            "recall": [float(v) for v in rec],
            "f1": [float(v) for v in per_label_f1(Y_hat, Y)],
        },
    )


def specialization_ranks(players, X, Y, split, tau=0.5) -> dict:
    """Rank players on the head and tail sets by micro-F1 of their own outputs.

    Players covering no label of a set are left out of that set's ranking and
    listed under ``excluded``.
    """
    Y = np.atleast_2d(np.asarray(Y)).astype(bool)
    tau = np.broadcast_to(np.asarray(tau, dtype=np.float64), (Y.shape[1],))
    out = {}
    for name, labels in (("head", split.head), ("tail", split.tail)):
        scores, excluded = {}, []
        for p in players:
            mask = np.isin(p.label_block, list(labels))
            if not mask.any():
                excluded.append(int(p.player_id))
                continue
            ls = p.label_block[mask]
            probs = player_forward(p, X)[:, mask]
            scores[int(p.player_id)] = micro_f1(probs > tau[ls], Y[:, ls])
        order = sorted(scores, key=lambda pid: (-scores[pid], pid))
        out[name] = {
            "ranks": {str(pid): r + 1 for r, pid in enumerate(order)},
            "scores": {str(pid): scores[pid] for pid in sorted(scores)},
            "excluded": excluded,
        }
    return out
