import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tailgame.label_space import FrequencyTable, HeadTailSplit, partition_labels
from tailgame.metrics import (
    average_precision,
    macro_f1,
    mean_average_precision,
    metric_report,
    micro_f1,
    per_label_f1,
    precision_at_k,
    rare_f1,
    specialization_ranks,
)
from tailgame.players import PlayerModel, init_players


def brute_f1(pairs):
    tp = fp = fn = 0
    for pred, true in pairs:
        tp += pred and true
        fp += pred and not true
        fn += true and not pred
    return (tp, fp, fn)


def brute_pooled(Y_hat, Y, labels):
    tp, fp, fn = brute_f1([(Y_hat[i][l], Y[i][l]) for i in range(len(Y)) for l in labels])
    return 0.0 if 2 * tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)


def brute_macro(Y_hat, Y, L):
    vals = []
    for l in range(L):
        tp, fp, fn = brute_f1([(Y_hat[i][l], Y[i][l]) for i in range(len(Y))])
        vals.append(1.0 if tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn))
    return sum(vals) / L


def test_rare_f1_hand_value():
    y = np.array([[1], [1]])
    y_hat = np.array([[1], [0]])
    assert rare_f1(y_hat, y, {0}) == pytest.approx(2 / 3)


def test_perfect_prediction():
    y = np.array([[1, 0, 1], [0, 1, 0]])
    assert micro_f1(y, y) == macro_f1(y, y) == rare_f1(y, y, {2}) == 1.0


def test_rare_f1_empty_tail():
    with pytest.raises(ValueError, match="empty tail set"):
        rare_f1(np.zeros((1, 2)), np.zeros((1, 2)), set())


def test_f1_exhaustive():
    # every binary prediction/label pair of shape (n, L) with n*L <= 4
    for n, L in [(1, 1), (1, 2), (2, 1), (1, 3), (3, 1), (2, 2), (1, 4), (4, 1)]:
        cells = n * L
        for bits in itertools.product([0, 1], repeat=2 * cells):
            Y_hat = np.array(bits[:cells]).reshape(n, L)
            Y = np.array(bits[cells:]).reshape(n, L)
            yh, yt = Y_hat.tolist(), Y.tolist()
            assert abs(micro_f1(Y_hat, Y) - brute_pooled(yh, yt, range(L))) <= 1e-12
            assert abs(macro_f1(Y_hat, Y) - brute_macro(yh, yt, L)) <= 1e-12
            tail = {L - 1}
            assert abs(rare_f1(Y_hat, Y, tail) - brute_pooled(yh, yt, tail)) <= 1e-12


def brute_p_at_k(scores, Y, k):
    total = 0.0
    for s, y in zip(scores, Y):
        order = sorted(range(len(s)), key=lambda l: (-s[l], l))
        total += sum(y[l] for l in order[:k]) / k
    return total / len(scores)


def brute_ap(scores, y):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    precs = []
    hits = 0
    for rank, i in enumerate(order, start=1):
        if y[i]:
            hits += 1
            precs.append(hits / rank)
    return sum(precs) / len(precs)


def test_p_at_k_examples():
    assert precision_at_k([[0.9, 0.1, 0.2]], [[1, 0, 0]], 1) == 1.0
    assert precision_at_k([[0.9, 0.8, 0.7, 0.1]], [[0, 1, 0, 1]], 3) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        precision_at_k([[0.1, 0.2]], [[1, 0]], 3)


def test_p_at_k_ties_prefer_lower_label():
    assert precision_at_k([[0.5, 0.5]], [[1, 0]], 1) == 1.0
    assert precision_at_k([[0.5, 0.5]], [[0, 1]], 1) == 0.0


def test_ap_examples():
    assert average_precision([0.9, 0.1], [1, 0]) == 1.0
    assert average_precision([0.9, 0.1], [0, 1]) == 0.5


def test_map_skips_empty_labels():
    scores = np.array([[0.9, 0.3], [0.1, 0.2]])
    assert mean_average_precision(scores, [[1, 0], [0, 0]]) == 1.0
    with pytest.raises(ValueError):
        mean_average_precision(scores, np.zeros((2, 2)))


def test_ranking_metrics_random_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n, L = rng.integers(1, 5), 4
        # coarse grid gives plenty of ties
        scores = np.round(rng.random((n, L)), 1)
        Y = rng.random((n, L)) < 0.5
        for k in range(1, L + 1):
            assert abs(precision_at_k(scores, Y, k) - brute_p_at_k(scores.tolist(), Y.tolist(), k)) <= 1e-12
        cols = [l for l in range(L) if Y[:, l].any()]
        if cols:
            ref = np.mean([brute_ap(scores[:, l].tolist(), Y[:, l].tolist()) for l in cols])
            assert abs(mean_average_precision(scores, Y) - ref) <= 1e-12


def test_p_at_k_exhaustive_subsets():
    rng = np.random.default_rng(1)
    for bits in itertools.product([0, 1], repeat=4):
        y = np.array([bits])
        scores = rng.random((1, 4))
        for k in range(1, 5):
            assert precision_at_k(scores, y, k) == pytest.approx(brute_p_at_k(scores.tolist(), y.tolist(), k), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_metric_properties(seed):
    rng = np.random.default_rng(seed)
    n, L = rng.integers(1, 8), rng.integers(1, 6)
    p = rng.random((n, L))
    Y = rng.random((n, L)) < 0.4
    rep = metric_report(p, Y, {L - 1}, 0.5, ks=(1, 3, 5))
    vals = [rep.micro_f1, rep.macro_f1, rep.rare_f1, rep.map, *rep.p_at_k.values()]
    assert all(0.0 <= v <= 1.0 for v in vals)
    perm = rng.permutation(n)
    rep2 = metric_report(p[perm], Y[perm], {L - 1}, 0.5, ks=(1, 3, 5))
    assert rep2.micro_f1 == pytest.approx(rep.micro_f1)
    assert rep2.macro_f1 == pytest.approx(rep.macro_f1)
    assert rep2.rare_f1 == pytest.approx(rep.rare_f1)
    # a single label's micro-F1 is its own F1 (away from the 0/0 conventions)
    Yh = p > 0.5
    if (Yh[:, 0] | Y[:, 0]).any():
        assert micro_f1(Yh[:, :1], Y[:, :1]) == pytest.approx(per_label_f1(Yh[:, :1], Y[:, :1])[0])


@given(st.integers(0, 10**6))
def test_rare_f1_monotone_in_tp(seed):
    rng = np.random.default_rng(seed)
    Y = rng.random((6, 3)) < 0.5
    Y[0, 2] = True
    Y_hat = rng.random((6, 3)) < 0.5
    Y_hat[0, 2] = False
    before = rare_f1(Y_hat, Y, {2})
    Y_hat[0, 2] = True
    assert rare_f1(Y_hat, Y, {2}) > before


# --- specialization ----------------------------------------------------------


def test_single_player_ranks_first():
    ft = FrequencyTable.from_counts([5, 4, 1, 0], 5)
    part = partition_labels(ft, 1, 0.0)
    players = init_players(part, 2, 0.5, 0)
    X = np.random.default_rng(0).normal(size=(5, 2))
    Y = np.random.default_rng(1).random((5, 4)) < 0.5
    out = specialization_ranks(players, X, Y, HeadTailSplit({0, 1}, {2, 3}, None))
    assert out["head"]["ranks"] == {"0": 1}
    assert out["tail"]["ranks"] == {"0": 1}


def test_identical_players_tie_break():
    players = [PlayerModel(i, [0, 1], np.zeros((2, 1)), np.array([1.0, -1.0])) for i in range(2)]
    out = specialization_ranks(players, np.zeros((3, 1)), np.array([[1, 0]] * 3), HeadTailSplit({0}, {1}, None))
    assert out["head"]["ranks"] == {"0": 1, "1": 2}


def test_excluded_player_is_noted():
    players = [PlayerModel(0, [0], np.zeros((1, 1)), np.zeros(1)), PlayerModel(1, [1], np.zeros((1, 1)), np.zeros(1))]
    out = specialization_ranks(players, np.zeros((2, 1)), np.array([[1, 1], [0, 0]]), HeadTailSplit({0}, {1}, None))
    assert out["head"]["excluded"] == [1]
    assert out["tail"]["excluded"] == [0]


def test_trained_tail_player_ranks_first():
    # player 1 owns the tail labels and is fit by hand; player 0 stays at init
    rng = np.random.default_rng(5)
    X = rng.normal(size=(200, 3))
    Y = np.zeros((200, 4), dtype=int)
    Y[:, 0] = X[:, 0] > -1
    Y[:, 1] = X[:, 1] > -0.5
    Y[:, 2] = X[:, 2] > 1.2
    Y[:, 3] = X[:, 0] + X[:, 2] > 2.0
    p0 = PlayerModel(0, [0, 1, 2], rng.normal(size=(3, 3)) * 0.01, np.zeros(3))
    w = np.zeros((3, 3))
    w[0, 2] = 20.0
    w[1, 1] = 20.0
    w[2, [0, 2]] = 20.0
    p1 = PlayerModel(1, [1, 2, 3], w, np.array([10.0, -24.0, -40.0]))
    out = specialization_ranks([p0, p1], X, Y, HeadTailSplit({0, 1}, {2, 3}, None))
    assert out["tail"]["ranks"]["1"] == 1
