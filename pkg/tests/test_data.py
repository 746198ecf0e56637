import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import spearmanr

from tailgame.data import (
    DataFormatError,
    MultiLabelDataset,
    SynthSpec,
    downsample_rare,
    format_sparse,
    generate_synthetic,
    load_sparse,
    rarest_labels,
    save_sparse,
    split,
)
from tailgame.label_space import FrequencyTable, compute_frequencies


def write(tmp_path, text, name="d.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_sparse_format_example(tmp_path):
    ds = load_sparse(write(tmp_path, "2 3 4\n0,2 1:0.5\n 0:1.0 2:2.0\n"))
    assert len(ds) == 2
    assert ds.label_sets() == [(0, 2), ()]
    assert np.array_equal(ds.X, [[0.0, 0.5, 0.0], [1.0, 0.0, 2.0]])


def test_sparse_canonical_roundtrip_is_byte_identical(tmp_path):
    text = "3 3 4\n0,2 1:0.5\n 0:1.0 2:2.0\n3\n"
    src = write(tmp_path, text)
    out = tmp_path / "out.txt"
    save_sparse(load_sparse(src), out)
    assert out.read_text() == text


def test_sparse_label_out_of_range(tmp_path):
    with pytest.raises(DataFormatError, match="line 2"):
        load_sparse(write(tmp_path, "1 1 4\n5 0:1.0\n"))


@pytest.mark.parametrize("text", ["2 3\n", "1 2 2\n0 7:1.0\n", "1 2 2\n0 1=3\n", "2 2 2\n0 0:1\n", "1 2 2\nx 0:1\n"])
def test_sparse_malformed(tmp_path, text):
    with pytest.raises(DataFormatError, match="line"):
        load_sparse(write(tmp_path, text))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_sparse_roundtrip_value_exact(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(5, 4)) * (rng.random((5, 4)) < 0.6)
    X[0, 0] = 1 / 3
    Y = rng.random((5, 6)) < 0.3
    ds = MultiLabelDataset(X, Y)
    path = tmp_path_factory.mktemp("rt") / "ds.txt"
    save_sparse(ds, path)
    back = load_sparse(path)
    # -0.0 is not written and reads back as 0.0; values are still equal
    assert np.array_equal(back.X, ds.X)
    assert np.array_equal(back.Y, ds.Y)
    assert format_sparse(back) == path.read_text()


# --- synthetic ----------------------------------------------------------------


def test_synthetic_deterministic():
    spec = SynthSpec(num_labels=8, feature_dim=4, num_samples=100)
    a, b = generate_synthetic(spec, 3), generate_synthetic(spec, 3)
    assert a.X.tobytes() == b.X.tobytes() and a.Y.tobytes() == b.Y.tobytes()
    assert generate_synthetic(spec, 4).X.tobytes() != a.X.tobytes()


def test_synthetic_single_label_prevalence():
    ds = generate_synthetic(SynthSpec(num_labels=1, feature_dim=3, num_samples=1000, noise_rate=0.0), 0)
    sd = np.sqrt(1000 * 0.6 * 0.4)
    assert abs(ds.Y.sum() - 600) <= 3 * sd


def test_synthetic_rank_correlation():
    spec = SynthSpec(num_labels=50, feature_dim=20, num_samples=2000, power_exponent=1.5, base_prevalence=0.6)
    ds = generate_synthetic(spec, 0)
    rho = spearmanr(spec.target_prevalence(), ds.Y.mean(axis=0)).statistic
    assert rho >= 0.95


@given(st.integers(0, 1000))
@settings(max_examples=20, deadline=None)
def test_synthetic_prevalence_non_increasing(seed):
    ds = generate_synthetic(SynthSpec(num_labels=12, feature_dim=5, num_samples=300), seed)
    assert np.all(np.diff(ds.Y.sum(axis=0)) <= 0)


def test_synthetic_rejects_empty():
    with pytest.raises(ValueError):
        generate_synthetic(SynthSpec(num_samples=0), 0)


def test_feature_independent_mode_is_uncorrelated():
    spec = SynthSpec(num_labels=3, feature_dim=4, num_samples=4000, base_prevalence=0.5,
                     power_exponent=0.1, labels_correlated_with_features=False)
    ds = generate_synthetic(spec, 0)
    for l in range(3):
        for j in range(4):
            assert abs(np.corrcoef(ds.X[:, j], ds.Y[:, l])[0, 1]) < 0.08


# --- downsampling ---------------------------------------------------------------


def labelled(counts, n):
    Y = np.zeros((n, len(counts)), dtype=np.int8)
    for l, c in enumerate(counts):
        Y[:c, l] = 1
    return MultiLabelDataset(np.zeros((n, 1)), Y)


def test_rarest_labels_tie_goes_to_higher_id():
    ft = FrequencyTable.from_counts([3, 1, 1, 2], 4)
    assert list(rarest_labels(ft, 1)) == [2]
    assert list(rarest_labels(ft, 2)) == [1, 2]


def test_downsample_extremes():
    ds = labelled([50, 30, 10], 60)
    same = downsample_rare(ds, 2, 0.0, 1)
    assert np.array_equal(same.Y, ds.Y)
    gone = downsample_rare(ds, 2, 1.0, 1)
    assert gone.Y[:, 1:].sum() == 0
    assert np.array_equal(gone.Y[:, 0], ds.Y[:, 0])
    assert len(gone) == len(ds) and np.array_equal(gone.X, ds.X)


def test_downsample_binomial_concentration():
    ds = labelled([300, 200], 400)
    for seed in range(10):
        left = downsample_rare(ds, 1, 0.5, seed).Y[:, 1].sum()
        assert abs(left - 100) <= 3 * np.sqrt(50)


@given(st.integers(0, 10**6), st.floats(0, 1))
@settings(max_examples=50, deadline=None)
def test_downsample_never_adds(seed, q):
    rng = np.random.default_rng(seed)
    ds = MultiLabelDataset(np.zeros((30, 1)), rng.random((30, 5)) < 0.3)
    out = downsample_rare(ds, 2, q, seed)
    assert np.all(out.Y <= ds.Y)
    targets = set(rarest_labels(compute_frequencies(ds.Y), 2).tolist())
    for l in range(5):
        if l not in targets:
            assert np.array_equal(out.Y[:, l], ds.Y[:, l])


# --- split ----------------------------------------------------------------------


def test_split_sizes_and_partition():
    X = np.arange(100.0)[:, None]
    ds = MultiLabelDataset(X, np.zeros((100, 2)))
    tr, va, te = split(ds, (0.8, 0.1, 0.1), seed=0)
    assert (len(tr), len(va), len(te)) == (80, 10, 10)
    joined = np.sort(np.concatenate([tr.X[:, 0], va.X[:, 0], te.X[:, 0]]))
    assert np.array_equal(joined, X[:, 0])
    tr2, _, _ = split(ds, (0.8, 0.1, 0.1), seed=0)
    assert np.array_equal(tr.X, tr2.X)


def test_split_errors():
    ds = MultiLabelDataset(np.zeros((5, 1)), np.zeros((5, 1)))
    with pytest.raises(ValueError):
        split(ds, (0.5, 0.5, 0.1))
    with pytest.raises(ValueError, match="empty"):
        split(ds, (0.9, 0.05, 0.05))


def test_downsample_after_split_touches_train_only():
    ds = generate_synthetic(SynthSpec(num_labels=10, feature_dim=3, num_samples=400), 0)
    tr, va, te = split(ds, (0.5, 0.25, 0.25), seed=1)
    tr_r = downsample_rare(tr, 3, 0.5, 0)
    assert np.array_equal(tr_r.X, tr.X)
    assert va.Y.tobytes() == split(ds, (0.5, 0.25, 0.25), seed=1)[1].Y.tobytes()
