"""Synthetic long-tail data, sparse-text ingestion, rare-label downsampling and splits."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .label_space import FrequencyTable, compute_frequencies


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class MultiLabelDataset:
    X: np.ndarray  # n x d, float64
    Y: np.ndarray  # n x L, int8 in {0, 1}
    provenance: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        Y = np.asarray(self.Y, dtype=np.int8)
        if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
            raise ValueError("X and Y must be 2-d with matching row counts")
        if not np.all(np.isfinite(X)):
            raise ValueError("feature values must be finite")
        if np.any((Y != 0) & (Y != 1)):
            raise ValueError("labels must be binary")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.X.shape[1]

    @property
    def num_labels(self) -> int:
        return self.Y.shape[1]

    def label_matrix(self) -> np.ndarray:
        return self.Y

    def label_sets(self) -> list:
        return [tuple(int(l) for l in np.flatnonzero(row)) for row in self.Y]

    def subset(self, idx, note: str = "") -> "MultiLabelDataset":
        return MultiLabelDataset(self.X[idx], self.Y[idx], note or self.provenance)


@dataclass(frozen=True)
class SynthSpec:
    num_labels: int = 50
    feature_dim: int = 20
    num_samples: int = 8000
    power_exponent: float = 1.5
    base_prevalence: float = 0.6
    labels_correlated_with_features: bool = True
    noise_rate: float = 0.0

    def __post_init__(self):
        if self.num_labels < 1 or self.feature_dim < 1:
            raise ValueError("num_labels and feature_dim must be positive")
        if self.num_samples < 0:
            raise ValueError("num_samples must be non-negative")
        if self.power_exponent <= 0:
            raise ValueError("power_exponent must be positive")
        if not 0.0 < self.base_prevalence <= 1.0:
            raise ValueError("base_prevalence must lie in (0, 1]")
        if not 0.0 <= self.noise_rate < 0.5:
            raise ValueError("noise_rate must lie in [0, 0.5)")

    def target_prevalence(self) -> np.ndarray:
        ranks = np.arange(1, self.num_labels + 1, dtype=np.float64)
        return np.minimum(1.0, self.base_prevalence * ranks ** (-self.power_exponent))

    def to_dict(self) -> dict:
        return asdict(self)


def generate_synthetic(spec: SynthSpec, seed: int) -> MultiLabelDataset:
    """Gaussian features with planted linear label scores.

    Label ``l`` has power-law rank ``l + 1``; its threshold is set so exactly
    ``round(target * n)`` samples score above it. Noise then flips each label
    bit independently.
    """
    n, d, L = spec.num_samples, spec.feature_dim, spec.num_labels
    if n == 0:
        raise ValueError("num_samples must be positive")
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    W = rng.normal(size=(L, d))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    if spec.labels_correlated_with_features:
        scores = X @ W.T
    else:
        scores = rng.normal(size=(n, L))
    k = np.rint(spec.target_prevalence() * n).astype(np.int64)
    order = np.argsort(-scores, axis=0, kind="stable")
    Y = np.zeros((n, L), dtype=np.int8)
    for l in range(L):
        Y[order[: k[l], l], l] = 1
    if spec.noise_rate > 0:
        flips = rng.random((n, L)) < spec.noise_rate
        Y = np.where(flips, 1 - Y, Y).astype(np.int8)
    return MultiLabelDataset(X, Y, f"synthetic seed={seed}")


# ----------------------------------------------------------------------------
# sparse text format


def _parse_int(tok, lineno, what):
    try:
        return int(tok)
    except ValueError:
        raise DataFormatError(f"line {lineno}: bad {what} {tok!r}") from None


def load_sparse(path) -> MultiLabelDataset:
    """Read ``n d L`` header then ``l1,l2 f:v f:v`` lines (zero-based indices)."""
    with open(path) as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataFormatError("line 1: missing header")
    head = lines[0].split()
    if len(head) != 3:
        raise DataFormatError("line 1: header must be 'num_samples num_features num_labels'")
    n, d, L = (_parse_int(t, 1, "header field") for t in head)
    if len(lines) - 1 != n:
        raise DataFormatError(f"line 1: header declares {n} samples, found {len(lines) - 1}")
    X = np.zeros((n, d))
    Y = np.zeros((n, L), dtype=np.int8)
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        toks = line.split()
        if toks and ":" not in toks[0] and not line[:1].isspace():
            for lt in toks[0].split(","):
                if lt == "":
                    continue
                lab = _parse_int(lt, lineno, "label id")
                if not 0 <= lab < L:
                    raise DataFormatError(f"line {lineno}: label id {lab} outside [0, {L})")
                Y[i, lab] = 1
            toks = toks[1:]
        for ft in toks:
            idx, sep, val = ft.partition(":")
            if not sep:
                raise DataFormatError(f"line {lineno}: expected index:value, got {ft!r}")
            j = _parse_int(idx, lineno, "feature index")
            if not 0 <= j < d:
                raise DataFormatError(f"line {lineno}: feature index {j} outside [0, {d})")
            try:
                X[i, j] = float(val)
            except ValueError:
                raise DataFormatError(f"line {lineno}: bad feature value {val!r}") from None
    return MultiLabelDataset(X, Y, f"sparse:{path}")


def format_sparse(ds: MultiLabelDataset) -> str:
    out = [f"{len(ds)} {ds.feature_dim} {ds.num_labels}"]
    for x, y in zip(ds.X, ds.Y):
        labels = ",".join(str(int(l)) for l in np.flatnonzero(y))
        feats = "".join(f" {int(j)}:{float(x[j])!r}" for j in np.flatnonzero(x))
        out.append(labels + feats)
    return "\n".join(out) + "\n"


def save_sparse(ds: MultiLabelDataset, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_sparse(ds))


# ----------------------------------------------------------------------------
# transforms


def rarest_labels(ft: FrequencyTable, k: int) -> np.ndarray:
    if not 0 <= k <= ft.num_labels:
        raise ValueError(f"k_rarest must lie in [0, {ft.num_labels}]")
    # rank order puts lower ids first on ties, so the tail end holds higher ids
    order = ft.rank_order()
    return np.sort(order[ft.num_labels - k :])


def downsample_rare(ds: MultiLabelDataset, k_rarest: int, q: float, seed: int) -> MultiLabelDataset:
    """Drop each positive of the k rarest labels independently with probability q."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("removal fraction must lie in [0, 1]")
    targets = rarest_labels(compute_frequencies(ds.Y), k_rarest)
    rng = np.random.default_rng(seed)
    Y = ds.Y.copy()
    for l in targets:
        pos = np.flatnonzero(Y[:, l])
        drop = rng.random(pos.size) < q
        Y[pos[drop], l] = 0
    note = f"{ds.provenance}; downsampled k={k_rarest} q={q} seed={seed}"
    return MultiLabelDataset(ds.X, Y, note)


def split(ds: MultiLabelDataset, ratios=(0.8, 0.1, 0.1), seed: int = 0):
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must be three positive numbers summing to 1")
    n = len(ds)
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise ValueError(f"split of {n} samples by {ratios} leaves an empty slice")
    perm = np.random.default_rng(seed).permutation(n)
    parts = (perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :])
    names = ("train", "val", "test")
    return tuple(ds.subset(idx, f"{ds.provenance}; {name}") for idx, name in zip(parts, names))
