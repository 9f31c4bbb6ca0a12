"""Labeled datasets, synthetic distributions, perturbation clouds and MNIST IDX input."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    ContractError,
    CountMismatchError,
    MagicNumberError,
    ShapeError,
    TruncatedPayloadError,
)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def make_rng(seed):
    """Seeded 64-bit PCG generator used by every stochastic routine."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Finite multiset of (x in [0,1]^n, y in {-1,+1}) in a fixed order."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ShapeError(f"X must be (N, n) with N labels; got X {X.shape}, y {y.shape}")
        if not np.all(np.isin(y, (-1, 1))):
            raise ContractError("labels must be -1 or +1")
        if X.size and (np.any(X < 0.0) or np.any(X > 1.0) or not np.all(np.isfinite(X))):
            raise ContractError("inputs must lie in [0, 1]^n")
        X.setflags(write=False)
        y = y.astype(np.int64)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[1]

    def __len__(self):
        return self.X.shape[0]

    def __iter__(self):
        for x, y in zip(self.X, self.y):
            yield x, int(y)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.X[idx], self.y[idx])

    def concat(self, other):
        if other.n != self.n:
            raise ShapeError("cannot join datasets of different dimension")
        return LabeledDataset(np.vstack([self.X, other.X]), np.concatenate([self.y, other.y]))

    def unique(self):
        """Distinct (x, y) pairs in order of first appearance."""
        key = np.hstack([self.X, self.y[:, None].astype(float)])
        _, first = np.unique(key, axis=0, return_index=True)
        return self.subset(np.sort(first))


class Variant(Enum):
    PARITY_DIAGONAL = "parity_diagonal"
    OUTLIER_MIX = "outlier_mix"
    TWO_POINT = "two_point"
    BLOB_PAIR = "blob_pair"


OUTLIER_WEIGHTS = (99 / 200, 99 / 200, 1 / 100)


@dataclass(frozen=True)
class DistributionSpec:
    variant: Variant
    n: int
    c: float = 0.0
    margin: float = 0.0
    spread: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ContractError("dimension n must be >= 1")
        if self.variant is Variant.OUTLIER_MIX and not (0 < self.c < self.n / 4):
            raise ContractError(f"OUTLIER_MIX needs 0 < c < n/4, got c={self.c}, n={self.n}")
        if self.variant is Variant.BLOB_PAIR:
            if self.margin <= 0 or self.spread < 0:
                raise ContractError("BLOB_PAIR needs margin > 0 and spread >= 0")
            reach = (self.margin / 2 + self.spread) / math.sqrt(self.n) + self.spread
            if reach > 0.5:
                raise ContractError(
                    f"BLOB_PAIR balls leave the unit cube (reach {reach:.3f} > 0.5)"
                )

    @classmethod
    def parity_diagonal(cls, n):
        return cls(Variant.PARITY_DIAGONAL, n)

    @classmethod
    def outlier_mix(cls, n, c):
        return cls(Variant.OUTLIER_MIX, n, c=c)

    @classmethod
    def two_point(cls, n):
        return cls(Variant.TWO_POINT, n)

    @classmethod
    def blob_pair(cls, n, margin, spread):
        return cls(Variant.BLOB_PAIR, n, margin=margin, spread=spread)

    def support(self):
        """The finite support as a dataset, for the atomic variants."""
        n = self.n
        if self.variant is Variant.PARITY_DIAGONAL:
            i = np.arange(1, n + 1)
            return LabeledDataset(np.outer(i / n, np.ones(n)), np.where(i % 2 == 1, 1, -1))
        if self.variant is Variant.TWO_POINT:
            return LabeledDataset(np.vstack([np.zeros(n), np.ones(n)]), [-1, 1])
        raise ContractError(f"{self.variant.value} has no finite support")

    def blob_centers(self):
        shift = (self.margin / 2 + self.spread) / math.sqrt(self.n)
        return 0.5 + shift * np.ones(self.n), 0.5 - shift * np.ones(self.n)

    def sample(self, N, rng):
        return sample_dataset(self, N, rng)


def _uniform_slice(rng, N, n, total, upper):
    """N points uniform on {z in [0, upper]^n : sum z = total}."""
    flip = total > n * upper / 2
    s = n * upper - total if flip else total
    out = np.empty((N, n))
    filled = 0
    while filled < N:
        batch = max(64, 2 * (N - filled))
        z = rng.dirichlet(np.ones(n), size=batch) * s
        z = z[np.all(z <= upper, axis=1)]
        take = min(len(z), N - filled)
        out[filled:filled + take] = z[:take]
        filled += take
    return upper - out if flip else out


def _sample_outlier(spec, N, rng):
    n, c = spec.n, spec.c
    lo = 2 * c / n
    which = rng.choice(3, size=N, p=OUTLIER_WEIGHTS)
    X = np.empty((N, n))
    y = np.empty(N, dtype=np.int64)
    m = which == 0
    X[m] = lo + _uniform_slice(rng, int(m.sum()), n, n / 2 + c - n * lo, 1 - lo)
    y[m] = 1
    m = which == 1
    X[m] = _uniform_slice(rng, int(m.sum()), n, n / 2 - c, 1 - lo)
    y[m] = -1
    m = which == 2
    X[m] = 1 - _uniform_slice(rng, int(m.sum()), n, c, 1.0)
    y[m] = -1
    return X, y


def _sample_blobs(spec, N, rng):
    n = spec.n
    y = np.where(rng.random(N) < 0.5, 1, -1)
    d = rng.standard_normal((N, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = spec.spread * rng.random(N) ** (1.0 / n)
    plus, minus = spec.blob_centers()
    X = np.where((y == 1)[:, None], plus, minus) + r[:, None] * d
    return X, y


def sample_dataset(spec, N, rng):
    """N i.i.d. draws from ``spec``."""
    if N < 1:
        raise ContractError("N must be >= 1")
    if spec.variant in (Variant.PARITY_DIAGONAL, Variant.TWO_POINT):
        sup = spec.support()
        idx = rng.integers(0, len(sup), size=N)
        X, y = sup.X[idx], sup.y[idx]
    elif spec.variant is Variant.OUTLIER_MIX:
        X, y = _sample_outlier(spec, N, rng)
    else:
        X, y = _sample_blobs(spec, N, rng)
    # rounding can leave values a hair outside the cube
    assert np.all(X >= -1e-12) and np.all(X <= 1 + 1e-12), "sampler left [0,1]^n"
    return LabeledDataset(np.clip(X, 0.0, 1.0), y)


def separation(dataset):
    """Smallest Euclidean distance between points with different labels."""
    pos = dataset.X[dataset.y == 1]
    neg = dataset.X[dataset.y == -1]
    if len(pos) == 0 or len(neg) == 0:
        return math.inf
    best = math.inf
    for chunk in np.array_split(pos, max(1, len(pos) // 256)):
        d2 = ((chunk[:, None, :] - neg[None, :, :]) ** 2).sum(axis=2)
        best = min(best, float(d2.min()))
    return math.sqrt(best)


def perturb_cloud(dataset, eps, perturbations):
    """Training set followed by one perturbed copy per sample, clipped to the cube."""
    if not eps > 0:
        raise ContractError("eps must be positive")
    P = np.asarray(perturbations, dtype=float)
    if P.shape != dataset.X.shape:
        raise ShapeError(f"need one perturbation per sample, shape {dataset.X.shape}")
    norms = np.linalg.norm(P, axis=1)
    if np.any(norms > eps * (1 + 1e-12)):
        raise ContractError(f"perturbation norm {norms.max():.6g} exceeds eps={eps}")
    moved = np.clip(dataset.X + P, 0.0, 1.0)
    return dataset.concat(LabeledDataset(moved, dataset.y))


@dataclass(frozen=True)
class AlternatingLineSpec:
    n: int
    knots: tuple

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or k.size < 1:
            raise ContractError("need at least one knot")
        if np.any(np.diff(k) <= 0):
            raise ContractError("knots must be strictly increasing")
        if k[0] < 0 or k[-1] > 1:
            raise ContractError("knots must lie in [0, 1]")
        object.__setattr__(self, "knots", tuple(float(v) for v in k))

    @property
    def N(self):
        return len(self.knots)

    def labels(self):
        return np.where(np.arange(self.N) % 2 == 0, 1, -1)


def alternating_line_dataset(spec):
    k = np.asarray(spec.knots)
    return LabeledDataset(np.outer(k, np.ones(spec.n)), spec.labels())


def data_fraction(dataset, fraction, rng):
    """Seeded subsample without replacement of size round(fraction * N)."""
    if not 0 < fraction <= 1:
        raise ContractError("fraction must be in (0, 1]")
    size = int(math.floor(fraction * len(dataset) + 0.5))
    if size < 1:
        raise ContractError(f"fraction {fraction} of {len(dataset)} samples is empty")
    return dataset.subset(rng.permutation(len(dataset))[:size])


# MNIST --------------------------------------------------------------------------


def default_label_rule(digit):
    return -1 if digit % 2 == 0 else 1


def _read_idx(path, magic, dims):
    with open(path, "rb") as f:
        raw = f.read()
    head = 4 * (1 + dims)
    if len(raw) < head:
        raise TruncatedPayloadError(f"{path}: header needs {head} bytes, file has {len(raw)}")
    got = struct.unpack(">I", raw[:4])[0]
    if got != magic:
        raise MagicNumberError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    shape = struct.unpack(f">{dims}I", raw[4:head])
    size = int(np.prod(shape))
    if len(raw) - head < size:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(raw) - head} bytes, header promises {size}"
        )
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=head).reshape(shape)


def mnist_load(images_path, labels_path, label_rule=default_label_rule):
    """Read IDX image/label files into a binary dataset with pixels scaled by 1/255.

    ``label_rule`` maps a digit to -1, +1 or None (drop the sample).
    """
    images = _read_idx(images_path, IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images.shape[0]} images in {images_path} but {labels.shape[0]} labels in {labels_path}"
        )
    mapped = [label_rule(int(d)) for d in labels]
    keep = np.array([m is not None for m in mapped], dtype=bool)
    y = np.array([m for m in mapped if m is not None], dtype=np.int64)
    X = images.reshape(images.shape[0], -1)[keep].astype(float) / 255.0
    return LabeledDataset(X, y)


def write_idx(path, array, magic):
    """Write a uint8 array in IDX layout (used for fixtures)."""
    arr = np.asarray(array, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        f.write(struct.pack(f">{arr.ndim}I", *arr.shape))
        f.write(arr.tobytes())
