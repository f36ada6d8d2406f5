"""Datasets of input vectors with multi-label annotations, and a planted task.

Dataset file layout (``.dfs``, little-endian)::

    b"DFS1"  u32 n  u32 dim  u32 P  f32 samples[n][dim]  u8 labels[n][P]
"""

import struct
from dataclasses import dataclass

import numpy as np

from ._binio import Reader, atomic_write, check_magic
from .errors import DimensionError, FormatError
from .network import make_synthetic_network

MAGIC = b"DFS1"


@dataclass(frozen=True)
class Dataset:
    samples: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.samples, dtype="<f4")
        y = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
            raise DimensionError(f"samples {x.shape} and labels {y.shape} do not line up")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples contain non-finite values")
        if np.any(y > 1):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]

    @property
    def class_count(self):
        return self.labels.shape[1]


def dataset_to_bytes(ds):
    return (MAGIC + struct.pack("<III", ds.n, ds.dim, ds.class_count)
            + ds.samples.astype("<f4").tobytes() + ds.labels.astype(np.uint8).tobytes())


def dataset_from_bytes(data):
    r = Reader(data, what="dataset file")
    check_magic(r, MAGIC)
    n, dim, P = r.unpack("<III")
    x = r.array("<f4", n * dim).reshape(n, dim)
    offset = r.pos
    y = r.array(np.uint8, n * P).reshape(n, P)
    r.expect_end()
    if np.any(y > 1):
        raise FormatError("label bytes must be 0 or 1", offset=offset + int(np.argmax(y.ravel() > 1)))
    if not np.all(np.isfinite(x)):
        raise FormatError("samples contain non-finite values", offset=16)
    return Dataset(samples=x, labels=y)


def save_dataset(ds, path):
    atomic_write(path, dataset_to_bytes(ds))


def load_dataset(path):
    with open(path, "rb") as fh:
        return dataset_from_bytes(fh.read())


def _memberships(rng, n, P, rate):
    m = rng.random((n, P)) < rate
    empty = ~m.any(axis=1)
    # rows with no class get exactly one, drawn uniformly
    m[np.flatnonzero(empty), rng.integers(0, P, size=int(empty.sum()))] = True
    return m


def _sample(rng, prototypes, n, noise, rate):
    P, dim = prototypes.shape
    member = _memberships(rng, n, P, rate)
    w = member / member.sum(axis=1, keepdims=True)
    x = w @ prototypes
    if noise > 0:
        x = x + noise * rng.standard_normal((n, dim))
    return x.astype(np.float32), member.astype(np.uint8)


def make_synthetic_task(seed, n, dims, P, noise=0.0, rate=0.35):
    """Planted multi-label problem plus a random network to extract features with.

    Each class owns a non-negative prototype in input space. A sample picks
    its classes independently with probability ``rate`` (at least one), takes
    the mean of the chosen prototypes, and adds isotropic Gaussian noise of
    standard deviation ``noise``. Labels are the picked classes. With
    ``noise = 0`` there are at most ``2^P - 1`` distinct inputs and every
    class is linearly separable in input space. Returns ``(net, train, test)``; everything derives from ``seed``.
    """
    if n < 2 or P < 1:
        raise ValueError("need n >= 2 and P >= 1")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    net_seed, task_seed = np.random.SeedSequence(seed).spawn(2)
    net = make_synthetic_network(net_seed, dims)
    rng = np.random.default_rng(task_seed)
    prototypes = np.abs(rng.standard_normal((P, net.input_dim)))
    splits = []
    for _ in range(2):
        for _attempt in range(100):
            x, y = _sample(rng, prototypes, n, noise, rate)
            if np.all(y.any(axis=0)) and np.all((1 - y).any(axis=0)):
                break
        else:
            raise ValueError("could not draw a split with positives and negatives for every "
                             "class; adjust n, P or rate")
        splits.append(Dataset(samples=x, labels=y))
    return net, splits[0], splits[1]
