"""Factorized trace kernel, dot kernel, and Gram matrix assembly.

For rank-1 gradients ``A = a u^T`` and ``B = b v^T``,
``Tr(A^T B) = (a . b) * (u . v)``, which costs O(d + D) instead of O(d D).
A forward feature fed to the trace kernel acts as ``a [1]^T``, so both kernel
kinds give identical numbers on forward features.

Gram file layout (``.dfg``, little-endian)::

    b"DFG1"  u32 n  [u32 m]  u8 kernel  f64 entries[n][m]

The optional ``m`` marks a rectangular (cross) matrix. Square files have a
size of ``9 + 8 n^2`` bytes and rectangular ones ``13 + 8 n m``; the two are
told apart by file size modulo 8.
"""

import enum
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import linalg
from ._binio import Reader, atomic_write, check_magic
from .errors import DimensionError, FormatError
from .features import ForwardFeature, GradientFeature

MAGIC = b"DFG1"


class KernelKind(enum.IntEnum):
    TRACE = 0
    DOT = 1

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown kernel kind {value!r}") from None
        return cls(value)


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    kind: KernelKind

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def shape(self):
        return self.entries.shape

    @property
    def is_square(self):
        return self.entries.shape[0] == self.entries.shape[1]


_ONE = np.ones(1)


def _factors(f):
    if isinstance(f, GradientFeature):
        return f.a, f.u
    if isinstance(f, ForwardFeature):
        return f.vector, _ONE
    raise TypeError(f"not a feature: {type(f).__name__}")


def trace_kernel(f1, f2):
    """``(a1 . a2) * (u1 . u2)``; equals ``Tr(A1^T A2)`` of the dense gradients."""
    if isinstance(f1, GradientFeature) and isinstance(f2, GradientFeature):
        if f1.layer is not None and f2.layer is not None and f1.layer != f2.layer:
            raise ValueError(f"cannot compare gradients of layers {f1.layer} and {f2.layer}")
    elif type(f1) is not type(f2):
        raise TypeError("cannot compare a gradient feature with a forward feature")
    a1, u1 = _factors(f1)
    a2, u2 = _factors(f2)
    if a1.shape != a2.shape or u1.shape != u2.shape:
        raise DimensionError(
            f"feature shapes differ: {(a1.shape[0], u1.shape[0])} vs {(a2.shape[0], u2.shape[0])}")
    return linalg.dot(a1, a2) * linalg.dot(u1, u2)


def dot_kernel(f1, f2):
    if not isinstance(f1, ForwardFeature) or not isinstance(f2, ForwardFeature):
        raise TypeError("the dot kernel compares forward features")
    if f1.block_sizes != f2.block_sizes:
        raise DimensionError(f"block structures differ: {f1.block_sizes} vs {f2.block_sizes}")
    return linalg.dot(f1.vector, f2.vector)


def _stack(features, kind):
    features = list(features)
    if not features:
        raise ValueError("empty feature list")
    if kind == KernelKind.DOT:
        if not all(isinstance(f, ForwardFeature) for f in features):
            raise TypeError("the dot kernel compares forward features")
        sizes = {f.block_sizes for f in features}
        if len(sizes) != 1:
            raise DimensionError(f"heterogeneous block structures: {sorted(sizes)}")
    else:
        types = {type(f) for f in features}
        if len(types) != 1:
            raise TypeError("feature list mixes gradient and forward features")
        layers = {f.layer for f in features if isinstance(f, GradientFeature)} - {None}
        if len(layers) > 1:
            raise ValueError(f"feature list mixes layers {sorted(layers)}")
    pairs = [_factors(f) for f in features]
    shapes = {(a.shape[0], u.shape[0]) for a, u in pairs}
    if len(shapes) != 1:
        raise DimensionError(f"heterogeneous feature shapes: {sorted(shapes)}")
    A = np.stack([a for a, _ in pairs]).astype(np.float64)
    U = np.stack([u for _, u in pairs]).astype(np.float64)
    return A, U


def _row(A, U, B, V, i):
    # every entry is its own fixed-order reduction, so row order and threading do not matter
    return linalg.rowwise_dot(B, A[i]) * linalg.rowwise_dot(V, U[i])


def _check_kinds(kind, first, second):
    if kind == KernelKind.DOT:
        return
    if isinstance(first[0], GradientFeature) != isinstance(second[0], GradientFeature):
        raise TypeError("cannot compare gradient features with forward features")
    layers = {f.layer for f in list(first) + list(second)
              if isinstance(f, GradientFeature)} - {None}
    if len(layers) > 1:
        raise ValueError(f"feature sets come from different layers {sorted(layers)}")


def gram(features, kind=KernelKind.TRACE, threads=1):
    """Symmetric n x n kernel matrix; the upper triangle is computed and mirrored."""
    kind = KernelKind.parse(kind)
    A, U = _stack(features, kind)
    n = A.shape[0]
    K = np.zeros((n, n))

    def fill(i):
        K[i, i:] = _row(A, U, A[i:], U[i:], i)

    _run(fill, range(n), threads)
    iu = np.triu_indices(n, 1)
    K[(iu[1], iu[0])] = K[iu]
    return GramMatrix(entries=K, kind=kind)


def cross_gram(train_features, test_features, kind=KernelKind.TRACE, threads=1):
    """Rectangular matrix with one row per test sample and one column per training sample."""
    kind = KernelKind.parse(kind)
    train_features = list(train_features)
    test_features = list(test_features)
    A, U = _stack(train_features, kind)
    B, V = _stack(test_features, kind)
    _check_kinds(kind, train_features, test_features)
    if A.shape[1] != B.shape[1] or U.shape[1] != V.shape[1]:
        raise DimensionError("train and test features have different shapes")
    K = np.zeros((B.shape[0], A.shape[0]))

    def fill(t):
        K[t] = _row(B, V, A, U, t)

    _run(fill, range(B.shape[0]), threads)
    return GramMatrix(entries=K, kind=kind)


def _run(fn, items, threads):
    if threads is None or threads <= 1:
        for i in items:
            fn(i)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(fn, items))


def min_eigenvalue(g):
    """Smallest eigenvalue of a square Gram matrix (diagnostic, O(n^3))."""
    K = g.entries if isinstance(g, GramMatrix) else np.asarray(g)
    return float(np.linalg.eigvalsh(K)[0])


def psd_report(g):
    """``(min_eigenvalue, allowed_floor, ok)`` with floor ``-1e-8 * max(1, trace)``."""
    K = g.entries if isinstance(g, GramMatrix) else np.asarray(g)
    lam = min_eigenvalue(K)
    floor = -1e-8 * max(1.0, float(np.trace(K)))
    return lam, floor, lam >= floor


def gram_to_bytes(g):
    K = np.asarray(g.entries, dtype="<f8")
    n, m = K.shape
    if g.is_square:
        header = struct.pack("<IB", n, int(g.kind))
    else:
        header = struct.pack("<IIB", n, m, int(g.kind))
    return MAGIC + header + K.tobytes()


def gram_from_bytes(data):
    r = Reader(data, what="gram file")
    check_magic(r, MAGIC)
    square = len(data) % 8 == 1
    if square:
        n, code = r.unpack("<IB")
        m = n
    elif len(data) % 8 == 5:
        n, m, code = r.unpack("<IIB")
    else:
        raise FormatError(f"gram file size {len(data)} matches neither layout")
    try:
        kind = KernelKind(code)
    except ValueError:
        raise FormatError(f"unknown kernel code {code}", offset=r.pos - 1) from None
    K = r.array("<f8", n * m).reshape(n, m).astype(np.float64)
    r.expect_end()
    return GramMatrix(entries=K, kind=kind)


def save_gram(g, path):
    atomic_write(path, gram_to_bytes(g))


def load_gram(path):
    with open(path, "rb") as fh:
        return gram_from_bytes(fh.read())
