"""Gradient and forward-activation features extracted from a forward trace.

The weight gradient of a fully connected layer is the outer product
``x_{k-1} d_k^T`` where ``d_k`` is the back-propagated signal at the layer's
pre-activation. It is never materialized here: a :class:`GradientFeature`
keeps the two factors, each l2-normalized on its own. Factors live in
float64 in memory and float32 on disk; gradient factors are re-normalized
in float64 when read back so self-similarity stays exactly 1 up to
double-precision rounding.

Sign convention: the top-layer seed is ``g - x_L`` (label minus prediction),
the negative of the calculus derivative of the cross-entropy. Kernel values
are products of two such factors, so the sign cancels.

Feature file layout (``.dff``, little-endian)::

    b"DFF1"  u32 sample_count  u8 kind  u32 dim_a  u32 dim_u
    per sample: f32 a[dim_a] then f32 u[dim_u]

kind 0 holds gradient factor pairs, kind 1 a single (possibly
concatenated) forward vector with ``dim_u = 0``.
"""

import re
import struct
from dataclasses import dataclass

import numpy as np

from . import linalg
from ._binio import Reader, atomic_write, check_magic
from .errors import DimensionError, FormatError
from .network import Activation

MAGIC = b"DFF1"
KIND_GRADIENT = 0
KIND_FORWARD = 1

DEFAULT_EXPLICIT_LIMIT = 10 ** 7


def uniform_labels(P):
    """The non-informative label vector ``[1/P, ..., 1/P]``."""
    if P < 1:
        raise ValueError("class count must be positive")
    return np.full(P, 1.0 / P)


def check_label_vector(g):
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 1:
        raise DimensionError(f"label vector must be 1-D, got shape {g.shape}")
    if np.any(g < 0) or np.any(g > 1):
        raise ValueError("label vector entries must lie in [0, 1]")
    if abs(np.sum(g) - 1.0) > 1e-12:
        raise ValueError(f"label vector must sum to 1, sums to {np.sum(g)!r}")
    return g


@dataclass(frozen=True)
class GradientFeature:
    """Normalized factors of a rank-1 weight gradient ``a u^T``.

    ``layer`` is None for features read back from a file, which does not
    record it.
    """

    a: np.ndarray
    u: np.ndarray
    layer: int | None = None

    @property
    def shape(self):
        return (self.a.shape[0], self.u.shape[0])

    @property
    def implied_size(self):
        return self.a.shape[0] * self.u.shape[0]

    @property
    def stored_size(self):
        return self.a.shape[0] + self.u.shape[0]


@dataclass(frozen=True)
class ForwardFeature:
    """Independently normalized activation blocks, compared by dot product."""

    blocks: tuple

    @property
    def vector(self):
        return np.concatenate(self.blocks)

    @property
    def block_sizes(self):
        return tuple(b.shape[0] for b in self.blocks)

    def __len__(self):
        return sum(self.block_sizes)


@dataclass
class BackwardTrace:
    """Back-propagated signals ``d[k]`` for k from the target layer up to L."""

    signals: dict
    target: int

    def __getitem__(self, k):
        return self.signals[k]


def backward_seed(probabilities, g):
    """Top-layer signal ``g - x_L``."""
    x = np.asarray(probabilities, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if x.shape != g.shape:
        raise DimensionError(f"prediction has {x.shape[0]} classes, label vector {g.shape[0]}")
    return g - x


def _check_trace(trace, net):
    if trace.depth != net.depth:
        raise DimensionError(f"trace has {trace.depth} layers, network has {net.depth}")
    for k, layer in enumerate(net.layers, start=1):
        if trace.pre[k].shape != (layer.out_dim,) or trace.post[k - 1].shape != (layer.in_dim,):
            raise DimensionError(f"trace does not match the network at layer {k}")


def backprop_to(trace, net, k, g=None):
    """Back-propagate from the top of ``net`` down to layer ``k``.

    ``g`` defaults to the uniform label vector. The ReLU mask uses a strict
    inequality, so units with a pre-activation of exactly zero pass nothing.
    """
    _check_trace(trace, net)
    L = net.depth
    if not 1 <= k <= L:
        raise IndexError(f"layer index {k} outside 1..{L}")
    g = uniform_labels(net.class_count) if g is None else check_label_vector(g)
    signals = {L: backward_seed(trace.probabilities, g)}
    for j in range(L - 1, k - 1, -1):
        upstream = net.layer(j + 1).weights
        # W_{j+1} d_{j+1}: rows of W index layer j's outputs
        d = linalg.matvec_transposed(upstream.T, signals[j + 1])
        act = net.layer(j).activation
        if act == Activation.RELU:
            d = np.where(trace.pre[j] > 0, d, 0.0)
        signals[j] = d
    return BackwardTrace(signals=signals, target=k)


def gradient_factors(trace, net, k, g=None):
    """Unnormalized ``(x_{k-1}, d_k)`` whose outer product is the layer-k gradient."""
    back = backprop_to(trace, net, k, g)
    return trace.post[k - 1], back[k]


def gradient_feature(trace, net, k, g=None):
    a, u = gradient_factors(trace, net, k, g)
    return GradientFeature(a=linalg.normalize(a), u=linalg.normalize(u), layer=k)


def gradient_sizes(dims):
    """Implied and factorized sizes of every layer gradient for a dims chain.

    Returns a list of ``(k, implied, stored)`` for k = 1..L.
    """
    dims = [int(d) for d in dims]
    return [(k, dims[k - 1] * dims[k], dims[k - 1] + dims[k]) for k in range(1, len(dims))]


def explicit_gradient(feature, limit=DEFAULT_EXPLICIT_LIMIT):
    """Dense ``a u^T`` in float64. Meant for oracles and small cases only."""
    a = np.asarray(feature.a, dtype=np.float64)
    u = np.asarray(feature.u, dtype=np.float64)
    size = a.shape[0] * u.shape[0]
    if size > limit:
        raise ValueError(f"explicit gradient needs {size} entries, the limit is {limit}")
    return np.outer(a, u)


_SELECTOR = re.compile(r"^([xy])(\d+)$")


def parse_selector(sel):
    """Turn ``"x6"``, ``"y8"`` or an int k (meaning x_k) into ``(kind, k)``."""
    if isinstance(sel, (int, np.integer)):
        return "x", int(sel)
    if isinstance(sel, tuple) and len(sel) == 2:
        return sel[0], int(sel[1])
    m = _SELECTOR.match(str(sel).strip())
    if not m:
        raise ValueError(f"bad activation selector {sel!r}; use x<k> or y<k>")
    return m.group(1), int(m.group(2))


def select_activation(trace, sel):
    kind, k = parse_selector(sel)
    if kind == "x":
        if not 0 <= k <= trace.depth:
            raise IndexError(f"x{k} not available, trace has x0..x{trace.depth}")
        return trace.post[k]
    if not 1 <= k <= trace.depth:
        raise IndexError(f"y{k} not available, trace has y1..y{trace.depth}")
    return trace.pre[k]


def forward_feature(trace, selectors):
    """Normalize each selected activation on its own, keeping the given order."""
    if isinstance(selectors, (str, int, np.integer)):
        selectors = [selectors]
    selectors = list(selectors)
    if not selectors:
        raise ValueError("at least one activation must be selected")
    blocks = tuple(linalg.normalize(select_activation(trace, s)) for s in selectors)
    return ForwardFeature(blocks=blocks)


def _feature_kind(features):
    if not features:
        raise ValueError("no features to write")
    if all(isinstance(f, GradientFeature) for f in features):
        return KIND_GRADIENT
    if all(isinstance(f, ForwardFeature) for f in features):
        return KIND_FORWARD
    raise TypeError("feature list mixes gradient and forward features")


def features_to_bytes(features):
    features = list(features)
    kind = _feature_kind(features)
    if kind == KIND_GRADIENT:
        dim_a, dim_u = features[0].shape
        if any(f.shape != (dim_a, dim_u) for f in features):
            raise DimensionError("gradient features have differing shapes")
    else:
        dim_a, dim_u = len(features[0]), 0
        if any(len(f) != dim_a for f in features):
            raise DimensionError("forward features have differing lengths")
    parts = [MAGIC, struct.pack("<IBII", len(features), kind, dim_a, dim_u)]
    for f in features:
        if kind == KIND_GRADIENT:
            parts.append(np.asarray(f.a, dtype="<f4").tobytes())
            parts.append(np.asarray(f.u, dtype="<f4").tobytes())
        else:
            parts.append(np.asarray(f.vector, dtype="<f4").tobytes())
    return b"".join(parts)


@dataclass(frozen=True)
class FeatureHeader:
    count: int
    kind: int
    dim_a: int
    dim_u: int


def read_feature_header(reader):
    check_magic(reader, MAGIC)
    count, kind, dim_a, dim_u = reader.unpack("<IBII")
    if kind not in (KIND_GRADIENT, KIND_FORWARD):
        raise FormatError(f"unknown feature kind {kind}", offset=8)
    if kind == KIND_FORWARD and dim_u != 0:
        raise FormatError("forward feature file must have dim_u = 0", offset=13)
    return FeatureHeader(count, kind, dim_a, dim_u)


def features_from_bytes(data):
    r = Reader(data, what="feature file")
    h = read_feature_header(r)
    out = []
    for _ in range(h.count):
        a = r.array("<f4", h.dim_a).astype(np.float64)
        if h.kind == KIND_GRADIENT:
            u = r.array("<f4", h.dim_u).astype(np.float64)
            # undo the norm drift of float32 rounding; zero factors stay zero
            out.append(GradientFeature(a=linalg.normalize(a), u=linalg.normalize(u)))
        else:
            # block boundaries are not stored, so the vector is kept as written
            out.append(ForwardFeature(blocks=(a,)))
    r.expect_end()
    return out


def save_features(features, path):
    atomic_write(path, features_to_bytes(features))


def load_features(path):
    with open(path, "rb") as fh:
        return features_from_bytes(fh.read())
