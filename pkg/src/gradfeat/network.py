"""Fully connected network stack: container, forward pass, weights file.

Layers follow the ``y_k = W_k^T x_{k-1} (+ b_k)`` convention, so a weight
matrix has shape (in_dim, out_dim). Layer indices are 1-based over the stack;
index 0 in a trace refers to the input vector.

Weights file layout (``.dfn``, little-endian, no padding)::

    b"DFN1"  u32 layer_count
    per layer: u32 in_dim, u32 out_dim, u8 has_bias, u8 activation,
               f32 weights[in_dim][out_dim], f32 bias[out_dim] if has_bias
"""

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from ._binio import Reader, atomic_write, check_magic
from .errors import ChainViolationError, DimensionError, FormatError

MAGIC = b"DFN1"


class Activation(enum.IntEnum):
    RELU = 0
    IDENTITY = 1
    SOFTMAX = 2


@dataclass(frozen=True)
class LayerSpec:
    weights: np.ndarray
    activation: Activation
    bias: np.ndarray | None = None

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype="<f4")
        if w.ndim != 2 or min(w.shape) < 1:
            raise DimensionError(f"layer weights must be a non-empty matrix, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("layer weights contain non-finite values")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "activation", Activation(self.activation))
        if self.bias is not None:
            b = np.ascontiguousarray(self.bias, dtype="<f4")
            if b.shape != (w.shape[1],):
                raise DimensionError(f"bias shape {b.shape} does not match out_dim {w.shape[1]}")
            if not np.all(np.isfinite(b)):
                raise ValueError("layer bias contains non-finite values")
            b.setflags(write=False)
            object.__setattr__(self, "bias", b)

    @property
    def in_dim(self):
        return self.weights.shape[0]

    @property
    def out_dim(self):
        return self.weights.shape[1]


@dataclass(frozen=True)
class Network:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if len(layers) < 2:
            raise ValueError("a network needs at least two fully connected layers")
        for k, (lower, upper) in enumerate(zip(layers, layers[1:]), start=1):
            if lower.out_dim != upper.in_dim:
                raise ChainViolationError(
                    f"layer {k} has out_dim {lower.out_dim} but layer {k + 1} has in_dim "
                    f"{upper.in_dim}", layer=k, next_layer=k + 1)
        for k, layer in enumerate(layers[:-1], start=1):
            if layer.activation == Activation.SOFTMAX:
                raise ValueError(f"layer {k}: SoftMax is only allowed on the last layer")
        if layers[-1].activation != Activation.SOFTMAX:
            raise ValueError("the last layer must use SoftMax")

    @property
    def depth(self):
        return len(self.layers)

    @property
    def class_count(self):
        return self.layers[-1].out_dim

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def dims(self):
        return (self.input_dim,) + tuple(layer.out_dim for layer in self.layers)

    def layer(self, k):
        """Layer ``k`` (1-based)."""
        if not 1 <= k <= self.depth:
            raise IndexError(f"layer index {k} outside 1..{self.depth}")
        return self.layers[k - 1]


@dataclass
class ForwardTrace:
    """Everything the forward pass produced for one input.

    ``pre[k]`` is y_k and ``post[k]`` is x_k for k = 1..L; ``post[0]`` is the
    input. ``pre[0]`` is None. All stored vectors are float64.
    """

    pre: list
    post: list
    tau: float
    dims: tuple = field(default=())

    @property
    def depth(self):
        return len(self.post) - 1

    @property
    def input(self):
        return self.post[0]

    @property
    def probabilities(self):
        return self.post[-1]

    @property
    def logits(self):
        return self.pre[-1]


def tempered_softmax(y, tau=1.0):
    """SoftMax of ``y / tau``, evaluated with max-subtraction."""
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    z = np.asarray(y, dtype=np.float64) / tau
    z = z - np.max(z)
    e = np.exp(z)
    return e / linalg.ordered_sum(e)


def relu(y):
    return np.maximum(y, 0.0)


def forward(net, x, tau=1.0):
    """Run ``x`` through every layer, returning the full :class:`ForwardTrace`."""
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != net.input_dim:
        raise DimensionError(f"input has shape {x.shape}, network expects ({net.input_dim},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    pre = [None]
    post = [x.astype(np.float64)]
    for layer in net.layers:
        y = linalg.matvec_transposed(layer.weights, post[-1])
        if layer.bias is not None:
            y = y + layer.bias.astype(np.float64)
        if layer.activation == Activation.RELU:
            out = relu(y)
        elif layer.activation == Activation.IDENTITY:
            out = y.copy()
        else:
            out = tempered_softmax(y, tau)
        pre.append(y)
        post.append(out)
    return ForwardTrace(pre=pre, post=post, tau=float(tau), dims=net.dims)


def make_synthetic_network(seed, dims, bias=True):
    """Deterministic random network for tests and desk-scale experiments.

    Every weight (and bias entry, when ``bias`` is set) of a layer with input
    size ``n`` is drawn uniformly from ``[-1/sqrt(n), 1/sqrt(n)]`` using
    ``numpy.random.default_rng(seed)``, layer by layer, weights before bias.
    Hidden layers use ReLU and the last one SoftMax.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 3:
        raise ValueError(f"need at least 3 dims (input plus two layers), got {dims}")
    if min(dims) < 1:
        raise ValueError(f"all dims must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    layers = []
    for k, (n_in, n_out) in enumerate(zip(dims, dims[1:]), start=1):
        limit = 1.0 / np.sqrt(n_in)
        w = rng.uniform(-limit, limit, size=(n_in, n_out)).astype(np.float32)
        b = rng.uniform(-limit, limit, size=n_out).astype(np.float32) if bias else None
        act = Activation.SOFTMAX if k == len(dims) - 1 else Activation.RELU
        layers.append(LayerSpec(weights=w, activation=act, bias=b))
    return Network(tuple(layers))


def network_to_bytes(net):
    parts = [MAGIC, struct.pack("<I", net.depth)]
    for layer in net.layers:
        has_bias = layer.bias is not None
        parts.append(struct.pack("<IIBB", layer.in_dim, layer.out_dim, has_bias,
                                 int(layer.activation)))
        parts.append(layer.weights.astype("<f4").tobytes())
        if has_bias:
            parts.append(layer.bias.astype("<f4").tobytes())
    return b"".join(parts)


def network_from_bytes(data):
    r = Reader(data, what="weights file")
    check_magic(r, MAGIC)
    (count,) = r.unpack("<I")
    if count < 2:
        raise FormatError(f"weights file declares {count} layers, need at least 2", offset=4)
    layers = []
    header_offsets = []
    for k in range(1, count + 1):
        header_offsets.append(r.pos)
        in_dim, out_dim, has_bias, act = r.unpack("<IIBB")
        if in_dim < 1 or out_dim < 1:
            raise FormatError(f"layer {k} has a zero dimension", offset=header_offsets[-1])
        if has_bias not in (0, 1):
            raise FormatError(f"layer {k} has invalid has_bias flag {has_bias}",
                              offset=header_offsets[-1] + 8)
        try:
            act = Activation(act)
        except ValueError:
            raise FormatError(f"layer {k} has unknown activation code {act}",
                              offset=header_offsets[-1] + 9) from None
        if layers and layers[-1].out_dim != in_dim:
            raise ChainViolationError(
                f"layer {k - 1} has out_dim {layers[-1].out_dim} but layer {k} has in_dim "
                f"{in_dim}", layer=k - 1, next_layer=k, offset=header_offsets[-1])
        w = r.array("<f4", in_dim * out_dim).reshape(in_dim, out_dim)
        b = r.array("<f4", out_dim) if has_bias else None
        try:
            layers.append(LayerSpec(weights=w, activation=act, bias=b))
        except ValueError as exc:
            raise FormatError(f"layer {k}: {exc}", offset=header_offsets[-1]) from None
    r.expect_end()
    try:
        return Network(tuple(layers))
    except ChainViolationError:
        raise
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def save_network(net, path):
    atomic_write(path, network_to_bytes(net))


def load_network(path):
    with open(path, "rb") as fh:
        return network_from_bytes(fh.read())
