import struct

import numpy as np
import pytest

from gradfeat import features as feat
from gradfeat import kernels, oracles
from gradfeat.errors import DimensionError, FormatError
from gradfeat.network import forward, make_synthetic_network


@pytest.fixture
def grads(small_net, rng):
    return [feat.gradient_feature(forward(small_net, np.abs(rng.standard_normal(6)), 2.0),
                                  small_net, 2) for _ in range(8)]


def test_trace_kernel_hand_case():
    f1 = feat.GradientFeature(a=np.array([1.0, 0.0]), u=np.array([0.6, 0.8, 0.0]))
    f2 = feat.GradientFeature(a=np.array([0.6, 0.8]), u=np.array([0.0, 1.0, 0.0]))
    # (a1 . a2)(u1 . u2) = 0.6 * 0.8
    assert kernels.trace_kernel(f1, f2) == pytest.approx(0.48, rel=1e-15)
    ref = oracles.dense_trace(feat.explicit_gradient(f1), feat.explicit_gradient(f2))
    assert kernels.trace_kernel(f1, f2) == pytest.approx(ref, rel=1e-15)


def test_trace_kernel_matches_dense(grads):
    for f1 in grads[:4]:
        for f2 in grads[4:]:
            ref = oracles.dense_trace(feat.explicit_gradient(f1), feat.explicit_gradient(f2))
            assert abs(kernels.trace_kernel(f1, f2) - ref) <= 1e-12


def test_trace_kernel_rejects_mixed_layers(small_net, rng):
    trace = forward(small_net, rng.standard_normal(6), 2.0)
    f1 = feat.gradient_feature(trace, small_net, 1)
    f2 = feat.gradient_feature(trace, small_net, 2)
    with pytest.raises(ValueError, match="layers"):
        kernels.trace_kernel(f1, f2)
    with pytest.raises(TypeError):
        kernels.trace_kernel(f1, feat.forward_feature(trace, "x1"))


def test_trace_equals_dot_on_forward_features(small_net, rng):
    fs = [feat.forward_feature(forward(small_net, rng.standard_normal(6), 2.0), ["x1", "x2"])
          for _ in range(2)]
    assert kernels.trace_kernel(*fs) == kernels.dot_kernel(*fs)


def test_dot_kernel_checks_blocks(small_net, rng):
    trace = forward(small_net, rng.standard_normal(6), 2.0)
    with pytest.raises(DimensionError):
        kernels.dot_kernel(feat.forward_feature(trace, ["x1", "x2"]),
                           feat.forward_feature(trace, ["x2", "x1"]))


def test_gram_entries_match_kernel(grads):
    g = kernels.gram(grads)
    assert g.kind == kernels.KernelKind.TRACE
    for i in range(len(grads)):
        for j in range(len(grads)):
            assert g.entries[i, j] == kernels.trace_kernel(grads[i], grads[j])


def test_gram_threads_are_bit_identical(grads):
    one = kernels.gram(grads, threads=1).entries
    four = kernels.gram(grads, threads=4).entries
    assert one.tobytes() == four.tobytes()


def test_cross_gram_orientation(grads):
    c = kernels.cross_gram(grads[:5], grads[5:])
    assert c.shape == (3, 5)
    assert c.entries[1, 4] == kernels.trace_kernel(grads[6], grads[4])


def test_gram_rejects_heterogeneous(small_net, rng):
    other = make_synthetic_network(1, (6, 7, 4, 3))
    x = rng.standard_normal(6)
    f1 = feat.gradient_feature(forward(small_net, x, 2.0), small_net, 2)
    f2 = feat.gradient_feature(forward(other, x, 2.0), other, 2)
    with pytest.raises(DimensionError):
        kernels.gram([f1, f2])
    with pytest.raises(ValueError):
        kernels.gram([])


def test_psd_report(grads):
    lam, floor, ok = kernels.psd_report(kernels.gram(grads))
    assert ok and lam >= floor
    _, _, bad = kernels.psd_report(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert not bad


def test_gram_file_roundtrip(tmp_path, grads):
    g = kernels.gram(grads)
    path = tmp_path / "k.dfg"
    kernels.save_gram(g, path)
    data = path.read_bytes()
    assert data[:4] == b"DFG1" and len(data) == 9 + 8 * 64
    back = kernels.load_gram(path)
    assert back.kind == g.kind and np.array_equal(back.entries, g.entries)


def test_rectangular_gram_file(grads):
    c = kernels.cross_gram(grads[:5], grads[5:])
    data = kernels.gram_to_bytes(c)
    assert struct.unpack("<IIB", data[4:13]) == (3, 5, 0)
    back = kernels.gram_from_bytes(data)
    assert back.shape == (3, 5) and np.array_equal(back.entries, c.entries)


def test_gram_file_errors(grads):
    data = kernels.gram_to_bytes(kernels.gram(grads))
    with pytest.raises(FormatError):
        kernels.gram_from_bytes(data[:-2])
    with pytest.raises(FormatError, match="kernel code"):
        kernels.gram_from_bytes(data[:8] + b"\x09" + data[9:])


def test_kernel_kind_parse():
    assert kernels.KernelKind.parse("dot") == kernels.KernelKind.DOT
    assert kernels.KernelKind.parse(0) == kernels.KernelKind.TRACE
    with pytest.raises(ValueError):
        kernels.KernelKind.parse("rbf")
