"""Self-check battery comparing every fast path with its independent oracle."""

from dataclasses import dataclass

import numpy as np

from . import features as feat
from . import kernels, metrics, oracles, svm
from .linalg import l2_norm
from .network import forward, make_synthetic_network

# fully connected head of a classic 1000-class image classifier
LARGE_FC_DIMS = (9216, 4096, 4096, 1000)


@dataclass
class CheckResult:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<28} max_error={self.max_error:.3e} "
                f"tol={self.tolerance:.1e}  {self.detail}").rstrip()


def _rel(a, b):
    return abs(a - b) / max(abs(b), np.finfo(float).tiny)


def check_finite_differences(seed=0, dims=(16, 12, 10, 8), per_layer=50, tol=1e-5):
    """Unnormalized factors vs -1 x central differences of the loss w.r.t. W_k entries."""
    rng = np.random.default_rng(seed)
    net = make_synthetic_network(seed, dims)
    worst = 0.0
    counts = []
    for k in range(1, net.depth + 1):
        n_ok = 0
        attempts = 0
        while n_ok < per_layer and attempts < 20:
            attempts += 1
            x = np.abs(rng.standard_normal(net.input_dim)).astype(np.float32)
            trace = forward(net, x, 1.0)
            a, u = feat.gradient_factors(trace, net, k)
            # stay away from ReLU kinks in every layer the perturbation reaches
            if any(np.any(np.abs(trace.pre[j]) <= 1e-3) for j in range(k, net.depth)):
                continue
            size = a.shape[0] * u.shape[0]
            flat = rng.choice(size, size=min(size, per_layer + 10), replace=False)
            entries = [(int(f // u.shape[0]), int(f % u.shape[0])) for f in flat]
            fd, clean = oracles.fd_weight_gradient(net, x, k, entries)
            for (i, j), est, ok in zip(entries, fd, clean):
                value = a[i] * u[j]
                if not ok or abs(value) <= 1e-8:
                    continue
                worst = max(worst, _rel(value, -est))
                n_ok += 1
        counts.append(n_ok)
    passed = worst < tol and min(counts) >= per_layer
    return CheckResult("finite-difference gradient", passed, worst, tol,
                       f"entries per layer {counts}")


def check_backprop_signal(seed=1, dims=(8, 6, 5, 4), tol=1e-5):
    """``d_k`` vs -1 x central differences of the loss w.r.t. ``y_k``."""
    rng = np.random.default_rng(seed)
    net = make_synthetic_network(seed, dims)
    worst, checked = 0.0, 0
    for _ in range(5):
        x = rng.standard_normal(net.input_dim).astype(np.float32)
        trace = forward(net, x, 1.0)
        for k in range(1, net.depth + 1):
            d = feat.backprop_to(trace, net, k)[k]
            fd, y = oracles.fd_preactivation_gradient(net, x, k)
            mask = (np.abs(d) > 1e-8)
            if k < net.depth:
                mask &= np.abs(y) > 1e-3
            for v, e in zip(d[mask], fd[mask]):
                worst = max(worst, _rel(v, -e))
                checked += 1
    return CheckResult("back-propagated signal", worst < tol, worst, tol, f"{checked} entries")


def _random_feature_pairs(seed, count, dims_choices):
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < count:
        dims = dims_choices[len(pairs) % len(dims_choices)]
        net = make_synthetic_network(int(rng.integers(1 << 31)), dims)
        x1, x2 = rng.standard_normal((2, net.input_dim)).astype(np.float32)
        t1, t2 = forward(net, x1, 2.0), forward(net, x2, 2.0)
        for k in range(1, net.depth + 1):
            pairs.append((feat.gradient_feature(t1, net, k), feat.gradient_feature(t2, net, k)))
    return pairs[:count]


def check_factorization(seed=2, count=60, tol=1e-10):
    """Factorized trace kernel vs the trace of dense materialized gradients."""
    pairs = _random_feature_pairs(seed, count, [(64, 48, 32, 16), (20, 12, 7), (9, 5, 4, 3)])
    worst = 0.0
    for f1, f2 in pairs:
        ref = oracles.dense_trace(feat.explicit_gradient(f1), feat.explicit_gradient(f2))
        got = kernels.trace_kernel(f1, f2)
        if ref == 0.0:
            worst = max(worst, abs(got))
        else:
            worst = max(worst, _rel(got, ref))
    return CheckResult("factorized trace kernel", worst < tol, worst, tol, f"{len(pairs)} pairs")


def check_normalization(seed=3, count=100, tol=1e-5):
    """Frobenius norm of ``a u^T`` equals ``|a| |u|``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        a = rng.standard_normal(int(rng.integers(1, 60))).astype(np.float32)
        u = rng.standard_normal(int(rng.integers(1, 60))).astype(np.float32)
        dense = np.outer(a.astype(np.float64), u.astype(np.float64))
        fro = float(np.sqrt(np.sum(dense * dense)))
        worst = max(worst, _rel(l2_norm(a) * l2_norm(u), fro))
    return CheckResult("frobenius normalization", worst < tol, worst, tol, f"{count} pairs")


def check_gram_psd(seed=4, n=40, tol=1e-8):
    """Symmetry, PSD, unit self-similarity and Cauchy-Schwarz on a random Gram."""
    rng = np.random.default_rng(seed)
    net = make_synthetic_network(seed, (24, 16, 12, 6))
    feats = [feat.gradient_feature(forward(net, rng.standard_normal(24).astype(np.float32), 2.0),
                                   net, 2) for _ in range(n)]
    g = kernels.gram(feats)
    K = g.entries
    lam, floor, ok = kernels.psd_report(g)
    symmetric = bool(np.array_equal(K, K.T))
    nonzero = [i for i, f in enumerate(feats) if np.any(f.a) and np.any(f.u)]
    self_err = max((abs(K[i, i] - 1.0) for i in nonzero), default=0.0)
    d = np.sqrt(np.clip(np.diag(K), 0, None))
    cs_excess = float(np.max(np.abs(K) - np.outer(d, d)))
    passed = ok and symmetric and self_err <= 1e-9 and cs_excess <= 1e-12
    return CheckResult("gram psd", passed, max(-lam, 0.0), -floor,
                       f"min_eig={lam:.2e} self_err={self_err:.1e} cs_excess={cs_excess:.1e} "
                       f"symmetric={symmetric}")


def random_svm_problem(rng, n=12):
    X = rng.standard_normal((n, int(rng.integers(2, 6))))
    K = X @ X.T
    if rng.random() < 0.5:
        sq = np.sum(X * X, axis=1)
        K = np.exp(-0.5 * (sq[:, None] + sq[None, :] - 2 * K))
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    rng.shuffle(y)
    return K, y


def check_smo(seed=5, count=20, tol=1e-4):
    """SMO dual objective vs the projected-gradient QP oracle, plus the 2-point closed form."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        K, y = random_svm_problem(rng)
        model = svm.train_binary(K, y, C=1.0)
        _, ref = oracles.qp_dual(K, y, C=1.0)
        worst = max(worst, _rel(svm.dual_objective(K, y, model.alpha), ref))
    two = svm.train_binary(np.array([[1.0, -1.0], [-1.0, 1.0]]), np.array([1.0, -1.0]), C=1.0)
    closed = max(np.max(np.abs(two.alpha - 0.5)), abs(two.b))
    passed = worst < tol and closed <= 1e-9
    return CheckResult("smo vs qp", passed, worst, tol, f"{count} problems, closed-form err "
                       f"{closed:.1e}")


def check_average_precision(tol=1e-12):
    cases = [
        ((0.9, 0.8, 0.7), (1, 0, 1), (1.0 + 2.0 / 3.0) / 2.0),
        ((0.3, 0.1, 0.2, 0.4), (1, 1, 1, 1), 1.0),
        ((0.9, 0.8, 0.7, 0.6, 0.5), (0, 0, 0, 0, 1), 1.0 / 5.0),
    ]
    worst = max(abs(metrics.average_precision(s, r) - want) for s, r, want in cases)
    return CheckResult("average precision", worst <= tol, worst, tol, f"{len(cases)} hand cases")


def check_dimensions():
    want = [(1, 37_748_736, 13_312), (2, 16_777_216, 8_192), (3, 4_096_000, 5_096)]
    got = feat.gradient_sizes(LARGE_FC_DIMS)
    err = 0.0 if got == want else 1.0
    return CheckResult("dimension arithmetic", got == want, err, 0.0,
                       "implied " + "/".join(str(i) for _, i, _ in got))


SUITES = [
    check_finite_differences,
    check_backprop_signal,
    check_factorization,
    check_normalization,
    check_gram_psd,
    check_smo,
    check_average_precision,
    check_dimensions,
]


def run_all():
    return [suite() for suite in SUITES]
