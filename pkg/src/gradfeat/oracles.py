"""Independent reference computations used to verify the fast paths.

Nothing here calls into the code it checks: the reference forward pass uses
plain numpy matrix products in float64, gradients come from central finite
differences, traces from dense materialized matrices, and the SVM dual from a
projected-gradient solver.
"""

import math

import numpy as np

from .network import Activation


def reference_forward(net, x, tau=1.0, weights=None, pre_override=None):
    """Straight-line float64 forward pass returning ``(pre, post)`` lists.

    ``weights`` optionally replaces the layer matrices (float64 copies for
    perturbation). ``pre_override`` is ``(k, y)``: layer k's pre-activation is
    replaced by ``y`` before its non-linearity.
    """
    ws = weights if weights is not None else [l.weights.astype(np.float64) for l in net.layers]
    h = np.asarray(x, dtype=np.float64)
    pre, post = [None], [h]
    for k, (layer, w) in enumerate(zip(net.layers, ws), start=1):
        y = w.T @ h
        if layer.bias is not None:
            y = y + layer.bias.astype(np.float64)
        if pre_override is not None and pre_override[0] == k:
            y = np.asarray(pre_override[1], dtype=np.float64)
        if layer.activation == Activation.RELU:
            h = np.where(y > 0, y, 0.0)
        elif layer.activation == Activation.IDENTITY:
            h = y
        else:
            z = y / tau
            e = np.exp(z - z.max())
            h = e / e.sum()
        pre.append(y)
        post.append(h)
    return pre, post


def cross_entropy(probabilities, g):
    return float(-np.sum(np.asarray(g) * np.log(probabilities)))


def _uniform(net):
    return np.full(net.class_count, 1.0 / net.class_count)


def fd_weight_gradient(net, x, k, entries, g=None, h=1e-5):
    """Central differences of the cross-entropy w.r.t. ``W_k[i, j]`` at tau = 1.

    Returns ``(grad, kink_free)``: the estimates, and per entry whether every
    ReLU kept its on/off state across the two perturbed evaluations.
    """
    g = _uniform(net) if g is None else np.asarray(g, dtype=np.float64)
    base = [l.weights.astype(np.float64) for l in net.layers]
    grads, clean = [], []
    for i, j in entries:
        values, masks = [], []
        for sign in (1.0, -1.0):
            ws = [w.copy() for w in base]
            ws[k - 1][i, j] += sign * h
            pre, post = reference_forward(net, x, 1.0, weights=ws)
            values.append(cross_entropy(post[-1], g))
            masks.append([p > 0 for p in pre[1:-1]])
        grads.append((values[0] - values[1]) / (2 * h))
        clean.append(all(np.array_equal(a, b) for a, b in zip(*masks)))
    return np.array(grads), np.array(clean)


def fd_preactivation_gradient(net, x, k, g=None, rel_step=1e-4):
    """Central differences of the cross-entropy w.r.t. each entry of ``y_k`` at tau = 1.

    The step for entry i is ``rel_step * (1 + |y_k[i]|)``.
    """
    g = _uniform(net) if g is None else np.asarray(g, dtype=np.float64)
    pre, _ = reference_forward(net, x, 1.0)
    y = pre[k]
    out = np.empty_like(y)
    for i in range(y.shape[0]):
        step = rel_step * (1.0 + abs(y[i]))
        vals = []
        for sign in (1.0, -1.0):
            yy = y.copy()
            yy[i] += sign * step
            _, post = reference_forward(net, x, 1.0, pre_override=(k, yy))
            vals.append(cross_entropy(post[-1], g))
        out[i] = (vals[0] - vals[1]) / (2 * step)
    return out, y


def dense_trace(A, B):
    """``Tr(A^T B)`` of two dense matrices, summed with correct rounding."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    return math.fsum((A * B).ravel())


def _project(v, y, C):
    """Euclidean projection onto ``{0 <= a <= C, y^T a = 0}`` with ``y`` in {-1, +1}.

    The projection is ``clip(v - lam y, 0, C)`` where ``lam`` zeroes the
    piecewise-linear, non-increasing residual ``y^T clip(v - lam y, 0, C)``;
    the root is found exactly between consecutive breakpoints.
    """
    points = np.unique(np.concatenate([v * y, (v - C) * y]))
    values = np.clip(v[None, :] - points[:, None] * y[None, :], 0.0, C) @ y
    zero = np.flatnonzero(values == 0.0)
    if zero.size:
        lam = points[zero[0]]
    else:
        # values fall from positive to negative as lam grows
        k = int(np.flatnonzero(values < 0)[0])
        lo, hi = points[k - 1], points[k]
        lam = lo + (hi - lo) * values[k - 1] / (values[k - 1] - values[k])
    return np.clip(v - lam * y, 0.0, C)


def qp_dual(K, y, C=1.0, iters=50000, tol=1e-11):
    """Maximize the SVM dual with accelerated projected gradient.

    Returns ``(alpha, objective)``. Independent of SMO: no working sets, just
    full-gradient steps of size ``1 / lambda_max(Q)`` with Nesterov momentum,
    restarted whenever the objective drops. Stops once a plain projected
    gradient step moves the iterate by less than ``tol`` or fails to improve
    the objective.
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    Q = K * np.outer(y, y)
    step = 1.0 / max(np.linalg.eigvalsh(Q)[-1], 1e-12)
    alpha = np.zeros(y.shape[0])
    z = alpha.copy()
    t = 1.0

    def objective(a):
        return float(a.sum() - 0.5 * a @ Q @ a)

    obj = objective(alpha)
    for it in range(iters):
        nxt = _project(z + step * (1.0 - Q @ z), y, C)
        nxt_obj = objective(nxt)
        if nxt_obj < obj:
            if t == 1.0:
                # a plain step from the accepted point no longer improves it
                break
            # momentum overshot: restart from the last accepted point
            z, t = alpha.copy(), 1.0
            continue
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        z = nxt + ((t - 1) / t_next) * (nxt - alpha)
        alpha, t, obj = nxt, t_next, nxt_obj
        if it % 25 == 0:
            plain = _project(alpha + step * (1.0 - Q @ alpha), y, C)
            if np.max(np.abs(plain - alpha)) <= tol:
                break
    return alpha, objective(alpha)
