"""Kernel SVMs on precomputed Gram matrices.

The binary solver is SMO on the standard dual

    max  sum(alpha) - 1/2 alpha^T Q alpha,   Q_ij = y_i y_j K_ij
    s.t. 0 <= alpha_i <= C,  y^T alpha = 0

with maximal-violating-pair working-set selection. ``np.argmax`` /
``np.argmin`` return the first extremum, so ties go to the lowest index and
training is bit-reproducible.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from ._binio import atomic_write
from .errors import ConvergenceError, DimensionError, FingerprintMismatchError, FormatError
from .kernels import GramMatrix, KernelKind

log = logging.getLogger(__name__)

TAU_EPS = 1e-12
MODEL_FORMAT = "gradfeat-ovr-svm/1"


@dataclass
class SvmBinaryModel:
    alpha: np.ndarray
    y: np.ndarray
    b: float
    C: float
    iterations: int = 0
    gap: float = 0.0

    @property
    def support(self):
        return np.flatnonzero(self.alpha > 0)

    def coef(self):
        return self.alpha * self.y


@dataclass
class OvrSvmModel:
    models: list
    kernel: KernelKind = KernelKind.TRACE
    fingerprint: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def class_count(self):
        return len(self.models)

    @property
    def n_train(self):
        return self.models[0].alpha.shape[0]


def _entries(gram):
    return gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=np.float64)


def dual_objective(K, y, alpha):
    """``sum(alpha) - 1/2 alpha^T Q alpha`` (to be maximized)."""
    ay = alpha * y
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


def decision_values(K, y, alpha, b):
    return K @ (alpha * y) + b


def primal_objective(K, y, alpha, b, C):
    """Primal value at the weight vector implied by ``alpha`` and bias ``b``."""
    ay = alpha * y
    f = K @ ay + b
    return float(0.5 * ay @ K @ ay + C * np.sum(np.maximum(0.0, 1.0 - y * f)))


def _bias(y, G, alpha, C):
    """libsvm-style bias from the gradient ``G = Q alpha - 1``."""
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        return float(-np.mean(yG[free]))
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    ub = np.min(-yG[low]) if np.any(low) else np.inf
    lb = np.max(-yG[up]) if np.any(up) else -np.inf
    if np.isfinite(ub) and np.isfinite(lb):
        return float((ub + lb) / 2)
    return float(ub if np.isfinite(ub) else lb)


def _violation(y, G, alpha, C):
    """Return ``(i, j, m - M)`` for the maximal violating pair."""
    minus_yG = -y * G
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    if not np.any(up) or not np.any(low):
        return -1, -1, 0.0
    i = int(np.argmax(np.where(up, minus_yG, -np.inf)))
    j = int(np.argmin(np.where(low, minus_yG, np.inf)))
    return i, j, float(minus_yG[i] - minus_yG[j])


def train_binary(gram, y, C=1.0, tol=1e-3, max_passes=1000, gap_rtol=1e-5):
    """Train one binary SVM with SMO.

    Iterates until the maximal KKT violation is at most ``tol`` and the
    duality gap is at most ``gap_rtol * (1 + |dual objective|)``.
    ``max_passes`` bounds the work at ``max_passes * n`` pair updates.

    Raises
    ------
    ValueError
        If ``y`` is not +-1 or contains a single class.
    ConvergenceError
        If the budget runs out first; carries the final gap.
    """
    K = _entries(gram)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if K.shape != (n, n):
        raise DimensionError(f"gram is {K.shape}, labels have length {n}")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if np.all(y == y[0]):
        raise ValueError("all labels have the same sign; need both classes")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")

    Q = K * np.outer(y, y)
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 1/2 a^T Q a - sum(a)
    budget = max_passes * n
    it = 0
    gap = np.inf
    while True:
        i, j, viol = _violation(y, G, alpha, C)
        if viol <= tol:
            b = _bias(y, G, alpha, C)
            dual = dual_objective(K, y, alpha)
            gap = primal_objective(K, y, alpha, b, C) - dual
            if gap <= gap_rtol * (1.0 + abs(dual)):
                break
        if it >= budget:
            raise ConvergenceError(f"SMO did not converge in {it} updates", gap)
        if i < 0 or viol <= 0:
            # gap criterion alone unmet but no pair left to improve
            raise ConvergenceError("SMO stalled with no violating pair", gap)
        _update_pair(Q, y, G, alpha, C, i, j)
        it += 1
    return SvmBinaryModel(alpha=alpha, y=y, b=b, C=float(C), iterations=it, gap=float(gap))


def _update_pair(Q, y, G, alpha, C, i, j):
    old_i, old_j = alpha[i], alpha[j]
    if y[i] != y[j]:
        quad = max(Q[i, i] + Q[j, j] + 2 * Q[i, j], TAU_EPS)
        delta = (-G[i] - G[j]) / quad
        diff = alpha[i] - alpha[j]
        alpha[i] += delta
        alpha[j] += delta
        if diff > 0:
            if alpha[j] < 0:
                alpha[j] = 0
                alpha[i] = diff
        elif alpha[i] < 0:
            alpha[i] = 0
            alpha[j] = -diff
        if diff > 0:
            if alpha[i] > C:
                alpha[i] = C
                alpha[j] = C - diff
        elif alpha[j] > C:
            alpha[j] = C
            alpha[i] = C + diff
    else:
        quad = max(Q[i, i] + Q[j, j] - 2 * Q[i, j], TAU_EPS)
        delta = (G[i] - G[j]) / quad
        total = alpha[i] + alpha[j]
        alpha[i] -= delta
        alpha[j] += delta
        if total > C:
            if alpha[i] > C:
                alpha[i] = C
                alpha[j] = total - C
        elif alpha[j] < 0:
            alpha[j] = 0
            alpha[i] = total
        if total > C:
            if alpha[j] > C:
                alpha[j] = C
                alpha[i] = total - C
        elif alpha[i] < 0:
            alpha[i] = 0
            alpha[j] = total
    G += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)


def train_ovr(gram, labels, C=1.0, tol=1e-3, max_passes=1000):
    """One binary SVM per column of the 0/1 ``labels`` matrix."""
    K = _entries(gram)
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.shape[0] != K.shape[0]:
        raise DimensionError(f"labels {labels.shape} do not match gram {K.shape}")
    models = []
    for c in range(labels.shape[1]):
        y = np.where(labels[:, c] == 1, 1.0, -1.0)
        try:
            models.append(train_binary(K, y, C=C, tol=tol, max_passes=max_passes))
        except ConvergenceError as exc:
            raise ConvergenceError(f"class {c}: {exc.reason}", exc.gap) from exc
        except ValueError as exc:
            raise ValueError(f"class {c}: {exc}") from exc
    kind = gram.kind if isinstance(gram, GramMatrix) else KernelKind.TRACE
    return OvrSvmModel(models=models, kernel=kind)


def decision_scores(model, cross):
    """Scores of shape (n_test, P) from a test-by-train kernel matrix."""
    K = _entries(cross)
    if K.ndim != 2 or K.shape[1] != model.n_train:
        raise DimensionError(f"cross gram has shape {K.shape}, model has {model.n_train} "
                             "training samples")
    coef = np.stack([m.coef() for m in model.models], axis=1)
    bias = np.array([m.b for m in model.models])
    return K @ coef + bias


def fingerprint_bytes(data):
    return hashlib.sha256(data).hexdigest()


def check_fingerprint(model, fingerprint):
    if model.fingerprint and model.fingerprint != fingerprint:
        raise FingerprintMismatchError(
            f"model was trained on features {model.fingerprint[:16]}..., "
            f"got {fingerprint[:16]}...")


def model_to_text(model):
    """JSON text with one object per class."""
    doc = {
        "format": MODEL_FORMAT,
        "kernel": model.kernel.name.lower(),
        "fingerprint": model.fingerprint,
        "meta": model.meta,
        "classes": [
            {
                "index": c,
                "C": m.C,
                "bias": m.b,
                "labels": [int(v) for v in m.y],
                "alpha": [float(a) for a in m.alpha],
                "iterations": m.iterations,
                "gap": m.gap,
            }
            for c, m in enumerate(model.models)
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def model_from_text(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model file is not valid JSON: {exc}") from None
    if doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"unsupported model format {doc.get('format')!r}")
    models = [
        SvmBinaryModel(alpha=np.array(c["alpha"], dtype=np.float64),
                       y=np.array(c["labels"], dtype=np.float64), b=float(c["bias"]),
                       C=float(c["C"]), iterations=int(c.get("iterations", 0)),
                       gap=float(c.get("gap", 0.0)))
        for c in doc["classes"]
    ]
    return OvrSvmModel(models=models, kernel=KernelKind.parse(doc["kernel"]),
                       fingerprint=doc.get("fingerprint", ""), meta=doc.get("meta", {}))


def save_model(model, path):
    atomic_write(path, model_to_text(model), mode="w")


def load_model(path):
    with open(path) as fh:
        return model_from_text(fh.read())
