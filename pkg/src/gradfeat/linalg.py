"""Dense vector and matrix primitives with a fixed accumulation order.

Vectors and matrices are plain numpy arrays. Storage is typically float32;
every reduction is carried out in float64 and summed strictly in ascending
index order (``np.cumsum`` is sequential), so results do not depend on BLAS
threading or SIMD blocking. Products of two float32 values are exact in
float64, which makes ``dot(x, y)`` and ``dot(y, x)`` bit-identical.
"""

import numpy as np

from .errors import DimensionError

# Rows per chunk in matvec_transposed; bounds the float64 scratch buffer.
_CHUNK_ROWS = 256


def as_vector(x, dtype=np.float32):
    x = np.asarray(x, dtype=dtype)
    if x.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {x.shape}")
    return x


def as_matrix(w, dtype=np.float32):
    w = np.asarray(w, dtype=dtype)
    if w.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {w.shape}")
    return w


def ordered_sum(terms, axis=-1):
    """Sum float64 terms along ``axis`` in ascending index order."""
    terms = np.asarray(terms, dtype=np.float64)
    if terms.shape[axis] == 0:
        return np.sum(terms, axis=axis)
    return np.take(np.cumsum(terms, axis=axis), -1, axis=axis)


def matvec_transposed(w, x):
    """Return ``w.T @ x`` accumulated in float64 over ascending input index.

    ``w`` has shape (in_dim, out_dim), the convention of ``y = W^T x``.
    """
    w = np.asarray(w)
    x = np.asarray(x)
    if w.ndim != 2 or x.ndim != 1:
        raise DimensionError(
            f"matvec_transposed expects a matrix and a vector, got {w.shape} and {x.shape}")
    if w.shape[0] != x.shape[0]:
        raise DimensionError(
            f"matrix has {w.shape[0]} rows (input dim) but vector has length {x.shape[0]}")
    x64 = x.astype(np.float64)
    acc = np.zeros(w.shape[1], dtype=np.float64)
    for start in range(0, w.shape[0], _CHUNK_ROWS):
        stop = min(start + _CHUNK_ROWS, w.shape[0])
        block = w[start:stop].astype(np.float64) * x64[start:stop, None]
        # fold the running total into the first row so the order stays strictly sequential
        block[0] += acc
        acc = np.cumsum(block, axis=0)[-1]
    return acc


def dot(x, y):
    """Inner product in float64, summed in ascending index order."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionError(f"dot of vectors with shapes {x.shape} and {y.shape}")
    if x.size == 0:
        return 0.0
    return float(ordered_sum(x.astype(np.float64) * y.astype(np.float64)))


def rowwise_dot(rows, x):
    """``dot(rows[i], x)`` for every row, with the same bits as the scalar version."""
    rows = np.asarray(rows)
    x = np.asarray(x)
    if rows.ndim != 2 or rows.shape[1] != x.shape[0]:
        raise DimensionError(f"rowwise_dot of shapes {rows.shape} and {x.shape}")
    if rows.shape[1] == 0:
        return np.zeros(rows.shape[0])
    return ordered_sum(rows.astype(np.float64) * x.astype(np.float64)[None, :], axis=1)


def l2_norm(x):
    return float(np.sqrt(dot(x, x)))


def normalize(x):
    """Scale ``x`` to unit l2 norm; the zero vector is returned unchanged.

    The result keeps the input's float dtype.
    """
    x = np.asarray(x)
    dtype = x.dtype if np.issubdtype(x.dtype, np.floating) else np.float64
    norm = l2_norm(x)
    if norm == 0.0:
        return np.zeros(x.shape, dtype=dtype)
    return (x.astype(np.float64) / norm).astype(dtype)
