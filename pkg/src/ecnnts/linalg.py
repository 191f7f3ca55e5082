"""Small dense float64 vector/matrix helpers with explicit shape contracts.

The recurrent kernels in this package operate on batched numpy arrays
directly; these helpers back the single-step API and exist so that shape
errors surface as ``ValueError`` with a readable message instead of numpy
broadcasting silently doing something else.
"""
import numpy as np

__all__ = [
    "as_vector",
    "as_matrix",
    "matvec",
    "transpose_matvec",
    "diag_apply",
    "tanh_map",
    "outer",
    "axpy",
]


def as_vector(v, name="vector"):
    arr = np.array(v, dtype=np.float64, copy=True)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def as_matrix(m, name="matrix"):
    arr = np.array(m, dtype=np.float64, copy=True)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def matvec(M, v):
    """Return ``M @ v``."""
    M, v = as_matrix(M, "M"), as_vector(v, "v")
    if M.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: M is {M.shape}, v has length {v.shape[0]}")
    return M @ v


def transpose_matvec(M, v):
    """Return ``M.T @ v`` without forming the transpose."""
    M, v = as_matrix(M, "M"), as_vector(v, "v")
    if M.shape[0] != v.shape[0]:
        raise ValueError(f"dimension mismatch: M is {M.shape}, v has length {v.shape[0]}")
    return v @ M


def diag_apply(u, v):
    """Return ``diag(u) @ v`` as an elementwise product."""
    u, v = as_vector(u, "u"), as_vector(v, "v")
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    return u * v


def tanh_map(v):
    return np.tanh(as_vector(v, "v"))


def outer(u, v):
    return np.outer(as_vector(u, "u"), as_vector(v, "v"))


def axpy(a, x, y):
    """Return ``a * x + y``."""
    x, y = as_vector(x, "x"), as_vector(y, "y")
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return float(a) * x + y
