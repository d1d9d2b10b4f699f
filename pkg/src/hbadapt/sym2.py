"""Closed-form spectral calculus for symmetric 2x2 matrices.

A symmetric matrix ``[[a, b], [b, c]]`` is stored as the last axis
``(a, b, c)`` of an array, so symmetry holds by construction.  Every
function here is vectorised over leading axes.

The eigen-decomposition uses the double-angle form

    S = m I + r [[cos 2t, sin 2t], [sin 2t, -cos 2t]],

with ``m = (a + c) / 2`` and ``r = hypot((a - c) / 2, b)``, which avoids
forming eigenvectors and stays accurate when the eigenvalues nearly
coincide.
"""

from __future__ import annotations

import numpy as np


def as_sym(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape[-1] != 3:
        raise ValueError(f"expected trailing axis of length 3, got shape {arr.shape}")
    return arr


def from_matrix(mat) -> np.ndarray:
    """Pack ``(..., 2, 2)`` matrices, averaging the off-diagonal pair."""
    mat = np.asarray(mat, dtype=float)
    return np.stack([mat[..., 0, 0], 0.5 * (mat[..., 0, 1] + mat[..., 1, 0]), mat[..., 1, 1]], axis=-1)


def to_matrix(s) -> np.ndarray:
    s = as_sym(s)
    out = np.empty(s.shape[:-1] + (2, 2))
    out[..., 0, 0] = s[..., 0]
    out[..., 0, 1] = s[..., 1]
    out[..., 1, 0] = s[..., 1]
    out[..., 1, 1] = s[..., 2]
    return out


def identity(n: int | tuple = ()) -> np.ndarray:
    shape = (n,) if isinstance(n, int) else tuple(n)
    out = np.zeros(shape + (3,))
    out[..., 0] = 1.0
    out[..., 2] = 1.0
    return out


def det(s) -> np.ndarray:
    s = as_sym(s)
    return s[..., 0] * s[..., 2] - s[..., 1] ** 2


def trace(s) -> np.ndarray:
    s = as_sym(s)
    return s[..., 0] + s[..., 2]


def eig(s):
    """Return ``(lam_max, lam_min, cos2t, sin2t)``.

    For an isotropic matrix the angle is arbitrary and ``(1, 0)`` is returned.
    """
    s = as_sym(s)
    a, b, c = s[..., 0], s[..., 1], s[..., 2]
    m = 0.5 * (a + c)
    h = 0.5 * (a - c)
    r = np.hypot(h, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos2t = np.where(r > 0, h / np.where(r > 0, r, 1.0), 1.0)
        sin2t = np.where(r > 0, b / np.where(r > 0, r, 1.0), 0.0)
    return m + r, m - r, cos2t, sin2t


def from_eig(lam1, lam2, cos2t, sin2t) -> np.ndarray:
    m = 0.5 * (lam1 + lam2)
    r = 0.5 * (lam1 - lam2)
    return np.stack([m + r * cos2t, r * sin2t, m - r * cos2t], axis=-1)


def eigvals(s):
    lam1, lam2, _, _ = eig(s)
    return lam1, lam2


def spectral(s, fn) -> np.ndarray:
    """Apply the scalar function ``fn`` to the eigenvalues of ``s``."""
    lam1, lam2, c, sn = eig(s)
    return from_eig(fn(lam1), fn(lam2), c, sn)


def absolute(s) -> np.ndarray:
    """Matrix absolute value ``sqrt(S^T S)``."""
    return spectral(s, np.abs)


def log(s) -> np.ndarray:
    """Matrix logarithm of SPD matrices."""
    return spectral(s, np.log)


def exp(s) -> np.ndarray:
    """Matrix exponential of symmetric matrices."""
    return spectral(s, np.exp)


def power(s, p: float) -> np.ndarray:
    return spectral(s, lambda lam: np.power(lam, p))


def spectral_norm(s) -> np.ndarray:
    lam1, lam2 = eigvals(s)
    return np.maximum(np.abs(lam1), np.abs(lam2))


def quad(s, v) -> np.ndarray:
    """Quadratic form ``v^T S v`` for vectors on the last axis of ``v``."""
    s = as_sym(s)
    v = np.asarray(v, dtype=float)
    x, y = v[..., 0], v[..., 1]
    return s[..., 0] * x * x + 2.0 * s[..., 1] * x * y + s[..., 2] * y * y


def log_mean(s, weights=None, axis=0) -> np.ndarray:
    """Weighted log-Euclidean mean ``exp(sum w log S / sum w)``."""
    logs = log(s)
    if weights is None:
        return exp(np.mean(logs, axis=axis))
    w = np.asarray(weights, dtype=float)
    w = np.expand_dims(w, -1)
    return exp(np.sum(w * logs, axis=axis) / np.sum(w, axis=axis))
