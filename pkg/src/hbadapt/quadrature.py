"""Quadrature rules and per-element geometric factors for linear triangles."""

from __future__ import annotations

import numpy as np

from hbadapt.mesh import Mesh


def _sym_points(rows):
    pts, wts = [], []
    for (a, b), w in rows:
        c = 1.0 - a - b
        for p in ((a, b, c), (b, c, a), (c, a, b)):
            pts.append(p)
            wts.append(w)
    return np.array(pts), np.array(wts)


# Degree-2 rule, 3 interior points (weights relative to |K|).
TRI3_POINTS = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
TRI3_WEIGHTS = np.full(3, 1 / 3)

# Degree-4 rule, 6 points (Dunavant).
TRI6_POINTS, TRI6_WEIGHTS = _sym_points([
    ((0.445948490915965, 0.445948490915965), 0.223381589678011),
    ((0.091576213509771, 0.091576213509771), 0.109951743655322),
])
TRI6_WEIGHTS = TRI6_WEIGHTS / TRI6_WEIGHTS.sum()

# Gauss-Legendre on [0, 1], exact to degree 5.
_g = np.sqrt(3 / 5)
LINE3_POINTS = 0.5 * (1 + np.array([-_g, 0.0, _g]))
LINE3_WEIGHTS = np.array([5 / 18, 8 / 18, 5 / 18])


def grad_barycentric(mesh: Mesh) -> np.ndarray:
    """Gradients of the three barycentric coordinates on every triangle, ``(nt, 3, 2)``."""
    p = mesh.vertices[mesh.triangles]
    twice_area = 2.0 * mesh.signed_areas
    g = np.empty((mesh.n_triangles, 3, 2))
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        g[:, k, 0] = (p[:, i, 1] - p[:, j, 1]) / twice_area
        g[:, k, 1] = (p[:, j, 0] - p[:, i, 0]) / twice_area
    return g


def physical_points(mesh: Mesh, bary: np.ndarray = TRI6_POINTS) -> np.ndarray:
    """Quadrature points mapped to every triangle, ``(nt, nq, 2)``."""
    p = mesh.vertices[mesh.triangles]
    return np.einsum("qk,tkd->tqd", bary, p)


def bubble_values(bary: np.ndarray = TRI6_POINTS) -> np.ndarray:
    """Edge bubbles ``4 l_i l_j`` at the points, indexed by local edge, ``(nq, 3)``."""
    lam = bary
    return 4.0 * np.stack([lam[:, 1] * lam[:, 2], lam[:, 2] * lam[:, 0], lam[:, 0] * lam[:, 1]], axis=1)


def bubble_gradients(grad_lam: np.ndarray, bary: np.ndarray = TRI6_POINTS) -> np.ndarray:
    """Gradients of the three edge bubbles at the points, ``(nt, nq, 3, 2)``."""
    lam = bary
    out = np.empty((grad_lam.shape[0], lam.shape[0], 3, 2))
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        out[:, :, k, :] = 4.0 * (
            lam[None, :, i, None] * grad_lam[:, None, j, :] + lam[None, :, j, None] * grad_lam[:, None, i, :]
        )
    return out
