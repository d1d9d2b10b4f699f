"""Element Hessians ``H_K`` from bubble estimates, recovery of ``u_h``, or analytic data.

Every producer returns an ``(nt, 3)`` array of ``(h11, h12, h22)``.
"""

from __future__ import annotations

import logging

import numpy as np

from hbadapt.errors import ConfigurationError, DimensionError
from hbadapt.fem import ProblemSpec, _check_nodal
from hbadapt.mesh import Mesh
from hbadapt.quadrature import grad_barycentric

log = logging.getLogger(__name__)

QLS_MIN_POINTS = 6
QLS_MAX_RINGS = 3
QLS_MAX_COND = 1e8


def hessian_from_bubbles(z, mesh: Mesh) -> np.ndarray:
    """Exact (constant) Hessian of ``z_h = sum c_e 4 l_i l_j`` on every triangle."""
    table = mesh.edge_table
    z = np.asarray(z, dtype=float)
    if z.shape != (table.n_edges,):
        raise DimensionError(f"bubble field has shape {z.shape}, mesh has {table.n_edges} edges")
    g = grad_barycentric(mesh)
    c = z[table.tri_edges]
    h = np.zeros((mesh.n_triangles, 3))
    for k in range(3):
        gi, gj = g[:, (k + 1) % 3], g[:, (k + 2) % 3]
        w = 4.0 * c[:, k]
        h[:, 0] += w * 2.0 * gi[:, 0] * gj[:, 0]
        h[:, 1] += w * (gi[:, 0] * gj[:, 1] + gi[:, 1] * gj[:, 0])
        h[:, 2] += w * 2.0 * gi[:, 1] * gj[:, 1]
    return h


def vertex_to_element(vertex_values: np.ndarray, mesh: Mesh) -> np.ndarray:
    return vertex_values[mesh.triangles].mean(axis=1)


def _neighbours(mesh: Mesh) -> list[np.ndarray]:
    table = mesh.edge_table
    out = []
    for v in range(mesh.n_vertices):
        ends = table.edges[table.vertex_edges(v)]
        out.append(np.where(ends[:, 0] == v, ends[:, 1], ends[:, 0]))
    return out


def _qls_fit(center, pts, vals):
    d = pts - center
    scale = np.abs(d).max()
    if scale == 0:
        return None
    x, y = d[:, 0] / scale, d[:, 1] / scale
    vand = np.column_stack([np.ones_like(x), x, y, x * x, x * y, y * y])
    sv = np.linalg.svd(vand, compute_uv=False)
    if sv[-1] == 0 or (sv[0] / sv[-1]) ** 2 >= QLS_MAX_COND:
        return None
    coef, *_ = np.linalg.lstsq(vand, vals, rcond=None)
    s2 = scale * scale
    return np.array([2.0 * coef[3], coef[4], 2.0 * coef[5]]) / s2


def recover_qls_vertices(u_h, mesh: Mesh, diagnostics: dict | None = None) -> np.ndarray:
    """Quadratic least-squares fit on vertex patches grown ring by ring."""
    u_h = _check_nodal(u_h, mesh)
    if mesh.n_vertices < QLS_MIN_POINTS:
        raise ConfigurationError("quadratic fitting needs at least 6 vertices")
    nbrs = _neighbours(mesh)
    out = np.zeros((mesh.n_vertices, 3))
    fallbacks = 0
    for v in range(mesh.n_vertices):
        patch = {v}
        frontier = [v]
        fit = None
        for _ in range(QLS_MAX_RINGS):
            nxt = []
            for w in frontier:
                for n in nbrs[w]:
                    if n not in patch:
                        patch.add(int(n))
                        nxt.append(int(n))
            frontier = nxt
            if len(patch) < QLS_MIN_POINTS:
                continue
            idx = np.fromiter(sorted(patch), dtype=np.int64)
            fit = _qls_fit(mesh.vertices[v], mesh.vertices[idx], u_h[idx])
            if fit is not None:
                break
        if fit is None:
            fallbacks += 1
        else:
            out[v] = fit
    if fallbacks:
        log.warning("quadratic fitting fell back to a zero Hessian at %d vertices", fallbacks)
    if diagnostics is not None:
        diagnostics["fallbacks"] = fallbacks
    return out


def recover_qls(u_h, mesh: Mesh, diagnostics: dict | None = None) -> np.ndarray:
    return vertex_to_element(recover_qls_vertices(u_h, mesh, diagnostics), mesh)


def recover_variational_vertices(u_h, mesh: Mesh) -> np.ndarray:
    """Weak second derivatives divided by the lumped mass ``int phi_i``."""
    u_h = _check_nodal(u_h, mesh)
    g = grad_barycentric(mesh)
    area = mesh.areas
    gu = np.einsum("ti,tid->td", u_h[mesh.triangles], g)
    contrib = np.empty((mesh.n_triangles, 3, 3))
    contrib[:, :, 0] = -area[:, None] * gu[:, None, 0] * g[:, :, 0]
    contrib[:, :, 1] = -0.5 * area[:, None] * (gu[:, None, 0] * g[:, :, 1] + gu[:, None, 1] * g[:, :, 0])
    contrib[:, :, 2] = -area[:, None] * gu[:, None, 1] * g[:, :, 1]
    acc = np.zeros((mesh.n_vertices, 3))
    np.add.at(acc, mesh.triangles.ravel(), contrib.reshape(-1, 3))
    mass = np.zeros(mesh.n_vertices)
    np.add.at(mass, mesh.triangles.ravel(), np.repeat(area / 3.0, 3))
    return acc / mass[:, None]


def recover_variational(u_h, mesh: Mesh) -> np.ndarray:
    return vertex_to_element(recover_variational_vertices(u_h, mesh), mesh)


def exact_hessian(problem: ProblemSpec, mesh: Mesh) -> np.ndarray:
    """Analytic Hessian sampled at the triangle barycentres."""
    if problem.exact_hessian is None:
        raise ConfigurationError(f"problem {problem.name!r} has no analytic Hessian")
    c = mesh.centroids
    hxx, hxy, hyy = problem.exact_hessian(c[:, 0], c[:, 1])
    return np.stack([np.broadcast_to(np.asarray(h, dtype=float), len(c)) for h in (hxx, hxy, hyy)], axis=-1)
