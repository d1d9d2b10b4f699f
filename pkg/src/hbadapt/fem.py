"""Linear finite elements for diagonal-diffusion elliptic problems.

The weak form assembled for every problem is

    int D grad u . grad v + sum_Robin int alpha u v
        = sign * int f v + sum_Robin int g v,

where ``sign = +1`` for ``-div(D grad u) = f`` and ``sign = -1`` for
``div(D grad u) = f`` with flux condition ``D grad u . n = g - alpha u``.
Dirichlet data is imposed by nodal interpolation and symmetric elimination.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from hbadapt.errors import ConfigurationError, DimensionError, SolverError
from hbadapt.mesh import Mesh
from hbadapt.quadrature import (
    LINE3_POINTS,
    LINE3_WEIGHTS,
    TRI6_POINTS,
    TRI6_WEIGHTS,
    bubble_gradients,
    bubble_values,
    grad_barycentric,
    physical_points,
)

ScalarFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
DIRECT_LIMIT = 200_000
# iterate past the required 1e-10 when cheap, so that exactly representable
# solutions come out exact to rounding level
SOLVE_TARGET = 1e-13


@dataclass(frozen=True)
class Dirichlet:
    g: ScalarFn


@dataclass(frozen=True)
class Robin:
    """Flux condition ``D grad u . n = g - alpha u``; ``alpha = 0`` is a Neumann flux."""

    alpha: float
    g: Union[float, ScalarFn] = 0.0


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients, source and boundary data of one elliptic problem.

    ``diffusion`` maps region tag to the diagonal ``(D_x, D_y)`` or is a
    function ``(x, y) -> (D_x, D_y)``; ``source`` maps region tag to a constant
    or is a function ``(x, y) -> f``.  ``exact_hessian`` returns
    ``(u_xx, u_xy, u_yy)``.
    """

    name: str
    diffusion: Union[Mapping[int, tuple[float, float]], Callable]
    source: Union[Mapping[int, float], ScalarFn]
    boundary: Mapping[int, Union[Dirichlet, Robin]]
    source_sign: float = 1.0
    exact: ScalarFn | None = None
    exact_hessian: Callable | None = None
    description: str = ""
    extras: dict = field(default_factory=dict)

    def check(self, mesh: Mesh) -> None:
        if self.source_sign not in (1.0, -1.0):
            raise ConfigurationError("source_sign must be +1 or -1")
        if isinstance(self.diffusion, Mapping):
            missing = set(np.unique(mesh.regions).tolist()) - set(self.diffusion)
            if missing:
                raise ConfigurationError(f"no diffusion for region(s) {sorted(missing)}")
            for k, d in self.diffusion.items():
                if min(d) <= 0:
                    raise ConfigurationError(f"diffusion of region {k} must be positive, got {d}")
        if isinstance(self.source, Mapping):
            missing = set(np.unique(mesh.regions).tolist()) - set(self.source)
            if missing:
                raise ConfigurationError(f"no source for region(s) {sorted(missing)}")
        table = mesh.edge_table
        btags = set(table.tags[table.is_boundary].tolist())
        missing = btags - set(self.boundary)
        if missing:
            raise ConfigurationError(f"no boundary condition for side tag(s) {sorted(missing)}")
        for tag, bc in self.boundary.items():
            if isinstance(bc, Robin) and bc.alpha < 0:
                raise ConfigurationError(f"Robin alpha on side {tag} must be >= 0")


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Assembled system; Dirichlet rows and columns are replaced by identity."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dirichlet: np.ndarray
    dirichlet_values: np.ndarray
    full_matrix: sp.csr_matrix
    full_rhs: np.ndarray


# ------------------------------------------------------------------ coefficients

def diffusion_at(problem: ProblemSpec, mesh: Mesh, points: np.ndarray) -> np.ndarray:
    """Diagonal diffusion ``(D_x, D_y)`` at per-triangle points ``(nt, nq, 2)``."""
    nq = points.shape[1]
    if isinstance(problem.diffusion, Mapping):
        table = np.array([problem.diffusion[int(k)] for k in mesh.regions], dtype=float)
        return np.broadcast_to(table[:, None, :], (mesh.n_triangles, nq, 2))
    dx, dy = problem.diffusion(points[..., 0], points[..., 1])
    return np.stack(np.broadcast_arrays(np.asarray(dx, float), np.asarray(dy, float)), axis=-1)


def source_at(problem: ProblemSpec, mesh: Mesh, points: np.ndarray) -> np.ndarray:
    nq = points.shape[1]
    if isinstance(problem.source, Mapping):
        vals = np.array([problem.source[int(k)] for k in mesh.regions], dtype=float)
        return np.broadcast_to(vals[:, None], (mesh.n_triangles, nq))
    return np.broadcast_to(np.asarray(problem.source(points[..., 0], points[..., 1]), float), points.shape[:2])


def _boundary_data(problem: ProblemSpec, mesh: Mesh):
    """Robin edges ``(edge_ids, alpha, g at Gauss points)`` and Dirichlet vertex values."""
    table = mesh.edge_table
    bnd = np.flatnonzero(table.is_boundary)
    robin_ids, robin_alpha, robin_g = [], [], []
    dir_mask = np.zeros(mesh.n_vertices, dtype=bool)
    dir_vals = np.zeros(mesh.n_vertices)
    dir_edges = np.zeros(table.n_edges, dtype=bool)
    for tag in np.unique(table.tags[bnd]):
        bc = problem.boundary[int(tag)]
        ids = bnd[table.tags[bnd] == tag]
        if isinstance(bc, Dirichlet):
            verts = np.unique(table.edges[ids])
            dir_mask[verts] = True
            xy = mesh.vertices[verts]
            dir_vals[verts] = np.broadcast_to(np.asarray(bc.g(xy[:, 0], xy[:, 1]), float), len(verts))
            dir_edges[ids] = True
        else:
            p = mesh.vertices[table.edges[ids]]
            pts = p[:, None, 0, :] + LINE3_POINTS[None, :, None] * (p[:, None, 1, :] - p[:, None, 0, :])
            if callable(bc.g):
                g = np.broadcast_to(np.asarray(bc.g(pts[..., 0], pts[..., 1]), float), pts.shape[:2])
            else:
                g = np.full(pts.shape[:2], float(bc.g))
            robin_ids.append(ids)
            robin_alpha.append(np.full(len(ids), float(bc.alpha)))
            robin_g.append(g)
    if robin_ids:
        robin = (np.concatenate(robin_ids), np.concatenate(robin_alpha), np.concatenate(robin_g))
    else:
        robin = (np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros((0, 3)))
    return robin, dir_mask, dir_vals, dir_edges


# ---------------------------------------------------------------------- assembly

def _assemble_full(problem: ProblemSpec, mesh: Mesh):
    problem.check(mesh)
    nv = mesh.n_vertices
    area = mesh.areas
    grad = grad_barycentric(mesh)
    pts = physical_points(mesh)
    dmean = np.einsum("q,tqd->td", TRI6_WEIGHTS, diffusion_at(problem, mesh, pts))
    kloc = area[:, None, None] * np.einsum("tid,td,tjd->tij", grad, dmean, grad)
    f = source_at(problem, mesh, pts)
    bloc = problem.source_sign * area[:, None] * np.einsum("q,tq,qi->ti", TRI6_WEIGHTS, f, TRI6_POINTS)

    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    data = [kloc.ravel()]
    rr, cc = [rows], [cols]
    b = np.zeros(nv)
    np.add.at(b, mesh.triangles.ravel(), bloc.ravel())

    (rid, ralpha, rg), dir_mask, dir_vals, _ = _boundary_data(problem, mesh)
    if len(rid):
        ends = mesh.edge_table.edges[rid]
        length = np.linalg.norm(mesh.vertices[ends[:, 1]] - mesh.vertices[ends[:, 0]], axis=1)
        mass = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        eloc = (ralpha * length)[:, None, None] * mass
        rr.append(np.repeat(ends, 2, axis=1).ravel())
        cc.append(np.tile(ends, (1, 2)).ravel())
        data.append(eloc.ravel())
        shape = np.stack([1.0 - LINE3_POINTS, LINE3_POINTS], axis=1)
        gl = length[:, None] * np.einsum("q,eq,qi->ei", LINE3_WEIGHTS, rg, shape)
        np.add.at(b, ends.ravel(), gl.ravel())
    a = sp.coo_matrix((np.concatenate(data), (np.concatenate(rr), np.concatenate(cc))), shape=(nv, nv)).tocsr()
    a.sum_duplicates()
    return a, b, dir_mask, dir_vals


def assemble(problem: ProblemSpec, mesh: Mesh) -> SparseSystem:
    a_full, b_full, dir_mask, dir_vals = _assemble_full(problem, mesh)
    free = (~dir_mask).astype(float)
    p_free = sp.diags(free)
    rhs = b_full - a_full @ (dir_vals * dir_mask)
    rhs = np.where(dir_mask, dir_vals, rhs)
    matrix = (p_free @ a_full @ p_free + sp.diags(dir_mask.astype(float))).tocsr()
    matrix.eliminate_zeros()
    return SparseSystem(matrix, rhs, dir_mask, dir_vals, a_full, b_full)


# ------------------------------------------------------------------------ solve

def pcg(matrix, rhs: np.ndarray, rtol: float = 1e-10, maxiter: int | None = None):
    """Jacobi-preconditioned conjugate gradients from a zero start.

    Returns ``(x, relative_residual, iterations)``.  Raises ``SolverError`` on a
    non-positive curvature direction (matrix not positive definite).
    """
    n = len(rhs)
    diag = matrix.diagonal()
    if np.any(diag <= 0):
        raise SolverError("non-positive diagonal, matrix is not positive definite", np.nan, 0)
    inv_diag = 1.0 / diag
    bnorm = np.linalg.norm(rhs)
    x = np.zeros(n)
    if bnorm == 0:
        return x, 0.0, 0
    maxiter = maxiter or max(10 * n, 100)
    r = rhs.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for k in range(1, maxiter + 1):
        ap = matrix @ p
        curv = p @ ap
        if curv <= 0:
            raise SolverError("CG breakdown, matrix is not positive definite", np.linalg.norm(r) / bnorm, k)
        step = rz / curv
        x += step * p
        r -= step * ap
        res = np.linalg.norm(r) / bnorm
        if res <= rtol:
            return x, res, k
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, np.linalg.norm(rhs - matrix @ x) / bnorm, maxiter


def solve_spd(matrix, rhs: np.ndarray, rtol: float = 1e-10, maxiter: int | None = None,
              target: float | None = None) -> np.ndarray:
    """PCG with a sparse direct fallback for small systems.

    Iterates towards ``target`` (default ``rtol``) and accepts any result whose
    relative residual is at most ``rtol``.
    """
    target = rtol if target is None else min(target, rtol)
    x, res, its = pcg(matrix, rhs, rtol=target, maxiter=maxiter)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0:
        return x
    res = np.linalg.norm(rhs - matrix @ x) / bnorm
    if res <= target or len(rhs) > DIRECT_LIMIT:
        if res <= rtol:
            return x
        raise SolverError("conjugate gradients did not converge", res, its)
    xd = spla.spsolve(matrix.tocsc(), rhs)
    res_d = np.linalg.norm(rhs - matrix @ xd) / bnorm
    if np.isfinite(res_d) and res_d < res:
        x, res = xd, res_d
    if res > rtol:
        raise SolverError("direct fallback did not reach tolerance", res, its)
    return x


def solve_linear(system: SparseSystem, rtol: float = 1e-10) -> np.ndarray:
    return solve_spd(system.matrix, system.rhs, rtol=rtol, target=SOLVE_TARGET)


def solve(problem: ProblemSpec, mesh: Mesh) -> np.ndarray:
    """Assemble and solve; returns the nodal values of ``u_h``."""
    return solve_linear(assemble(problem, mesh))


# ---------------------------------------------------------------- post-process

def _check_nodal(u_h, mesh: Mesh) -> np.ndarray:
    u_h = np.asarray(u_h, dtype=float)
    if u_h.shape != (mesh.n_vertices,):
        raise DimensionError(f"nodal field has shape {u_h.shape}, mesh has {mesh.n_vertices} vertices")
    return u_h


def l2_norm_at_points(values: np.ndarray, mesh: Mesh) -> float:
    """L2 norm of a function given at the degree-4 points of every triangle."""
    return float(np.sqrt(np.sum(mesh.areas * (values ** 2 @ TRI6_WEIGHTS))))


def nodal_at_points(u_h: np.ndarray, mesh: Mesh) -> np.ndarray:
    return u_h[mesh.triangles] @ TRI6_POINTS.T


def l2_error(u_h, exact: ScalarFn, mesh: Mesh) -> float:
    u_h = _check_nodal(u_h, mesh)
    pts = physical_points(mesh)
    diff = nodal_at_points(u_h, mesh) - exact(pts[..., 0], pts[..., 1])
    return l2_norm_at_points(diff, mesh)


def bubble_residual(problem: ProblemSpec, mesh: Mesh, u_h) -> np.ndarray:
    """``F(phi_e) - a(u_h, phi_e)`` for the edge bubble of every edge (no elimination)."""
    u_h = _check_nodal(u_h, mesh)
    table = mesh.edge_table
    area = mesh.areas
    grad = grad_barycentric(mesh)
    pts = physical_points(mesh)
    dq = diffusion_at(problem, mesh, pts)
    f = source_at(problem, mesh, pts)
    bgrad = bubble_gradients(grad)
    bval = bubble_values()
    grad_u = np.einsum("ti,tid->td", u_h[mesh.triangles], grad)
    load = problem.source_sign * np.einsum("q,tq,qk->tk", TRI6_WEIGHTS, f, bval)
    coupling = np.einsum("q,td,tqd,tqkd->tk", TRI6_WEIGHTS, grad_u, dq, bgrad)
    loc = area[:, None] * (load - coupling)
    r = np.zeros(table.n_edges)
    np.add.at(r, table.tri_edges.ravel(), loc.ravel())

    (rid, ralpha, rg), _, _, _ = _boundary_data(problem, mesh)
    if len(rid):
        ends = table.edges[rid]
        length = np.linalg.norm(mesh.vertices[ends[:, 1]] - mesh.vertices[ends[:, 0]], axis=1)
        t = LINE3_POINTS
        bub = 4.0 * t * (1.0 - t)
        uq = u_h[ends[:, 0], None] * (1.0 - t) + u_h[ends[:, 1], None] * t
        r_edge = length * ((rg - ralpha[:, None] * uq) @ (LINE3_WEIGHTS * bub))
        np.add.at(r, rid, r_edge)
    return r


def energy_residual(u_h, problem: ProblemSpec, mesh: Mesh, nodal=None, bubble=None) -> float:
    """``F(w) - a(u_h, w)`` for ``w = sum nodal_i phi_i + sum bubble_e phi_e``."""
    u_h = _check_nodal(u_h, mesh)
    total = 0.0
    if nodal is not None:
        nodal = _check_nodal(nodal, mesh)
        a_full, b_full, _, _ = _assemble_full(problem, mesh)
        total += float(nodal @ (b_full - a_full @ u_h))
    if bubble is not None:
        bubble = np.asarray(bubble, dtype=float)
        if bubble.shape != (mesh.edge_table.n_edges,):
            raise DimensionError(f"bubble field has shape {bubble.shape}, mesh has {mesh.edge_table.n_edges} edges")
        total += float(bubble @ bubble_residual(problem, mesh, u_h))
    return total
