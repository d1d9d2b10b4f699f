"""Hierarchical edge-bubble error estimator.

The estimate ``z_h`` lives in the span of the quadratic edge bubbles
``4 l_i l_j`` and solves ``a(z_h, w) = F(w) - a(u_h, w)`` for all bubbles
``w``.  Four ways of solving that system are provided, from the diagonal
(edge-based) approximation up to the exact solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from hbadapt.errors import DimensionError, SolverError
from hbadapt.fem import (
    ProblemSpec,
    _boundary_data,
    _check_nodal,
    bubble_residual,
    diffusion_at,
    l2_norm_at_points,
    nodal_at_points,
    solve_spd,
)
from hbadapt.mesh import Mesh
from hbadapt.quadrature import TRI6_WEIGHTS, bubble_gradients, bubble_values, grad_barycentric, physical_points

DEFAULT_GS_RTOL = 0.01
DEFAULT_GS_MAX_SWEEPS = 30


@dataclass(frozen=True, eq=False)
class ErrorProblem:
    """Bubble stiffness matrix and residual; Dirichlet edges carry identity rows and zero residual."""

    matrix: sp.csr_matrix
    residual: np.ndarray
    free: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.residual)

    def scaled(self, c: float) -> ErrorProblem:
        return ErrorProblem(self.matrix, c * self.residual, self.free)


def bubble_stiffness(problem: ProblemSpec, mesh: Mesh) -> sp.csr_matrix:
    """``a(phi_e, phi_f)`` over all edge pairs, including Robin boundary terms."""
    table = mesh.edge_table
    grad = grad_barycentric(mesh)
    dq = diffusion_at(problem, mesh, physical_points(mesh))
    bgrad = bubble_gradients(grad)
    loc = mesh.areas[:, None, None] * np.einsum("q,tqd,tqkd,tqld->tkl", TRI6_WEIGHTS, dq, bgrad, bgrad)
    te = table.tri_edges
    rows = [np.repeat(te, 3, axis=1).ravel()]
    cols = [np.tile(te, (1, 3)).ravel()]
    data = [loc.ravel()]
    (rid, ralpha, _), _, _, _ = _boundary_data(problem, mesh)
    if len(rid):
        ends = table.edges[rid]
        length = np.linalg.norm(mesh.vertices[ends[:, 1]] - mesh.vertices[ends[:, 0]], axis=1)
        rows.append(rid)
        cols.append(rid)
        data.append(ralpha * length * 8.0 / 15.0)
    n = table.n_edges
    a = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()
    a.sum_duplicates()
    return a


def assemble_error_problem(problem: ProblemSpec, mesh: Mesh, u_h) -> ErrorProblem:
    u_h = _check_nodal(u_h, mesh)
    a = bubble_stiffness(problem, mesh)
    r = bubble_residual(problem, mesh, u_h)
    _, _, _, dir_edges = _boundary_data(problem, mesh)
    free = ~dir_edges
    pf = sp.diags(free.astype(float))
    matrix = (pf @ a @ pf + sp.diags(dir_edges.astype(float))).tocsr()
    matrix.eliminate_zeros()
    return ErrorProblem(matrix, np.where(free, r, 0.0), free)


def _diagonal(ep: ErrorProblem) -> np.ndarray:
    diag = ep.matrix.diagonal()
    if np.any(diag <= 0):
        raise SolverError("bubble stiffness has a non-positive diagonal entry", np.nan, 0)
    return diag


def solve_edge_based(ep: ErrorProblem) -> np.ndarray:
    """One Jacobi step from zero: local two-element problems per edge."""
    return ep.residual / _diagonal(ep)


def solve_node_based(ep: ErrorProblem, mesh: Mesh) -> np.ndarray:
    """Local problems on vertex patches with homogeneous Dirichlet data on the patch boundary.

    Each edge belongs to the patches of both its endpoints; its final value is
    the mean of the patch solutions it receives.
    """
    table = mesh.edge_table
    if table.n_edges != ep.n_edges:
        raise DimensionError("error problem does not match mesh edges")
    a = ep.matrix.tocsr()
    total = np.zeros(ep.n_edges)
    count = np.zeros(ep.n_edges)
    for v in range(mesh.n_vertices):
        edges = table.vertex_edges(v)
        edges = edges[ep.free[edges]]
        if len(edges) == 0:
            continue
        sub = a[edges][:, edges].toarray()
        rhs = ep.residual[edges]
        try:
            chol = np.linalg.cholesky(sub)
        except np.linalg.LinAlgError:
            raise SolverError(f"patch matrix of vertex {v} is not positive definite", np.nan, 0) from None
        local = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        total[edges] += local
        count[edges] += 1
    return np.where(count > 0, total / np.maximum(count, 1), 0.0)


def solve_full_gs(ep: ErrorProblem, rtol: float = DEFAULT_GS_RTOL, max_sweeps: int = DEFAULT_GS_MAX_SWEEPS):
    """Symmetric Gauss-Seidel from zero, edges in index order.

    Stops once ``||z_new - z_old|| / ||z_new|| < rtol`` or after ``max_sweeps``
    sweeps; an iterate that stays exactly zero counts as converged.
    Returns ``(z, sweeps)``.
    """
    if rtol <= 0:
        raise ValueError("rtol must be positive")
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    _diagonal(ep)
    a = ep.matrix.tocsr()
    lower = sp.tril(a, format="csr")
    upper = sp.triu(a, format="csr")
    strict_lower = sp.tril(a, k=-1, format="csr")
    strict_upper = sp.triu(a, k=1, format="csr")
    r = ep.residual
    z = np.zeros(ep.n_edges)
    for sweep in range(1, max_sweeps + 1):
        old = z
        half = spsolve_triangular(lower, r - strict_upper @ z, lower=True)
        z = spsolve_triangular(upper, r - strict_lower @ half, lower=False)
        znorm = np.linalg.norm(z)
        if znorm == 0.0 or np.linalg.norm(z - old) / znorm < rtol:
            return z, sweep
    return z, max_sweeps


def solve_full_exact(ep: ErrorProblem) -> np.ndarray:
    return solve_spd(ep.matrix, ep.residual, rtol=1e-10)


def bubbles_at_points(z, mesh: Mesh) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (mesh.edge_table.n_edges,):
        raise DimensionError(f"bubble field has shape {z.shape}, mesh has {mesh.edge_table.n_edges} edges")
    return z[mesh.edge_table.tri_edges] @ bubble_values().T


def estimate_l2(z, mesh: Mesh) -> float:
    """L2 norm of the piecewise-quadratic bubble function ``z_h``."""
    return l2_norm_at_points(bubbles_at_points(z, mesh), mesh)


def effectivity(z, u_h, exact, mesh: Mesh, floor: float = 1e-14):
    """``(||z_h|| / ||u - u_h||, ||u_h + z_h - u|| / ||u_h - u||)``.

    Both ratios are NaN when the true error is below ``floor``.
    """
    u_h = _check_nodal(u_h, mesh)
    pts = physical_points(mesh)
    uq = exact(pts[..., 0], pts[..., 1])
    uhq = nodal_at_points(u_h, mesh)
    zq = bubbles_at_points(z, mesh)
    err = l2_norm_at_points(uhq - uq, mesh)
    if err < floor:
        return math.nan, math.nan
    est = l2_norm_at_points(zq, mesh)
    recon = l2_norm_at_points(uhq + zq - uq, mesh)
    return est / err, recon / err


SOLVERS = ("edge", "node", "full-gs", "full-exact")


def estimate(problem: ProblemSpec, mesh: Mesh, u_h, method: str = "full-gs",
             gs_rtol: float = DEFAULT_GS_RTOL, gs_max_sweeps: int = DEFAULT_GS_MAX_SWEEPS):
    """Assemble and solve the error problem with ``method``; returns ``(z, sweeps, error_problem)``."""
    ep = assemble_error_problem(problem, mesh, u_h)
    sweeps = 0
    if method == "edge":
        z = solve_edge_based(ep)
    elif method == "node":
        z = solve_node_based(ep, mesh)
    elif method == "full-gs":
        z, sweeps = solve_full_gs(ep, gs_rtol, gs_max_sweeps)
    elif method == "full-exact":
        z = solve_full_exact(ep)
    else:
        raise ValueError(f"unknown estimator {method!r}; choose from {', '.join(SOLVERS)}")
    return z, sweeps, ep
