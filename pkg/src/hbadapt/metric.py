"""Optimal metric tensors from element Hessians, and mesh quality against a metric.

Formulas are written for a general dimension ``d`` and L^q norm index ``q``;
the stored tensors are 2x2 so only ``d = 2`` produces meaningful fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hbadapt import sym2
from hbadapt.errors import DimensionError, HbAdaptError, MeshParseError
from hbadapt.mesh import Mesh, jacobians


class ZeroHessian(HbAdaptError):
    """All element Hessians vanish; there is nothing to adapt to (use ``M = I``)."""


@dataclass(frozen=True, eq=False)
class MetricField:
    """Per-triangle SPD tensors ``(m11, m12, m22)`` and the scalars used to build them."""

    tensors: np.ndarray
    alpha: float = math.nan
    sigma: float = math.nan
    n_target: float | None = None
    normalized: bool = False
    q: float = 2.0
    d: int = 2

    def __post_init__(self):
        t = sym2.as_sym(self.tensors)
        lam1, lam2 = sym2.eigvals(t)
        if not (np.all(t[:, 0] > 0) and np.all(lam2 > 0)):
            raise ValueError("metric tensors must be symmetric positive definite")
        t = np.array(t)
        t.setflags(write=False)
        object.__setattr__(self, "tensors", t)


@dataclass(frozen=True)
class QualityReport:
    q_ali: np.ndarray
    q_eq: np.ndarray
    q_mesh: float
    max_aspect_ratio: float
    sigma: float
    alpha: float = math.nan

    @property
    def mean_q_eq(self) -> float:
        return float(np.mean(self.q_eq))


def matrix_abs(h) -> np.ndarray:
    """``|H| = sqrt(H^T H)`` for symmetric 2x2 input (packed or full)."""
    h = np.asarray(h, dtype=float)
    if h.shape[-2:] == (2, 2):
        return sym2.to_matrix(sym2.absolute(sym2.from_matrix(h)))
    return sym2.absolute(h)


def _exponent(q: float, d: int) -> float:
    return q / (d + 2.0 * q)


def _abs_eigs(hessians):
    lam1, lam2 = sym2.eigvals(sym2.as_sym(hessians))
    return np.abs(lam1), np.abs(lam2)


def alpha_rhs(domain_area: float, q: float = 2.0, d: int = 2) -> float:
    return 2.0 ** max(1.0, d * q / (d + 2.0 * q)) * domain_area


def alpha_lhs(hessians, areas, alpha: float, q: float = 2.0, d: int = 2) -> float:
    """``sum |K| det(I + |H_K| / alpha)^(q/(d+2q))``; strictly decreasing in alpha."""
    a1, a2 = _abs_eigs(hessians)
    e = _exponent(q, d)
    return float(np.sum(areas * ((1.0 + a1 / alpha) * (1.0 + a2 / alpha)) ** e))


def alpha_bounds(hessians, areas, q: float = 2.0, d: int = 2) -> tuple[float, float]:
    """Analytic bracket ``(lower, upper)`` for the solution of the alpha equation."""
    a1, a2 = _abs_eigs(hessians)
    areas = np.asarray(areas, dtype=float)
    omega = float(areas.sum())
    e = _exponent(q, d)
    p = d * q / (d + 2.0 * q)
    det_term = float(np.sum(areas * (a1 * a2) ** e))
    norm_term = float(np.sum(areas * np.maximum(a1, a2) ** p))
    factor = 2.0 ** (max(2.0, p + 1.0) - e) - 1.0
    lower = (det_term / (factor * omega)) ** (1.0 / p)
    upper = (norm_term / omega) ** (1.0 / p)
    return lower, upper


def solve_alpha(hessians, mesh: Mesh, q: float = 2.0, d: int = 2, zero_tol: float = 0.0) -> float:
    """Bisection for the regularisation parameter ``alpha_h``.

    Raises ``ZeroHessian`` when every ``|H_K|`` has spectral norm ``<= zero_tol``.
    """
    hessians = sym2.as_sym(hessians)
    if len(hessians) != mesh.n_triangles:
        raise DimensionError("one Hessian per triangle is required")
    if not np.any(sym2.spectral_norm(hessians) > zero_tol):
        raise ZeroHessian("all element Hessians vanish")
    areas = mesh.areas
    rhs = alpha_rhs(float(areas.sum()), q, d)
    lo, hi = alpha_bounds(hessians, areas, q, d)
    if lo <= 0.0:
        lo = hi
        while alpha_lhs(hessians, areas, lo, q, d) < rhs:
            lo *= 0.5
    # guard against rounding at the bracket ends
    while alpha_lhs(hessians, areas, lo, q, d) < rhs:
        lo *= 1.0 - 1e-12
    while alpha_lhs(hessians, areas, hi, q, d) > rhs:
        hi *= 1.0 + 1e-12
    llo, lhi = math.log(lo), math.log(hi)
    mid = 0.5 * (llo + lhi)
    for _ in range(200):
        mid = 0.5 * (llo + lhi)
        val = alpha_lhs(hessians, areas, math.exp(mid), q, d)
        if abs(val - rhs) < 1e-10 * rhs:
            break
        if val > rhs:
            llo = mid
        else:
            lhi = mid
        if lhi - llo < 1e-15:
            break
    return math.exp(mid)


def metric_from_hessian(hessians, alpha: float, q: float = 2.0, d: int = 2) -> MetricField:
    """``M_K = det(I + |H_K|/alpha)^(-1/(d+2q)) (I + |H_K|/alpha)``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    lam1, lam2, c, s = sym2.eig(sym2.as_sym(hessians))
    b1 = 1.0 + np.abs(lam1) / alpha
    b2 = 1.0 + np.abs(lam2) / alpha
    scale = (b1 * b2) ** (-1.0 / (d + 2.0 * q))
    # eigenvectors of |H| coincide with those of H; eigenvalue order may swap
    tensors = sym2.from_eig(scale * b1, scale * b2, c, s)
    return MetricField(tensors, alpha=alpha, q=q, d=d)


def uniform_metric(n: int, q: float = 2.0, d: int = 2) -> MetricField:
    return MetricField(sym2.identity(n), alpha=math.inf, q=q, d=d)


def sqrt_det(tensors) -> np.ndarray:
    """``sqrt(det M)`` from the eigenvalues, avoiding cancellation in ``ac - b^2``."""
    lam1, lam2 = sym2.eigvals(sym2.as_sym(tensors))
    return np.sqrt(np.maximum(lam1, 0.0)) * np.sqrt(np.maximum(lam2, 0.0))


def metric_volume(tensors, mesh: Mesh) -> float:
    """``sigma_h = sum |K| sqrt(det M_K)``."""
    return float(np.sum(mesh.areas * sqrt_det(tensors)))


def normalize_metric(metric: MetricField, n_target: float, mesh: Mesh) -> MetricField:
    """Scale so that the total metric volume equals ``n_target``."""
    sigma = metric_volume(metric.tensors, mesh)
    factor = (sigma / n_target) ** (-2.0 / metric.d)
    return MetricField(factor * metric.tensors, alpha=metric.alpha, sigma=sigma, n_target=n_target,
                       normalized=True, q=metric.q, d=metric.d)


def element_to_vertex(metric, mesh: Mesh) -> np.ndarray:
    """Area-weighted log-Euclidean mean of the incident element tensors at each vertex."""
    tensors = metric.tensors if isinstance(metric, MetricField) else sym2.as_sym(metric)
    logs = sym2.log(tensors)
    w = mesh.areas
    acc = np.zeros((mesh.n_vertices, 3))
    wsum = np.zeros(mesh.n_vertices)
    np.add.at(acc, mesh.triangles.ravel(), np.repeat(w[:, None] * logs, 3, axis=0))
    np.add.at(wsum, mesh.triangles.ravel(), np.repeat(w, 3))
    return sym2.exp(acc / wsum[:, None])


def vertex_to_element_metric(vertex_metric, mesh: Mesh) -> np.ndarray:
    """Log-Euclidean mean of the three vertex tensors of every triangle."""
    logs = sym2.log(sym2.as_sym(vertex_metric))
    return sym2.exp(logs[mesh.triangles].mean(axis=1))


def aspect_ratios(mesh: Mesh) -> np.ndarray:
    """Longest edge divided by shortest altitude (``2/sqrt(3)`` for equilateral triangles)."""
    p = mesh.vertices[mesh.triangles]
    l2 = np.stack([np.sum((p[:, (k + 1) % 3] - p[:, (k + 2) % 3]) ** 2, axis=1) for k in range(3)], axis=1)
    return l2.max(axis=1) / (2.0 * mesh.areas)


def alignment_quality(mesh: Mesh, tensors, d: int = 2) -> np.ndarray:
    f = jacobians(mesh)
    m = sym2.to_matrix(tensors)
    p = np.einsum("tji,tjk,tkl->til", f, m, f)
    tr = np.trace(p, axis1=1, axis2=2)
    det = np.linalg.det(p)
    return (tr / (d * det ** (1.0 / d))) ** (d / (2.0 * (d - 1)))


def quality(mesh: Mesh, metric, q: float = 2.0, d: int = 2) -> QualityReport:
    """Alignment, equidistribution and overall quality of ``mesh`` in ``metric`` (one tensor per triangle)."""
    tensors = metric.tensors if isinstance(metric, MetricField) else sym2.as_sym(metric)
    alpha = metric.alpha if isinstance(metric, MetricField) else math.nan
    if len(tensors) != mesh.n_triangles:
        raise DimensionError("quality needs one metric tensor per triangle")
    q_ali = alignment_quality(mesh, tensors, d)
    vol = mesh.areas * sqrt_det(tensors)
    sigma = float(vol.sum())
    n = mesh.n_triangles
    q_eq = n * vol / sigma
    q_mesh = (np.sum(vol * q_ali ** q * q_eq ** (2.0 * q / d)) / sigma) ** (1.0 / q)
    return QualityReport(q_ali, q_eq, float(q_mesh), float(aspect_ratios(mesh).max()), sigma, alpha)


# ------------------------------------------------------------- bound functionals

def interpolation_functional(mesh: Mesh, hessians, q: float = 2.0) -> float:
    """``sum |K| tr(F'^T |H_K| F')^q``."""
    f = jacobians(mesh)
    habs = sym2.to_matrix(sym2.absolute(sym2.as_sym(hessians)))
    tr = np.trace(np.einsum("tji,tjk,tkl->til", f, habs, f), axis1=1, axis2=2)
    return float(np.sum(mesh.areas * tr ** q))


def interpolation_lower_bound(mesh: Mesh, hessians, q: float = 2.0, d: int = 2) -> float:
    """``d^q N^(-2q/d) (sum |K| det|H_K|^(q/(d+2q)))^((d+2q)/d)``."""
    a1, a2 = _abs_eigs(hessians)
    s = float(np.sum(mesh.areas * (a1 * a2) ** _exponent(q, d)))
    return d ** q * mesh.n_triangles ** (-2.0 * q / d) * s ** ((d + 2.0 * q) / d)


# -------------------------------------------------------------------------- I/O

def write_vertex_metric(path, vertex_metric) -> None:
    vm = sym2.as_sym(vertex_metric)
    lines = [f"{len(vm)} 3"] + [f"{a:.17g} {b:.17g} {c:.17g}" for a, b, c in vm]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vertex_metric(path) -> np.ndarray:
    rows = [(i, ln.split()) for i, ln in enumerate(Path(path).read_text().splitlines(), start=1) if ln.strip()]
    if not rows:
        raise MeshParseError("empty metric file", 1)
    line, head = rows[0]
    try:
        count = int(head[0])
    except ValueError:
        raise MeshParseError(f"bad count {head[0]!r}", line) from None
    if len(rows) - 1 != count:
        raise MeshParseError(f"expected {count} tensors, found {len(rows) - 1}", line)
    out = np.empty((count, 3))
    for k, (ln, toks) in enumerate(rows[1:]):
        if len(toks) != 3:
            raise MeshParseError("expected three values m11 m12 m22", ln)
        try:
            out[k] = [float(t) for t in toks]
        except ValueError:
            raise MeshParseError("non-numeric metric entry", ln) from None
    return out
