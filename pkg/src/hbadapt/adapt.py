"""The solve / estimate / metric / remesh loop."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hbadapt import estimator as est
from hbadapt import hessian as hes
from hbadapt import metric as met
from hbadapt.errors import ConfigurationError, HbAdaptError
from hbadapt.fem import ProblemSpec, l2_error, solve
from hbadapt.mesh import Mesh
from hbadapt.remesh import RemeshConfig, adapt_mesh

log = logging.getLogger(__name__)

HESSIAN_SOURCES = ("estimator", "qls", "variational", "exact")
# Hessians below this fraction of the solution scale (relative to mesh size) count as zero
ZERO_HESSIAN_RTOL = 1e-9


@dataclass(frozen=True)
class AdaptConfig:
    """Settings of one adaptive run.

    ``hessian="estimator"`` takes the Hessian from the bubble estimate
    computed with ``estimator``; the other sources ignore ``estimator`` for
    driving but still report the exact-solve estimate.
    """

    estimator: str = "full-gs"
    hessian: str = "estimator"
    n_target: float = 600.0
    gs_rtol: float = est.DEFAULT_GS_RTOL
    gs_max_sweeps: int = est.DEFAULT_GS_MAX_SWEEPS
    eps_mesh: float = 0.1
    max_iter: int = 25
    q: float = 2.0
    out: Path | None = None
    remesh: RemeshConfig = field(default_factory=RemeshConfig)

    def __post_init__(self):
        if self.estimator not in est.SOLVERS:
            raise ConfigurationError(f"unknown estimator {self.estimator!r}; choose from {', '.join(est.SOLVERS)}")
        if self.hessian not in HESSIAN_SOURCES:
            raise ConfigurationError(f"unknown hessian source {self.hessian!r}; choose from {', '.join(HESSIAN_SOURCES)}")
        if not self.eps_mesh > 0:
            raise ConfigurationError("eps_mesh must be positive")
        if not self.n_target >= 50:
            raise ConfigurationError("n_target must be at least 50")
        if self.max_iter < 0:
            raise ConfigurationError("max_iter must be non-negative")
        if not self.q >= 1:
            raise ConfigurationError("q must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    n_vertices: int
    n_triangles: int
    l2_error: float
    estimate_l2: float
    alpha: float
    q_mesh: float
    max_aspect_ratio: float
    gs_sweeps: int
    wall_time: float


@dataclass
class AdaptHistory:
    """Record 0 is the initial mesh; record ``i`` is the mesh after ``i`` remeshes."""

    records: list[IterationRecord] = field(default_factory=list)

    @property
    def adaptation(self) -> list[IterationRecord]:
        return self.records[1:]

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def write_csv(self, path) -> None:
        write_records(path, self.records)


def write_records(path, records) -> None:
    names = [f.name for f in dataclasses.fields(IterationRecord)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for r in records:
            w.writerow([_fmt(getattr(r, n)) for n in names])


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


@dataclass
class AdaptResult:
    history: AdaptHistory
    mesh: Mesh
    u_h: np.ndarray
    z: np.ndarray
    metric: np.ndarray | None = None  # vertex metric that produced ``mesh``


def element_hessians(problem: ProblemSpec, mesh: Mesh, u_h, z, hessian: str) -> np.ndarray:
    if hessian == "estimator":
        return hes.hessian_from_bubbles(z, mesh)
    if hessian == "qls":
        return hes.recover_qls(u_h, mesh)
    if hessian == "variational":
        return hes.recover_variational(u_h, mesh)
    return hes.exact_hessian(problem, mesh)


def metric_for(hessians, mesh: Mesh, u_h, n_target: float, q: float = 2.0) -> met.MetricField:
    """Normalized optimal metric, or the uniform metric when the Hessian is negligible."""
    scale = max(float(np.abs(u_h).max()), 1e-300)
    zero_tol = ZERO_HESSIAN_RTOL * scale / mesh.diameter ** 2
    try:
        alpha = met.solve_alpha(hessians, mesh, q=q, zero_tol=zero_tol)
        m = met.metric_from_hessian(hessians, alpha, q=q)
    except met.ZeroHessian:
        log.info("Hessian vanishes; using the uniform metric")
        m = met.uniform_metric(mesh.n_triangles, q=q)
    return met.normalize_metric(m, n_target, mesh)


def adaptive_loop(problem: ProblemSpec, mesh: Mesh, cfg: AdaptConfig | None = None) -> AdaptResult:
    """Run the adaptive loop from ``mesh`` until the mesh quality target or the iteration cap.

    Every record describes one mesh: its solution, error, estimate, and the
    quality of that mesh measured in the metric computed from its own
    solution.  The loop stops when that quality reaches ``1 + eps_mesh``,
    i.e. when remeshing would no longer change much, or after ``max_iter``
    remeshes.
    """
    cfg = cfg or AdaptConfig()
    history = AdaptHistory()
    vmetric = None
    it = 0
    while True:
        t0 = time.perf_counter()
        try:
            u_h = solve(problem, mesh)
            z_drive, sweeps, ep = est.estimate(problem, mesh, u_h, cfg.estimator, cfg.gs_rtol, cfg.gs_max_sweeps)
            z_exact = z_drive if cfg.estimator == "full-exact" else est.solve_full_exact(ep)
            h = element_hessians(problem, mesh, u_h, z_drive, cfg.hessian)
            metric = metric_for(h, mesh, u_h, cfg.n_target, cfg.q)
            report = met.quality(mesh, metric, q=cfg.q)
        except HbAdaptError as exc:
            raise _at_iteration(exc, it)
        err = l2_error(u_h, problem.exact, mesh) if problem.exact is not None else math.nan
        done = it >= cfg.max_iter or report.q_mesh <= 1.0 + cfg.eps_mesh
        if not done:
            try:
                vmetric_new = met.element_to_vertex(metric, mesh)
                new_mesh = adapt_mesh(mesh, vmetric_new, cfg.remesh)
            except HbAdaptError as exc:
                raise _at_iteration(exc, it)
        history.records.append(IterationRecord(
            iteration=it, n_vertices=mesh.n_vertices, n_triangles=mesh.n_triangles, l2_error=err,
            estimate_l2=est.estimate_l2(z_exact, mesh), alpha=metric.alpha, q_mesh=report.q_mesh,
            max_aspect_ratio=report.max_aspect_ratio, gs_sweeps=sweeps, wall_time=time.perf_counter() - t0))
        log.info("iteration %d: %d triangles, error %.3e, estimate %.3e, Q_mesh %.3f",
                 it, mesh.n_triangles, err, history.final.estimate_l2, report.q_mesh)
        if done:
            break
        mesh, vmetric = new_mesh, vmetric_new
        it += 1
    return AdaptResult(history, mesh, u_h, z_exact, vmetric)


def _at_iteration(exc: HbAdaptError, it: int) -> HbAdaptError:
    exc.iteration = it
    exc.args = (f"iteration {it}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
    return exc
