"""Benchmark problems with their initial meshes.

Unit-square problems use Dirichlet data from the exact solution on all four
sides.  Sides are tagged clockwise from the left: 1 left, 2 top, 3 right,
4 bottom.
"""

from __future__ import annotations

import numpy as np

from hbadapt.errors import ConfigurationError
from hbadapt.fem import Dirichlet, ProblemSpec, Robin
from hbadapt.mesh import Mesh

LEFT, TOP, RIGHT, BOTTOM = 1, 2, 3, 4
INTERFACE_TAG = 10


def tensor_grid(xs, ys, region=None, lines=()) -> Mesh:
    """Triangulated tensor-product grid on ``xs x ys``.

    ``region(cx, cy)`` assigns region tags from cell centres.  ``lines`` is a
    sequence of ``("x" | "y", value)`` grid lines whose grid edges are all
    recorded as constrained interior segments.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    nx, ny = len(xs), len(ys)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i, j):
        return j * nx + i

    tris, cx, cy = [], [], []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            # alternate diagonals so the grid has no preferred direction
            if (i + j) % 2 == 0:
                tris += [[a, b, c], [a, c, d]]
            else:
                tris += [[a, b, d], [b, c, d]]
            mx, my = 0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])
            cx += [mx, mx]
            cy += [my, my]
    tris = np.array(tris)
    regions = None if region is None else np.asarray(region(np.array(cx), np.array(cy)), dtype=np.int64)

    edges, tags, cons = [], [], []
    for j in range(ny - 1):
        edges += [[vid(0, j), vid(0, j + 1)], [vid(nx - 1, j), vid(nx - 1, j + 1)]]
        tags += [LEFT, RIGHT]
    for i in range(nx - 1):
        edges += [[vid(i, ny - 1), vid(i + 1, ny - 1)], [vid(i, 0), vid(i + 1, 0)]]
        tags += [TOP, BOTTOM]
    cons += [True] * len(edges)
    for axis, value in lines:
        if axis == "x":
            i = int(np.argmin(np.abs(xs - value)))
            edges += [[vid(i, j), vid(i, j + 1)] for j in range(ny - 1)]
            tags += [INTERFACE_TAG] * (ny - 1)
            cons += [True] * (ny - 1)
        else:
            j = int(np.argmin(np.abs(ys - value)))
            edges += [[vid(i, j), vid(i + 1, j)] for i in range(nx - 1)]
            tags += [INTERFACE_TAG] * (nx - 1)
            cons += [True] * (nx - 1)
    return Mesh(verts, tris, regions, edges, tags, cons)


def interface_segments(mesh: Mesh, tag: int = INTERFACE_TAG) -> Mesh:
    """Copy of ``mesh`` with every interior edge between two regions constrained and tagged."""
    table = mesh.edge_table
    et = table.edge_tris
    inner = (et[:, 1] >= 0) & ~table.is_boundary
    diff = inner & (mesh.regions[et[:, 0]] != mesh.regions[np.maximum(et[:, 1], 0)])
    bnd = np.flatnonzero(table.is_boundary)
    new = np.flatnonzero(diff)
    edges = np.concatenate([table.edges[bnd], table.edges[new]])
    tags = np.concatenate([table.tags[bnd], np.full(len(new), tag)])
    return Mesh(mesh.vertices, mesh.triangles, mesh.regions, edges, tags, np.ones(len(edges), dtype=bool))


def _dirichlet_all(exact):
    bc = Dirichlet(exact)
    return {LEFT: bc, TOP: bc, RIGHT: bc, BOTTOM: bc}


def _unit_grid(n):
    return tensor_grid(np.linspace(0.0, 1.0, n + 1), np.linspace(0.0, 1.0, n + 1))


# -------------------------------------------------------------------- tanh

def _tanh_u(x, y):
    return np.tanh(60.0 * x) - np.tanh(60.0 * (x - y) - 30.0)


def _tanh_hessian(x, y):
    t1 = np.tanh(60.0 * x)
    t2 = np.tanh(60.0 * (x - y) - 30.0)
    a = 7200.0 * t1 * (1.0 - t1 * t1)
    b = 7200.0 * t2 * (1.0 - t2 * t2)
    return -a + b, -b, b


def _tanh_problem():
    def f(x, y):
        hxx, _, hyy = _tanh_hessian(x, y)
        return -(hxx + hyy)

    prob = ProblemSpec("tanh", {1: (1.0, 1.0)}, f, _dirichlet_all(_tanh_u), exact=_tanh_u,
                       exact_hessian=_tanh_hessian,
                       description="u = tanh(60x) - tanh(60(x-y) - 30) on the unit square")
    return prob, _unit_grid(10)


# ------------------------------------------------------------------- shock

def _shock_u(x, y):
    return 1.0 / (1.0 + np.exp((x + y - 1.25) / 0.05))


def _shock_hessian(x, y):
    u = _shock_u(x, y)
    h = 400.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
    return h, h, h


def _shock_problem():
    def f(x, y):
        hxx, _, hyy = _shock_hessian(x, y)
        return -(hxx + hyy)

    prob = ProblemSpec("shock", {1: (1.0, 1.0)}, f, _dirichlet_all(_shock_u), exact=_shock_u,
                       exact_hessian=_shock_hessian,
                       description="u = 1 / (1 + exp((x + y - 1.25) / 0.05)) on the unit square")
    return prob, _unit_grid(10)


# ------------------------------------------------------------------- layer

def _layer_u(x, y):
    return np.exp(-25.0 * x) + np.exp(-25.0 * y)


def _layer_hessian(x, y):
    return 625.0 * np.exp(-25.0 * x), np.zeros_like(np.asarray(x, float) * y), 625.0 * np.exp(-25.0 * y)


def _layer_problem():
    def f(x, y):
        hxx, _, hyy = _layer_hessian(x, y)
        return -(hxx + hyy)

    prob = ProblemSpec("layer", {1: (1.0, 1.0)}, f, _dirichlet_all(_layer_u), exact=_layer_u,
                       exact_hessian=_layer_hessian,
                       description="u = exp(-25x) + exp(-25y) on the unit square")
    return prob, _unit_grid(10)


# -------------------------------------------------------------------- jump

JUMP_ALPHA = 6.0


def _jump_u(x, y):
    x = np.asarray(x, dtype=float)
    return np.where(x < 0.5, -2.0 * JUMP_ALPHA * x + JUMP_ALPHA + 1.0, -2.0 * x + 2.0) + 0.0 * y


def _jump_hessian(x, y):
    z = np.zeros(np.broadcast(np.asarray(x, float), np.asarray(y, float)).shape)
    return z, z, z


def _jump_diffusion(x, y):
    d = np.where(np.asarray(x) < 0.5, 1.0, JUMP_ALPHA)
    return d, d


def _jump_problem(interface: bool):
    desc = ("piecewise linear u with a kink at x = 0.5; diffusion 1 on the left and "
            f"{JUMP_ALPHA:g} on the right")
    bc = _dirichlet_all(_jump_u)
    if interface:
        mesh = tensor_grid(np.linspace(0, 1, 11), np.linspace(0, 1, 11),
                           region=lambda cx, cy: np.where(cx < 0.5, 1, 2), lines=[("x", 0.5)])
        prob = ProblemSpec("jump-interface", {1: (1.0, 1.0), 2: (JUMP_ALPHA, JUMP_ALPHA)}, {1: 0.0, 2: 0.0}, bc,
                           exact=_jump_u, exact_hessian=_jump_hessian, description=desc + " (resolved interface)")
    else:
        # x = 0.5 falls inside a column of cells
        mesh = tensor_grid(np.linspace(0, 1, 10), np.linspace(0, 1, 11))
        prob = ProblemSpec("jump", _jump_diffusion, lambda x, y: np.zeros_like(x), bc,
                           exact=_jump_u, exact_hessian=_jump_hessian, description=desc)
    return prob, mesh


# ----------------------------------------------------------------- battery

BATTERY_WIDTH, BATTERY_HEIGHT = 8.4, 24.0

# Region layout as axis-aligned rectangles (x0, x1, y0, y1); later entries
# override earlier ones.  Transcribed from a drawing without coordinates.
BATTERY_RECTANGLES = (
    (5, (0.0, 8.4, 0.0, 24.0)),
    (4, (0.0, 8.0, 0.8, 23.2)),
    (1, (6.1, 6.5, 0.8, 23.2)),
    (2, (0.0, 6.1, 1.6, 3.6)),
    (2, (0.0, 6.1, 18.8, 21.2)),
    (3, (0.0, 6.1, 3.6, 18.8)),
)
BATTERY_DIFFUSION = {1: (25.0, 25.0), 2: (7.0, 0.8), 3: (5.0, 1e-4), 4: (0.2, 0.2), 5: (0.05, 0.05)}
BATTERY_SOURCE = {1: 0.0, 2: 1.0, 3: 1.0, 4: 0.0, 5: 0.0}
BATTERY_BOUNDARY = {LEFT: Robin(0.0, 0.0), TOP: Robin(1.0, 3.0), RIGHT: Robin(2.0, 2.0), BOTTOM: Robin(3.0, 0.0)}
BATTERY_X = (0.0, 6.1, 6.5, 8.0, 8.4)
BATTERY_Y = (0.0, 0.8, 1.6, 3.6, 18.8, 21.2, 23.2, 24.0)


def battery_region(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape, dtype=np.int64)
    for tag, (x0, x1, y0, y1) in BATTERY_RECTANGLES:
        out = np.where((x >= x0) & (x <= x1) & (y >= y0) & (y <= y1), tag, out)
    return out


def _refined_breaks(breaks, h):
    pts = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        k = max(1, int(np.ceil((b - a) / h - 1e-9)))
        pts += list(np.linspace(a, b, k + 1)[1:])
    return np.array(pts)


def _battery_problem(interface: bool):
    desc = "thermal battery cell, five materials, flux boundary conditions, no exact solution"
    if interface:
        mesh = tensor_grid(_refined_breaks(BATTERY_X, 1.5), _refined_breaks(BATTERY_Y, 2.5), region=battery_region)
        mesh = interface_segments(mesh)
        prob = ProblemSpec("battery-interface", BATTERY_DIFFUSION, BATTERY_SOURCE, BATTERY_BOUNDARY,
                           source_sign=-1.0, description=desc + " (resolved interfaces)")
    else:
        def diffusion(x, y):
            r = battery_region(x, y)
            table = np.array([(1.0, 1.0)] + [BATTERY_DIFFUSION[k] for k in range(1, 6)])
            return table[r, 0], table[r, 1]

        def source(x, y):
            table = np.array([0.0] + [BATTERY_SOURCE[k] for k in range(1, 6)])
            return table[battery_region(x, y)]

        mesh = tensor_grid(np.linspace(0, BATTERY_WIDTH, 8), np.linspace(0, BATTERY_HEIGHT, 15))
        prob = ProblemSpec("battery", diffusion, source, BATTERY_BOUNDARY, source_sign=-1.0, description=desc)
    return prob, mesh


_LIBRARY = {
    "tanh": _tanh_problem,
    "shock": _shock_problem,
    "layer": _layer_problem,
    "jump": lambda: _jump_problem(False),
    "jump-interface": lambda: _jump_problem(True),
    "battery": lambda: _battery_problem(False),
    "battery-interface": lambda: _battery_problem(True),
}
PROBLEMS = tuple(_LIBRARY)


def problem_library(name: str) -> tuple[ProblemSpec, Mesh]:
    """``(problem, initial mesh)`` for a named benchmark."""
    try:
        build = _LIBRARY[name]
    except KeyError:
        raise ConfigurationError(f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}") from None
    return build()
