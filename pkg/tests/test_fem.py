import numpy as np
import pytest
import scipy.sparse as sp
from conftest import uniform_square

from hbadapt.errors import ConfigurationError, DimensionError, SolverError
from hbadapt.fem import (
    Dirichlet,
    ProblemSpec,
    Robin,
    assemble,
    energy_residual,
    l2_error,
    solve,
    solve_linear,
    solve_spd,
)
from hbadapt.mesh import REF_VERTICES, Mesh
from hbadapt.problems import BATTERY_BOUNDARY, BATTERY_DIFFUSION, BATTERY_SOURCE, TOP, problem_library

SIDES = (1, 2, 3, 4)


def dirichlet_problem(g, f=0.0, diffusion=(1.0, 1.0), sign=1.0, exact=None):
    source = f if callable(f) else {1: f}
    return ProblemSpec("t", {1: diffusion}, source, {s: Dirichlet(g) for s in SIDES}, source_sign=sign, exact=exact)


def _sine(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def _sine_source(x, y):
    return 2.0 * np.pi ** 2 * _sine(x, y)


def test_linear_reproduced_exactly():
    m = uniform_square(6)
    u = solve(dirichlet_problem(lambda x, y: x), m)
    assert np.max(np.abs(u - m.vertices[:, 0])) < 1e-12


def test_anisotropic_diffusion_reproduces_linear():
    m = uniform_square(5)
    u = solve(dirichlet_problem(lambda x, y: 2 * x - 3 * y + 1, diffusion=(7.0, 0.01)), m)
    assert np.max(np.abs(u - (2 * m.vertices[:, 0] - 3 * m.vertices[:, 1] + 1))) < 1e-11


def test_reference_triangle_rows_sum_to_zero():
    m = Mesh(REF_VERTICES, [[0, 1, 2]], None, [[0, 1], [1, 2], [2, 0]], [1, 2, 3], [False] * 3)
    prob = ProblemSpec("ref", {1: (1.0, 1.0)}, {1: 0.0}, {s: Dirichlet(lambda x, y: 0 * x) for s in (1, 2, 3)})
    a = assemble(prob, m).full_matrix.toarray()
    assert np.allclose(a.sum(axis=1), 0.0, atol=1e-14)
    # equilateral triangle of unit area: diagonal entries are 1/sqrt(3)
    assert np.allclose(np.diag(a), 1 / np.sqrt(3), rtol=1e-13)


def test_battery_table_values():
    assert BATTERY_DIFFUSION[3] == (5.0, 1e-4)
    assert BATTERY_SOURCE[3] == 1.0
    assert BATTERY_BOUNDARY[TOP] == Robin(1.0, 3.0)


def test_system_symmetric_positive_definite():
    prob, m = problem_library("battery-interface")
    s = assemble(prob, m)
    a = s.matrix
    assert abs(a - a.T).max() <= 1e-12 * abs(a).max()
    rng = np.random.default_rng(1)
    for _ in range(5):
        v = rng.standard_normal(m.n_vertices)
        assert v @ (a @ v) > 0


def test_missing_region_is_configuration_error():
    m = uniform_square(2)
    prob = ProblemSpec("t", {2: (1.0, 1.0)}, {1: 0.0}, {s: Dirichlet(lambda x, y: x) for s in SIDES})
    with pytest.raises(ConfigurationError):
        assemble(prob, m)


def test_missing_side_is_configuration_error():
    m = uniform_square(2)
    prob = ProblemSpec("t", {1: (1.0, 1.0)}, {1: 0.0}, {s: Dirichlet(lambda x, y: x) for s in (1, 2, 3)})
    with pytest.raises(ConfigurationError):
        assemble(prob, m)


def test_solver_identity():
    x = solve_spd(sp.identity(4, format="csr"), np.array([1.0, 0, 0, 0]))
    assert np.array_equal(x, [1.0, 0, 0, 0])


def test_solver_indefinite_raises():
    a = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(SolverError) as info:
        solve_spd(a, np.array([1.0, 0.0]))
    assert info.value.residual >= 0


def test_solver_residual_meets_tolerance():
    prob, m = problem_library("battery")
    s = assemble(prob, m)
    u = solve_linear(s)
    assert np.linalg.norm(s.matrix @ u - s.rhs) <= 1e-10 * np.linalg.norm(s.rhs)


def test_l2_error_trivial_cases():
    m = uniform_square(3)
    assert l2_error(m.vertices[:, 0] + 2 * m.vertices[:, 1], lambda x, y: x + 2 * y, m) <= 1e-14
    assert l2_error(np.zeros(m.n_vertices), lambda x, y: np.ones_like(x), m) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(DimensionError):
        l2_error(np.zeros(3), lambda x, y: x, m)


def test_second_order_convergence():
    prob = dirichlet_problem(lambda x, y: 0 * x, f=_sine_source, exact=_sine)
    e1 = l2_error(solve(prob, uniform_square(16)), _sine, uniform_square(16))
    e2 = l2_error(solve(prob, uniform_square(32)), _sine, uniform_square(32))
    assert 3.5 <= e1 / e2 <= 4.5


def test_source_sign_flips_solution():
    m = uniform_square(6)
    plus = solve(dirichlet_problem(lambda x, y: 0 * x, f=1.0), m)
    minus = solve(dirichlet_problem(lambda x, y: 0 * x, f=1.0, sign=-1.0), m)
    assert np.allclose(plus, -minus, atol=1e-14)
    assert plus.max() > 0


def test_galerkin_orthogonality():
    prob = dirichlet_problem(lambda x, y: 0 * x, f=_sine_source)
    m = uniform_square(8)
    u = solve(prob, m)
    free = ~assemble(prob, m).dirichlet
    scale = np.abs(assemble(prob, m).full_rhs).max()
    for v in np.flatnonzero(free)[::7]:
        w = np.zeros(m.n_vertices)
        w[v] = 1.0
        assert abs(energy_residual(u, prob, m, nodal=w)) <= 1e-9 * scale


def test_bubble_load_with_zero_solution():
    m = uniform_square(2)
    prob = dirichlet_problem(lambda x, y: 0 * x, f=1.0)
    table = m.edge_table
    e = int(np.flatnonzero(~table.is_boundary)[0])
    w = np.zeros(table.n_edges)
    w[e] = 1.0
    # int 4 lam_i lam_j = 4 |K| / 12 on each of the two triangles
    expected = m.areas[table.edge_tris[e]].sum() / 3.0
    assert energy_residual(np.zeros(m.n_vertices), prob, m, bubble=w) == pytest.approx(expected, rel=1e-13)
    assert energy_residual(np.zeros(m.n_vertices), prob, m, bubble=np.zeros(table.n_edges)) == 0.0


def _robin_problem(alpha, exact, grad):
    def flux(side):
        nx, ny = {1: (-1, 0), 2: (0, 1), 3: (1, 0), 4: (0, -1)}[side]

        def g(x, y):
            gx, gy = grad(x, y)
            return gx * nx + gy * ny + alpha * exact(x, y)
        return g

    return ProblemSpec("robin", {1: (1.0, 1.0)}, _sine_source_plus, {s: Robin(alpha, flux(s)) for s in SIDES},
                       exact=exact)


def _u(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y) + x


def _grad_u(x, y):
    return (np.pi * np.cos(np.pi * x) * np.sin(np.pi * y) + 1.0, np.pi * np.sin(np.pi * x) * np.cos(np.pi * y))


def _sine_source_plus(x, y):
    return _sine_source(x, y)


def test_robin_converges_second_order():
    prob = _robin_problem(1.0, _u, _grad_u)
    e1 = l2_error(solve(prob, uniform_square(16)), _u, uniform_square(16))
    e2 = l2_error(solve(prob, uniform_square(32)), _u, uniform_square(32))
    assert 3.5 <= e1 / e2 <= 4.5


def test_large_alpha_approaches_dirichlet():
    m = uniform_square(16)
    robin = _robin_problem(1e8, _u, _grad_u)
    dirichlet = ProblemSpec("d", {1: (1.0, 1.0)}, _sine_source, {s: Dirichlet(_u) for s in SIDES})
    e_r = l2_error(solve(robin, m), _u, m)
    e_d = l2_error(solve(dirichlet, m), _u, m)
    assert e_r <= 10 * e_d


def test_jump_with_interface_is_exact():
    prob, m = problem_library("jump-interface")
    assert l2_error(solve(prob, m), prob.exact, m) < 1e-12
