import numpy as np
import pytest
from conftest import uniform_square
from hypothesis import given, settings
from hypothesis import strategies as st

from hbadapt import hessian as hes
from hbadapt.errors import ConfigurationError
from hbadapt.fem import Dirichlet, ProblemSpec
from hbadapt.mesh import Mesh
from hbadapt.problems import problem_library


def perturbed_square(n, seed):
    m = uniform_square(n)
    rng = np.random.default_rng(seed)
    v = m.vertices.copy()
    inner = (v > 1e-12).all(axis=1) & (v < 1 - 1e-12).all(axis=1)
    v[inner] += rng.uniform(-0.2, 0.2, (inner.sum(), 2)) / n
    return Mesh(v, m.triangles, m.regions, m.boundary_edges, m.boundary_tags, m.constrained)


def bubble_function(z, mesh, t):
    """Evaluate z_h inside triangle ``t`` from barycentric coordinates (independent of the package)."""
    p = mesh.vertices[mesh.triangles[t]]
    tmat = np.column_stack([p[1] - p[0], p[2] - p[0]])
    edges = mesh.edge_table.tri_edges[t]
    inv = np.linalg.inv(tmat)

    def f(x, y):
        l1, l2 = inv @ (np.array([x, y]) - p[0])
        lam = (1 - l1 - l2, l1, l2)
        # local edge k is opposite vertex k
        return sum(z[edges[k]] * 4 * lam[(k + 1) % 3] * lam[(k + 2) % 3] for k in range(3))
    return f


def fd_hessian(f, x, y, h):
    fxx = (f(x + h, y) - 2 * f(x, y) + f(x - h, y)) / h ** 2
    fyy = (f(x, y + h) - 2 * f(x, y) + f(x, y - h)) / h ** 2
    fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h)
    return np.array([fxx, fxy, fyy])


def bubble_interpolant(q, mesh):
    """Coefficients c_e = q(mid) - (q(a) + q(b))/2, so that q - I_1 q = sum c_e phi_e for quadratic q."""
    e = mesh.edge_table.edges
    a, b = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
    mid = 0.5 * (a + b)
    return q(*mid.T) - 0.5 * (q(*a.T) + q(*b.T))


def test_zero_bubbles_zero_hessian(grid8):
    assert not hes.hessian_from_bubbles(np.zeros(grid8.edge_table.n_edges), grid8).any()


def test_bubble_interpolant_of_x_squared():
    m = perturbed_square(3, 0)
    h = hes.hessian_from_bubbles(bubble_interpolant(lambda x, y: x * x, m), m)
    assert np.allclose(h, [2.0, 0.0, 0.0], atol=1e-12)


def test_bubble_hessian_matches_finite_differences():
    m = perturbed_square(4, 1)
    rng = np.random.default_rng(2)
    z = rng.standard_normal(m.edge_table.n_edges)
    h = hes.hessian_from_bubbles(z, m)
    step = 1e-3 * np.sqrt(m.areas.min())
    for t in range(m.n_triangles):
        c = m.centroids[t]
        fd = fd_hessian(bubble_function(z, m, t), c[0], c[1], step)
        assert np.allclose(h[t], fd, rtol=1e-8, atol=1e-8 * np.abs(h[t]).max())


def test_bubble_hessian_linear(grid8):
    rng = np.random.default_rng(4)
    z1, z2 = rng.standard_normal((2, grid8.edge_table.n_edges))
    lhs = hes.hessian_from_bubbles(z1 + z2, grid8)
    rhs = hes.hessian_from_bubbles(z1, grid8) + hes.hessian_from_bubbles(z2, grid8)
    assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-12)


@pytest.mark.parametrize("mesh", [uniform_square(6), perturbed_square(7, 5)])
def test_qls_reproduces_quadratics(mesh):
    x, y = mesh.vertices.T
    h = hes.recover_qls(x * x + y * y, mesh)
    assert np.allclose(h, [2.0, 0.0, 2.0], atol=1e-9)
    h = hes.recover_qls(3 * x * x - x * y + 0.5 * y * y + x, mesh)
    assert np.allclose(h, [6.0, -1.0, 1.0], atol=1e-9)


def test_qls_linear_gives_zero(grid8):
    x, y = grid8.vertices.T
    assert np.abs(hes.recover_qls(2 * x - y + 4, grid8)).max() < 1e-10


def test_qls_too_few_vertices():
    m = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    with pytest.raises(ConfigurationError):
        hes.recover_qls(np.zeros(3), m)


def _interior(mesh):
    v = mesh.vertices
    return (v > 1e-12).all(axis=1) & (v < 1 - 1e-12).all(axis=1)


def test_variational_linear_zero_on_interior(grid8):
    x, y = grid8.vertices.T
    hv = hes.recover_variational_vertices(2 * x - y + 4, grid8)
    assert np.abs(hv[_interior(grid8)]).max() < 1e-10


def same_diagonal_square(n):
    g = np.linspace(0.0, 1.0, n + 1)
    x, y = np.meshgrid(g, g, indexing="xy")
    v = np.column_stack([x.ravel(), y.ravel()])
    tris = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            tris += [[a, a + 1, a + n + 2], [a, a + n + 2, a + n + 1]]
    return Mesh(v, tris)


def test_variational_agrees_with_qls_on_interior():
    # every interior patch is point-symmetric, where the weak second derivative is exact for quadratics
    m = same_diagonal_square(10)
    x, y = m.vertices.T
    u = x * x + y * y
    inner = _interior(m)
    hv = hes.recover_variational_vertices(u, m)[inner]
    hq = hes.recover_qls_vertices(u, m)[inner]
    assert np.allclose(hv, hq, atol=1e-9)
    # the boundary ring is polluted: no boundary term in the weak form
    hb = hes.recover_variational_vertices(u, m)[~inner]
    assert np.abs(hb - [2.0, 0.0, 2.0]).max() > 0.5


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_recoveries_scale_linearly(c):
    m = uniform_square(4)
    x, y = m.vertices.T
    u = np.sin(3 * x) * np.exp(y)
    for fn in (hes.recover_variational, hes.recover_qls):
        assert np.allclose(fn(c * u, m), c * fn(u, m), rtol=1e-10, atol=1e-10 * max(abs(c), 1.0))


def test_exact_hessian_tanh_matches_finite_differences():
    prob, m = problem_library("tanh")
    h = hes.exact_hessian(prob, m)
    step = 1e-5
    for t in range(0, m.n_triangles, 7):
        c = m.centroids[t]
        fd = fd_hessian(lambda x, y: prob.exact(np.array(x), np.array(y)), c[0], c[1], step)
        assert np.allclose(h[t], fd, rtol=1e-4, atol=1e-4 * max(np.abs(h[t]).max(), 1.0))


def _problem(u, hess):
    return ProblemSpec("q", {1: (1.0, 1.0)}, {1: 0.0}, {s: Dirichlet(u) for s in (1, 2, 3, 4)},
                       exact=u, exact_hessian=hess)


def test_exact_hessian_simple_cases(grid8):
    zero = lambda x, y: (0 * x, 0 * x, 0 * x)  # noqa: E731
    assert not hes.exact_hessian(_problem(lambda x, y: x + y, zero), grid8).any()
    h = hes.exact_hessian(_problem(lambda x, y: 0.5 * x * x, lambda x, y: (1.0, 0.0, 0.0)), grid8)
    assert np.array_equal(h, np.tile([1.0, 0.0, 0.0], (grid8.n_triangles, 1)))


def test_exact_hessian_missing():
    prob, m = problem_library("battery")
    with pytest.raises(ConfigurationError):
        hes.exact_hessian(prob, m)
