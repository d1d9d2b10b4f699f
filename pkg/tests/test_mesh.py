import numpy as np
import pytest
from conftest import square_mesh, uniform_square

from hbadapt.errors import GeometryError, MeshParseError, TopologyError
from hbadapt.mesh import REF_VERTICES, Mesh, affine_map, build_edge_table, jacobians, read_mesh, validate, write_mesh
from hbadapt.problems import problem_library


def test_single_triangle_edges():
    m = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    t = build_edge_table(m)
    assert t.n_edges == 3
    assert np.all(t.edge_tris[:, 0] == 0) and np.all(t.edge_tris[:, 1] == -1)


def test_two_triangles_share_one_edge(square):
    t = square.edge_table
    assert t.n_edges == 5
    shared = np.flatnonzero(t.edge_tris[:, 1] >= 0)
    assert len(shared) == 1
    assert tuple(t.edges[shared[0]]) == (0, 2)


def test_duplicated_triangle_is_non_manifold():
    m = Mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3], [0, 2, 3]])
    with pytest.raises(TopologyError):
        build_edge_table(m)


def test_edge_table_deterministic_and_consistent(grid8):
    a = build_edge_table(grid8)
    b = build_edge_table(grid8)
    assert np.array_equal(a.edges, b.edges)
    assert np.array_equal(a.tri_edges, b.tri_edges)
    # every triangle edge maps back to the right vertex pair
    for t in range(grid8.n_triangles):
        tri = grid8.triangles[t]
        for k in range(3):
            e = a.tri_edges[t, k]
            assert set(a.edges[e]) == set(tri) - {tri[k]}
            assert t in a.edge_tris[e]
    counts = (a.edge_tris >= 0).sum(axis=1)
    assert set(counts.tolist()) <= {1, 2}


def test_euler_relation(grid8):
    t = grid8.edge_table
    assert grid8.n_vertices - t.n_edges + grid8.n_triangles == 1


def test_reference_triangle_maps_to_identity():
    m = Mesh(REF_VERTICES, [[0, 1, 2]])
    f = affine_map(m, 0)
    assert np.allclose(f.jacobian, np.eye(2), atol=1e-14)
    assert f.area == pytest.approx(1.0, abs=1e-14)


def test_right_triangle_area_and_determinant():
    m = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    f = affine_map(m, 0)
    assert f.area == pytest.approx(0.5, abs=1e-15)
    assert np.linalg.det(f.jacobian) == pytest.approx(0.5, abs=1e-14)


def test_collinear_triangle_rejected():
    m = Mesh([[0, 0], [1, 1], [2, 2]], [[0, 1, 2]])
    with pytest.raises(GeometryError):
        affine_map(m, 0)


def test_jacobian_determinants_equal_areas(grid8):
    assert np.allclose(np.linalg.det(jacobians(grid8)), grid8.areas, rtol=1e-13)


@pytest.mark.parametrize("mesh, area", [(uniform_square(7), 1.0), (problem_library("battery")[1], 8.4 * 24.0)])
def test_areas_sum_to_domain(mesh, area):
    assert mesh.domain_area == pytest.approx(area, rel=1e-12)


def test_round_trip(tmp_path, square):
    path = tmp_path / "sq.mesh"
    write_mesh(square, path)
    back = read_mesh(path)
    assert np.array_equal(back.triangles, square.triangles)
    assert np.array_equal(back.vertices, square.vertices)
    assert np.array_equal(back.boundary_edges, square.boundary_edges)
    assert np.array_equal(back.boundary_tags, square.boundary_tags)
    assert np.array_equal(back.constrained, square.constrained)
    assert np.array_equal(back.regions, square.regions)


def test_round_trip_constrained_interfaces(tmp_path):
    _, m = problem_library("battery-interface")
    write_mesh(m, tmp_path / "b.mesh")
    back = read_mesh(tmp_path / "b.mesh")
    assert np.array_equal(back.constrained, m.constrained)
    assert back.constrained.sum() > 0


def _write(tmp_path, text):
    p = tmp_path / "bad.mesh"
    p.write_text(text)
    return p


def test_zero_index_rejected_with_line(tmp_path):
    p = _write(tmp_path, "Vertices\n3\n0 0 0\n1 0 0\n0 1 0\nTriangles\n1\n0 1 2 1\nEnd\n")
    with pytest.raises(MeshParseError) as info:
        read_mesh(p)
    assert info.value.line == 8


def test_empty_vertices_rejected(tmp_path):
    p = _write(tmp_path, "Vertices\n0\nTriangles\n0\nEnd\n")
    with pytest.raises(MeshParseError):
        read_mesh(p)


def test_unknown_section_rejected(tmp_path):
    p = _write(tmp_path, "Vertices\n3\n0 0 0\n1 0 0\n0 1 0\nQuads\n1\n1 2 3 4 1\nEnd\n")
    with pytest.raises(MeshParseError) as info:
        read_mesh(p)
    assert info.value.line == 6


def test_clockwise_triangles_reoriented_on_load(tmp_path):
    p = _write(tmp_path, "Vertices\n3\n0 0 0\n0 1 0\n1 0 0\nTriangles\n1\n1 2 3 1\nEnd\n")
    m = read_mesh(p)
    assert m.signed_areas[0] > 0


def test_validate_clean_square(square):
    assert validate(square) == []


def test_validate_reports_orientation():
    m = Mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 2, 1], [0, 2, 3]], None,
             [[0, 1], [1, 2], [2, 3], [3, 0]], [1, 1, 1, 1], [False] * 4)
    kinds = [d.kind for d in validate(m)]
    assert "orientation" in kinds


def test_validate_reports_missing_constraint_and_all_defects():
    m = square_mesh()
    bad = Mesh(m.vertices, [[0, 2, 1], [0, 2, 3]], m.regions,
               np.vstack([m.boundary_edges, [[1, 3]]]), np.append(m.boundary_tags, 10),
               np.append(m.constrained, True))
    kinds = [d.kind for d in validate(bad)]
    assert "constraint" in kinds and "orientation" in kinds


def test_validate_untagged_boundary():
    m = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], None, [[0, 1]], [1], [False])
    kinds = [d.kind for d in validate(m)]
    assert kinds.count("boundary") == 2


def test_library_meshes_valid():
    for name in ("tanh", "jump", "jump-interface", "battery", "battery-interface"):
        _, m = problem_library(name)
        assert validate(m) == [], name
        assert m.areas.min() > 0
