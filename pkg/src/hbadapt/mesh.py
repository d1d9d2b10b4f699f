"""Conforming triangular meshes: storage, derived topology, reference maps, file I/O."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np

from hbadapt.errors import GeometryError, MeshParseError, TopologyError

# Equilateral reference triangle of unit area: (0,0), (a,0), (a/2, a*sqrt(3)/2).
REF_SIDE = math.sqrt(4.0 / math.sqrt(3.0))
REF_VERTICES = np.array(
    [[0.0, 0.0], [REF_SIDE, 0.0], [0.5 * REF_SIDE, 0.5 * math.sqrt(3.0) * REF_SIDE]]
)
_REF_T = np.column_stack([REF_VERTICES[1] - REF_VERTICES[0], REF_VERTICES[2] - REF_VERTICES[0]])
REF_T_INV = np.linalg.inv(_REF_T)

# local edge k joins the two vertices other than k
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangular mesh with region tags and tagged boundary/interface segments.

    ``boundary_edges`` lists every tagged segment: all edges on the domain
    boundary (whose tag selects a boundary condition) plus interior interface
    edges.  ``constrained`` marks segments the remesher must preserve;
    domain-boundary segments are preserved regardless of the flag.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    regions: np.ndarray | None = None
    boundary_edges: np.ndarray | None = None
    boundary_tags: np.ndarray | None = None
    constrained: np.ndarray | None = None

    def __post_init__(self):
        set_ = object.__setattr__
        vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        nt = len(triangles)
        regions = np.ones(nt, dtype=np.int64) if self.regions is None else np.asarray(self.regions, dtype=np.int64)
        if regions.shape != (nt,):
            raise ValueError("regions must have one entry per triangle")
        bedges = (
            np.zeros((0, 2), dtype=np.int64)
            if self.boundary_edges is None
            else np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        )
        nb = len(bedges)
        tags = np.ones(nb, dtype=np.int64) if self.boundary_tags is None else np.asarray(self.boundary_tags, dtype=np.int64)
        cons = np.ones(nb, dtype=bool) if self.constrained is None else np.asarray(self.constrained, dtype=bool)
        if tags.shape != (nb,) or cons.shape != (nb,):
            raise ValueError("boundary_tags and constrained must match boundary_edges")
        for name, arr in (("vertices", vertices), ("triangles", triangles), ("regions", regions),
                          ("boundary_edges", bedges), ("boundary_tags", tags), ("constrained", cons)):
            arr.setflags(write=False)
            set_(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @property
    def domain_area(self) -> float:
        return float(np.sum(self.areas))

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def edge_table(self) -> EdgeTable:
        return build_edge_table(self)

    @cached_property
    def diameter(self) -> float:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    def oriented(self) -> Mesh:
        """Copy with clockwise triangles flipped to counterclockwise."""
        tris = self.triangles.copy()
        cw = self.signed_areas < 0
        tris[cw] = tris[cw][:, [0, 2, 1]]
        return Mesh(self.vertices, tris, self.regions, self.boundary_edges, self.boundary_tags, self.constrained)

    def region_areas(self) -> dict[int, float]:
        out = {}
        for k in np.unique(self.regions):
            out[int(k)] = float(self.areas[self.regions == k].sum())
        return out


@dataclass(frozen=True, eq=False)
class EdgeTable:
    """Undirected edges derived from the triangles, in lexicographic order.

    ``tri_edges[t, k]`` is the edge opposite local vertex ``k`` of triangle ``t``;
    ``edge_tris[e]`` holds the one or two adjacent triangles (``-1`` pads).
    """

    edges: np.ndarray
    edge_tris: np.ndarray
    tri_edges: np.ndarray
    vertex_edge_ptr: np.ndarray
    vertex_edge_idx: np.ndarray
    tags: np.ndarray  # segment tag per edge, 0 for untagged
    constrained: np.ndarray
    missing_segments: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def is_boundary(self) -> np.ndarray:
        return self.edge_tris[:, 1] < 0

    def vertex_edges(self, v: int) -> np.ndarray:
        return self.vertex_edge_idx[self.vertex_edge_ptr[v]:self.vertex_edge_ptr[v + 1]]

    def find(self, a: int, b: int) -> int:
        """Index of edge ``(a, b)`` or -1."""
        for e in self.vertex_edges(a):
            if b in self.edges[e]:
                return int(e)
        return -1


def _edge_keys(pairs: np.ndarray, nv: int) -> np.ndarray:
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    return lo * nv + hi


def build_edge_table(mesh: Mesh) -> EdgeTable:
    nv, nt = mesh.n_vertices, mesh.n_triangles
    tris = mesh.triangles
    pairs = tris[:, LOCAL_EDGES].reshape(-1, 2)
    keys = _edge_keys(pairs, nv)
    uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    if np.any(counts > 2):
        bad = uniq[counts > 2][0]
        raise TopologyError(f"non-manifold edge ({bad // nv}, {bad % nv}) shared by {counts.max()} triangles")
    edges = np.column_stack([uniq // nv, uniq % nv])
    ne = len(edges)
    tri_edges = inverse.reshape(nt, 3)

    edge_tris = np.full((ne, 2), -1, dtype=np.int64)
    owner = np.repeat(np.arange(nt), 3)
    order = np.argsort(inverse, kind="stable")
    sorted_e = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_e[1:] != sorted_e[:-1]
    edge_tris[sorted_e[first], 0] = owner[order[first]]
    edge_tris[sorted_e[~first], 1] = owner[order[~first]]

    ends = edges.ravel()
    inc_order = np.argsort(ends, kind="stable")
    vertex_edge_idx = (inc_order // 2).astype(np.int64)
    vertex_edge_ptr = np.zeros(nv + 1, dtype=np.int64)
    np.add.at(vertex_edge_ptr, ends + 1, 1)
    vertex_edge_ptr = np.cumsum(vertex_edge_ptr)

    tags = np.zeros(ne, dtype=np.int64)
    cons = np.zeros(ne, dtype=bool)
    missing = np.zeros(0, dtype=np.int64)
    if len(mesh.boundary_edges):
        skeys = _edge_keys(mesh.boundary_edges, nv)
        pos = np.searchsorted(uniq, skeys)
        pos_c = np.minimum(pos, ne - 1)
        found = uniq[pos_c] == skeys
        tags[pos_c[found]] = mesh.boundary_tags[found]
        cons[pos_c[found]] = mesh.constrained[found]
        missing = np.flatnonzero(~found)
    return EdgeTable(edges, edge_tris, tri_edges, vertex_edge_ptr, vertex_edge_idx, tags, cons, missing)


@dataclass(frozen=True)
class AffineMap:
    """Jacobian of the map from the unit-area equilateral reference triangle onto K."""

    jacobian: np.ndarray
    area: float


def affine_map(mesh: Mesh, triangle_index: int) -> AffineMap:
    p = mesh.vertices[mesh.triangles[triangle_index]]
    tk = np.column_stack([p[1] - p[0], p[2] - p[0]])
    area = 0.5 * abs(np.linalg.det(tk))
    scale = max(np.abs(tk).max(), np.finfo(float).tiny)
    if area <= 1e-14 * scale * scale:
        raise GeometryError(f"triangle {triangle_index} is degenerate (area {area:.3e})")
    return AffineMap(tk @ REF_T_INV, area)


def jacobians(mesh: Mesh) -> np.ndarray:
    """All reference-map Jacobians, shape ``(nt, 2, 2)``."""
    p = mesh.vertices[mesh.triangles]
    tk = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    return tk @ REF_T_INV


class Defect(NamedTuple):
    kind: str
    index: int
    message: str


def validate(mesh: Mesh) -> list[Defect]:
    """Check the mesh invariants and return every violation found (empty when valid)."""
    defects: list[Defect] = []
    nv = mesh.n_vertices
    if nv == 0 or mesh.n_triangles == 0:
        defects.append(Defect("empty", -1, "mesh has no vertices or no triangles"))
        return defects
    bad_t = np.flatnonzero(np.any((mesh.triangles < 0) | (mesh.triangles >= nv), axis=1))
    for t in bad_t:
        defects.append(Defect("index", int(t), f"triangle {t} references a vertex out of range"))
    bad_e = np.flatnonzero(np.any((mesh.boundary_edges < 0) | (mesh.boundary_edges >= nv), axis=1))
    for e in bad_e:
        defects.append(Defect("index", int(e), f"segment {e} references a vertex out of range"))
    if len(bad_t) or len(bad_e):
        return defects

    areas = mesh.signed_areas
    scale = mesh.diameter ** 2
    for t in np.flatnonzero(np.abs(areas) <= 1e-14 * scale):
        defects.append(Defect("degenerate", int(t), f"triangle {t} has zero area"))
    for t in np.flatnonzero(areas < -1e-14 * scale):
        defects.append(Defect("orientation", int(t), f"triangle {t} is clockwise"))
    degenerate_idx = np.flatnonzero(
        (mesh.triangles[:, 0] == mesh.triangles[:, 1])
        | (mesh.triangles[:, 1] == mesh.triangles[:, 2])
        | (mesh.triangles[:, 0] == mesh.triangles[:, 2])
    )
    for t in degenerate_idx:
        defects.append(Defect("degenerate", int(t), f"triangle {t} repeats a vertex"))

    try:
        table = build_edge_table(mesh)
    except TopologyError as exc:
        defects.append(Defect("manifold", -1, str(exc)))
        return defects
    for s in table.missing_segments:
        kind = "constraint" if mesh.constrained[s] else "segment"
        a, b = mesh.boundary_edges[s]
        defects.append(Defect(kind, int(s), f"segment {s} ({a}, {b}) is not an edge of any triangle"))
    for e in np.flatnonzero(table.is_boundary & (table.tags == 0)):
        a, b = table.edges[e]
        defects.append(Defect("boundary", int(e), f"boundary edge ({a}, {b}) has no segment tag"))
    return defects


# --------------------------------------------------------------------------- I/O

def write_mesh(mesh: Mesh, path) -> None:
    """Write the mesh in the bamg-style text format with 1-based indices."""
    lines = ["MeshVersionFormatted 0", "", "Dimension 2", "", "Vertices", str(mesh.n_vertices)]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.vertices]
    lines += ["", "Edges", str(len(mesh.boundary_edges))]
    lines += [f"{a + 1} {b + 1} {t}" for (a, b), t in zip(mesh.boundary_edges, mesh.boundary_tags)]
    required = np.flatnonzero(mesh.constrained)
    lines += ["", "RequiredEdges", str(len(required))]
    lines += [str(i + 1) for i in required]
    lines += ["", "Triangles", str(mesh.n_triangles)]
    lines += [f"{a + 1} {b + 1} {c + 1} {r}" for (a, b, c), r in zip(mesh.triangles, mesh.regions)]
    lines += ["", "End", ""]
    Path(path).write_text("\n".join(lines))


_SECTION_WIDTH = {"Vertices": 3, "Edges": 3, "Triangles": 4, "RequiredEdges": 1}


def _records(path):
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if text:
            yield lineno, text.split()


def read_mesh(path) -> Mesh:
    """Parse a mesh file; triangles are reoriented counterclockwise on load."""
    it = iter(_records(path))
    sections: dict[str, list[tuple[int, list[str]]]] = {}
    for lineno, tokens in it:
        head = tokens[0]
        if head == "End":
            break
        if head in ("MeshVersionFormatted", "Dimension"):
            if len(tokens) == 1:
                next(it, None)
            elif head == "Dimension" and tokens[1] != "2":
                raise MeshParseError("only 2D meshes are supported", lineno)
            continue
        if head not in _SECTION_WIDTH:
            raise MeshParseError(f"unknown section header {head!r}", lineno)
        if len(tokens) > 1:
            count_tok, count_line = tokens[1], lineno
        else:
            nxt = next(it, None)
            if nxt is None:
                raise MeshParseError(f"section {head} has no count", lineno)
            count_line, count_toks = nxt
            count_tok = count_toks[0]
        try:
            count = int(count_tok)
        except ValueError:
            raise MeshParseError(f"bad count {count_tok!r} for section {head}", count_line) from None
        if count < 0:
            raise MeshParseError(f"negative count for section {head}", count_line)
        rows = []
        for _ in range(count):
            nxt = next(it, None)
            if nxt is None:
                raise MeshParseError(f"section {head} ended early", count_line)
            ln, toks = nxt
            if len(toks) < _SECTION_WIDTH[head]:
                raise MeshParseError(f"{head} record needs {_SECTION_WIDTH[head]} fields", ln)
            rows.append((ln, toks))
        sections[head] = rows

    verts = sections.get("Vertices", [])
    if not verts:
        raise MeshParseError("empty or missing Vertices section")
    tris = sections.get("Triangles", [])
    if not tris:
        raise MeshParseError("empty or missing Triangles section")
    nv = len(verts)

    def idx(tok, ln, upper):
        try:
            i = int(tok)
        except ValueError:
            raise MeshParseError(f"bad index {tok!r}", ln) from None
        if not 1 <= i <= upper:
            raise MeshParseError(f"index {i} out of range 1..{upper}", ln)
        return i - 1

    try:
        xy = np.array([[float(t[0]), float(t[1])] for _, t in verts])
    except ValueError as exc:
        ln = next(ln for ln, t in verts if not _is_float(t[0]) or not _is_float(t[1]))
        raise MeshParseError(f"bad coordinate: {exc}", ln) from None
    tri = np.array([[idx(t[0], ln, nv), idx(t[1], ln, nv), idx(t[2], ln, nv)] for ln, t in tris], dtype=np.int64)
    reg = np.array([int(t[3]) for _, t in tris], dtype=np.int64)
    edges = sections.get("Edges", [])
    bedges = np.array([[idx(t[0], ln, nv), idx(t[1], ln, nv)] for ln, t in edges], dtype=np.int64).reshape(-1, 2)
    btags = np.array([int(t[2]) for _, t in edges], dtype=np.int64)
    cons = np.zeros(len(edges), dtype=bool)
    for ln, t in sections.get("RequiredEdges", []):
        cons[idx(t[0], ln, len(edges))] = True
    return Mesh(xy, tri, reg, bedges, btags, cons).oriented()


def _is_float(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True
