"""Local-operation remeshing towards a unit mesh in a Riemannian metric.

The input mesh together with its vertex metric serves as the background:
the metric anywhere in the domain is the log-Euclidean barycentric
interpolation of the background vertex tensors.  The working mesh is then
modified by edge splits, edge collapses, edge flips and vertex smoothing
until (almost) every edge has metric length in ``[l_min, l_max]``.

Domain-boundary segments and constrained interface segments are preserved as
polylines: they may be split, vertices may slide along straight pieces of
them and collapse along them, but never off them.  Vertices where
segments meet at an angle, change tag, or touch more than two segments are
frozen, as are vertices shared by several regions without a constraint.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from hbadapt import sym2
from hbadapt.mesh import Mesh

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
_Q_NORM = 1.0 / (4.0 * math.sqrt(3.0))
FREE, SLIDING, FIXED = 0, 1, 2


@dataclass(frozen=True)
class RemeshConfig:
    l_max: float = SQRT2
    l_min: float = 1.0 / SQRT2
    max_passes: int = 20
    smooth_iterations: int = 2
    flip_gain: float = 1e-3  # relative drop in the worse quality needed to flip
    collapse_quality_cap: float = 2.5
    target_fraction: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.l_min < 1.0 < self.l_max:
            raise ValueError("need 0 < l_min < 1 < l_max")


def metric_edge_length(p1, p2, m1, m2) -> float:
    """Average of the edge length measured in the two endpoint metrics."""
    ex, ey = p2[0] - p1[0], p2[1] - p1[1]
    l1 = m1[0] * ex * ex + 2.0 * m1[1] * ex * ey + m1[2] * ey * ey
    l2 = m2[0] * ex * ex + 2.0 * m2[1] * ex * ey + m2[2] * ey * ey
    return 0.5 * (math.sqrt(l1) + math.sqrt(l2))


def _exp_sym(a, b, c):
    m = 0.5 * (a + c)
    h = 0.5 * (a - c)
    r = math.hypot(h, b)
    em = math.exp(m)
    if r < 1e-14:
        return (em, 0.0, em)
    ch = math.cosh(r)
    sh = math.sinh(r) / r
    return (em * (ch + sh * h), em * sh * b, em * (ch - sh * h))


def _triangle_quality(pa, pb, pc, m):
    """Alignment quality of one triangle in a constant metric (1 for metric-equilateral)."""
    area = 0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]))
    if area <= 0.0:
        return math.inf
    s = 0.0
    for p, q in ((pa, pb), (pb, pc), (pc, pa)):
        ex, ey = q[0] - p[0], q[1] - p[1]
        s += m[0] * ex * ex + 2.0 * m[1] * ex * ey + m[2] * ey * ey
    det = m[0] * m[2] - m[1] * m[1]
    return _Q_NORM * s / (math.sqrt(det) * area)


def _mean_metric(*ms):
    n = len(ms)
    return (sum(m[0] for m in ms) / n, sum(m[1] for m in ms) / n, sum(m[2] for m in ms) / n)


class BackgroundMetric:
    """Metric field given by vertex tensors on a background mesh."""

    def __init__(self, mesh: Mesh, vertex_metric):
        vm = sym2.as_sym(vertex_metric)
        if len(vm) != mesh.n_vertices:
            raise ValueError("one metric tensor per background vertex is required")
        lam1, lam2 = sym2.eigvals(vm)
        if np.any(lam2 <= 0):
            raise ValueError("vertex metric must be positive definite")
        self.mesh = mesh
        self.logs = [tuple(r) for r in sym2.log(vm).tolist()]
        tris = mesh.triangles.tolist()
        self.tris = tris
        p = mesh.vertices
        self._geo = []
        for a, b, c in tris:
            x0, y0 = p[a]
            t11, t21 = p[b][0] - x0, p[b][1] - y0
            t12, t22 = p[c][0] - x0, p[c][1] - y0
            det = t11 * t22 - t12 * t21
            self._geo.append((x0, y0, t22 / det, -t12 / det, -t21 / det, t11 / det))
        table = mesh.edge_table
        nbr = [[-1, -1, -1] for _ in tris]
        et = table.edge_tris
        for t, row in enumerate(table.tri_edges.tolist()):
            for k, e in enumerate(row):
                o = et[e, 0] if et[e, 0] != t else et[e, 1]
                nbr[t][k] = int(o)
        self._nbr = nbr
        lo = p.min(axis=0)
        hi = p.max(axis=0)
        ncell = max(1, int(math.sqrt(len(tris) / 2.0)))
        self._lo = lo
        self._cell = np.maximum((hi - lo) / ncell, 1e-300)
        self._ncell = ncell
        buckets: dict[tuple[int, int], list[int]] = {}
        pt = p[mesh.triangles]
        bmin = np.floor((pt.min(axis=1) - lo) / self._cell).astype(int).clip(0, ncell - 1)
        bmax = np.floor((pt.max(axis=1) - lo) / self._cell).astype(int).clip(0, ncell - 1)
        for t in range(len(tris)):
            for i in range(bmin[t, 0], bmax[t, 0] + 1):
                for j in range(bmin[t, 1], bmax[t, 1] + 1):
                    buckets.setdefault((i, j), []).append(t)
        self._buckets = buckets

    def _bary(self, t, x, y):
        x0, y0, i11, i12, i21, i22 = self._geo[t]
        dx, dy = x - x0, y - y0
        l1 = i11 * dx + i12 * dy
        l2 = i21 * dx + i22 * dy
        return (1.0 - l1 - l2, l1, l2)

    def locate(self, x: float, y: float, hint: int = 0):
        """Containing triangle and clamped barycentric coordinates of ``(x, y)``."""
        t = hint if 0 <= hint < len(self.tris) else 0
        for _ in range(64):
            lam = self._bary(t, x, y)
            k = min(range(3), key=lam.__getitem__)
            if lam[k] >= -1e-12:
                return t, lam
            nxt = self._nbr[t][k]
            if nxt < 0:
                break
            t = nxt
        i = min(max(int((x - self._lo[0]) / self._cell[0]), 0), self._ncell - 1)
        j = min(max(int((y - self._lo[1]) / self._cell[1]), 0), self._ncell - 1)
        best, best_lam, best_min = -1, None, -math.inf
        for di in (0, -1, 1):
            for dj in (0, -1, 1):
                for t in self._buckets.get((i + di, j + dj), ()):
                    lam = self._bary(t, x, y)
                    mn = min(lam)
                    if mn > best_min:
                        best, best_lam, best_min = t, lam, mn
                if best_min >= -1e-12:
                    break
        if best < 0:
            # far outside the background grid; scan everything
            for t in range(len(self.tris)):
                lam = self._bary(t, x, y)
                mn = min(lam)
                if mn > best_min:
                    best, best_lam, best_min = t, lam, mn
        lam = [max(v, 0.0) for v in best_lam]
        s = sum(lam)
        return best, (lam[0] / s, lam[1] / s, lam[2] / s)

    def at(self, x: float, y: float, hint: int = 0):
        """``(tensor, triangle)`` at a point."""
        t, lam = self.locate(x, y, hint)
        a, b, c = self.tris[t]
        la, lb, lc = self.logs[a], self.logs[b], self.logs[c]
        m = _exp_sym(
            lam[0] * la[0] + lam[1] * lb[0] + lam[2] * lc[0],
            lam[0] * la[1] + lam[1] * lb[1] + lam[2] * lc[1],
            lam[0] * la[2] + lam[1] * lb[2] + lam[2] * lc[2],
        )
        return m, t

    def at_points(self, points) -> np.ndarray:
        out = np.empty((len(points), 3))
        hint = 0
        for i, (x, y) in enumerate(np.asarray(points, dtype=float).tolist()):
            m, hint = self.at(x, y, hint)
            out[i] = m
        return out


def _key(a, b):
    return (a, b) if a < b else (b, a)


class WorkingMesh:
    """Mutable triangulation used by the remesher."""

    def __init__(self, mesh: Mesh, background: BackgroundMetric):
        self.bg = background
        self.pts = [list(p) for p in mesh.vertices.tolist()]
        self.alive = [True] * mesh.n_vertices
        self.tris = [list(t) for t in mesh.triangles.tolist()]
        self.reg = mesh.regions.tolist()
        self.vt = [set() for _ in self.pts]
        for t, tri in enumerate(self.tris):
            for v in tri:
                self.vt[v].add(t)
        table = mesh.edge_table
        self.seg: dict[tuple[int, int], tuple[int, bool]] = {}
        for (a, b), tag, cons in zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist(),
                                     mesh.constrained.tolist()):
            e = table.find(a, b)
            if e < 0:
                continue
            if table.is_boundary[e] or cons:
                self.seg[_key(a, b)] = (int(tag), bool(cons))
        for e in np.flatnonzero(table.is_boundary):
            a, b = table.edges[e].tolist()
            self.seg.setdefault(_key(a, b), (int(table.tags[e]), False))
        self.kind = [FREE] * len(self.pts)
        self.line = [None] * len(self.pts)
        self.vol_ref = math.sqrt(3.0) / 4.0  # mean metric volume, refreshed per smoothing pass
        self._classify()
        self.hint = [0] * len(self.pts)
        self.met = []
        vt0 = [next(iter(s)) if s else 0 for s in self.vt]
        for v, (x, y) in enumerate(self.pts):
            # background triangles are indexed like the input triangles
            m, h = background.at(x, y, vt0[v] if background.mesh is mesh else 0)
            self.met.append(m)
            self.hint[v] = h

    # ----------------------------------------------------------- bookkeeping

    def _classify(self):
        inc: dict[int, list[tuple[int, int]]] = {}
        for (a, b), (tag, _) in self.seg.items():
            inc.setdefault(a, []).append((b, tag))
            inc.setdefault(b, []).append((a, tag))
        for v, lst in inc.items():
            if len(lst) != 2 or lst[0][1] != lst[1][1]:
                self.kind[v] = FIXED
                continue
            p = self.pts[v]
            (b, _), (c, _) = lst
            ux, uy = self.pts[b][0] - p[0], self.pts[b][1] - p[1]
            wx, wy = self.pts[c][0] - p[0], self.pts[c][1] - p[1]
            cross = ux * wy - uy * wx
            if abs(cross) > 1e-12 * math.hypot(ux, uy) * math.hypot(wx, wy) or ux * wx + uy * wy > 0:
                self.kind[v] = FIXED
                continue
            n = math.hypot(ux, uy)
            self.kind[v] = SLIDING
            self.line[v] = (ux / n, uy / n)
        for v in range(len(self.pts)):
            if self.kind[v] == FREE and len({self.reg[t] for t in self.vt[v]}) > 1:
                self.kind[v] = FIXED

    def neighbours(self, v):
        out = set()
        for t in self.vt[v]:
            out.update(self.tris[t])
        out.discard(v)
        return out

    def edges(self):
        seen = {}
        for tri in self.tris:
            if tri is None:
                continue
            for k in range(3):
                seen.setdefault(_key(tri[k], tri[(k + 1) % 3]), None)
        return list(seen)

    def length(self, a, b):
        return metric_edge_length(self.pts[a], self.pts[b], self.met[a], self.met[b])

    def tri_quality(self, tri, pts=None, met=None):
        pts = pts or self.pts
        met = met or self.met
        a, b, c = tri
        return _triangle_quality(pts[a], pts[b], pts[c], _mean_metric(met[a], met[b], met[c]))

    def _oriented_third(self, t, a, b):
        """``(u, v, c)``: triangle ``t`` as ccw cycle starting with the edge ``{a, b}``."""
        tri = self.tris[t]
        for k in range(3):
            u, v = tri[k], tri[(k + 1) % 3]
            if {u, v} == {a, b}:
                return u, v, tri[(k + 2) % 3]
        raise KeyError((t, a, b))

    def _add_vertex(self, x, y, hint):
        m, h = self.bg.at(x, y, hint)
        self.pts.append([x, y])
        self.alive.append(True)
        self.vt.append(set())
        self.kind.append(FREE)
        self.line.append(None)
        self.met.append(m)
        self.hint.append(h)
        return len(self.pts) - 1

    # ------------------------------------------------------------ operations

    def split_edge(self, a, b):
        """Insert the midpoint of edge ``(a, b)``; returns the new vertex or -1."""
        shared = self.vt[a] & self.vt[b]
        if not shared:
            return -1
        pa, pb = self.pts[a], self.pts[b]
        m = self._add_vertex(0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]), self.hint[a])
        regions = set()
        for t in sorted(shared):
            u, v, c = self._oriented_third(t, a, b)
            regions.add(self.reg[t])
            self.tris[t] = [u, m, c]
            new = len(self.tris)
            self.tris.append([m, v, c])
            self.reg.append(self.reg[t])
            self.vt[v].discard(t)
            self.vt[v].add(new)
            self.vt[c].add(new)
            self.vt[m].update((t, new))
        k = _key(a, b)
        if k in self.seg:
            tag = self.seg.pop(k)
            self.seg[_key(a, m)] = tag
            self.seg[_key(m, b)] = tag
            self.kind[m] = SLIDING
            n = math.hypot(pb[0] - pa[0], pb[1] - pa[1])
            self.line[m] = ((pb[0] - pa[0]) / n, (pb[1] - pa[1]) / n)
        elif len(regions) > 1:
            self.kind[m] = FIXED
        return m

    def collapse_edge(self, a, b, l_max=math.inf, quality_cap=math.inf):
        """Merge vertex ``a`` into ``b``; returns False (no change) when not allowed."""
        if a == b or not self.alive[a] or not self.alive[b]:
            return False
        if self.kind[a] == FIXED:
            return False
        k = _key(a, b)
        if self.kind[a] == SLIDING and k not in self.seg:
            return False
        shared = self.vt[a] & self.vt[b]
        if not shared or len(shared) > 2:
            return False
        apex = {self._oriented_third(t, a, b)[2] for t in shared}
        if self.neighbours(a) & self.neighbours(b) != apex:
            return False
        if self.kind[a] == FREE and len({self.reg[t] for t in self.vt[a]}) > 1:
            return False
        pb = self.pts[b]
        for w in self.neighbours(a) - {b}:
            if metric_edge_length(pb, self.pts[w], self.met[b], self.met[w]) > l_max:
                return False
        old_worst = max(self.tri_quality(self.tris[t]) for t in self.vt[a])
        cap = max(old_worst, quality_cap)
        for t in self.vt[a] - shared:
            tri = [b if v == a else v for v in self.tris[t]]
            if self.tri_quality(tri) > cap:
                return False
        # commit
        if self.kind[a] == SLIDING:
            segs = [(key, val) for key, val in self.seg.items() if a in key]
            for key, _ in segs:
                del self.seg[key]
            others = [x for key, _ in segs for x in key if x not in (a, b)]
            if others:
                self.seg[_key(b, others[0])] = segs[0][1]
        for t in shared:
            for v in self.tris[t]:
                self.vt[v].discard(t)
            self.tris[t] = None
        for t in list(self.vt[a]):
            self.tris[t] = [b if v == a else v for v in self.tris[t]]
            self.vt[b].add(t)
        self.vt[a] = set()
        self.alive[a] = False
        return True

    def flip_edge(self, a, b, gain=0.0):
        """Swap the diagonal of the quadrilateral around ``(a, b)`` if it improves quality."""
        k = _key(a, b)
        if k in self.seg:
            return False
        shared = sorted(self.vt[a] & self.vt[b])
        if len(shared) != 2:
            return False
        t1, t2 = shared
        if self.reg[t1] != self.reg[t2]:
            return False
        u, v, c = self._oriented_third(t1, a, b)
        _, _, d = self._oriented_third(t2, a, b)
        if d in self.neighbours(c):
            return False
        n1, n2 = [c, u, d], [d, v, c]
        m = _mean_metric(self.met[u], self.met[v], self.met[c], self.met[d])
        p = self.pts
        q_new = max(_triangle_quality(p[n1[0]], p[n1[1]], p[n1[2]], m),
                    _triangle_quality(p[n2[0]], p[n2[1]], p[n2[2]], m))
        if not math.isfinite(q_new):
            return False
        q_old = max(_triangle_quality(p[u], p[v], p[c], m), _triangle_quality(p[v], p[u], p[d], m))
        if q_new >= q_old * (1.0 - gain):
            return False
        self.tris[t1] = n1
        self.tris[t2] = n2
        self.vt[v].discard(t1)
        self.vt[u].discard(t2)
        self.vt[c].add(t2)
        self.vt[d].add(t1)
        return True

    def smooth_vertex(self, v):
        """Move ``v`` towards unit metric distance from its neighbours.

        The move (or a damped version of it) is kept only if it lowers the
        patch energy ``sum vol * Q^2 * vol^2`` without letting the worst
        triangle exceed ``max(old worst, 1.5)``.
        """
        if not self.alive[v] or self.kind[v] == FIXED:
            return False
        p = self.pts[v]
        nb = sorted(self.neighbours(v))
        tx = ty = 0.0
        for j in nb:
            pj = self.pts[j]
            ell = self.length(v, j)
            tx += pj[0] + (p[0] - pj[0]) / ell
            ty += pj[1] + (p[1] - pj[1]) / ell
        dx, dy = tx / len(nb) - p[0], ty / len(nb) - p[1]
        if self.kind[v] == SLIDING:
            dx, dy = self._slide(v, nb, dx, dy)
        old_worst, old_energy = self._patch_score(v)
        cap = max(old_worst, 1.5)
        saved = (self.pts[v], self.met[v])
        for step in (1.0, 0.5, 0.25):
            nx, ny = p[0] + step * dx, p[1] + step * dy
            if self.kind[v] == SLIDING:
                # keep the coordinate across an axis-aligned line exact
                if self.line[v][0] == 0.0:
                    nx = p[0]
                elif self.line[v][1] == 0.0:
                    ny = p[1]
            m, h = self.bg.at(nx, ny, self.hint[v])
            self.pts[v], self.met[v] = [nx, ny], m
            worst, energy = self._patch_score(v)
            if energy <= old_energy and worst <= cap:
                self.hint[v] = h
                return True
            self.pts[v], self.met[v] = saved
        return False

    def _slide(self, v, nb, dx, dy):
        """Project a move onto the constraint line of ``v``, staying between its segment neighbours."""
        p = self.pts[v]
        ux, uy = self.line[v]
        s = dx * ux + dy * uy
        ts = [(self.pts[j][0] - p[0]) * ux + (self.pts[j][1] - p[1]) * uy for j in nb if _key(v, j) in self.seg]
        s = min(max(s, 0.8 * min(ts)), 0.8 * max(ts))
        return s * ux, s * uy

    def _patch_score(self, v):
        worst = 0.0
        energy = 0.0
        ref = self.vol_ref
        for t in self.vt[v]:
            a, b, c = self.tris[t]
            pa, pb, pc = self.pts[a], self.pts[b], self.pts[c]
            m = _mean_metric(self.met[a], self.met[b], self.met[c])
            q = _triangle_quality(pa, pb, pc, m)
            if not math.isfinite(q):
                return math.inf, math.inf
            area = 0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]))
            vol = area * math.sqrt(m[0] * m[2] - m[1] * m[1]) / ref
            worst = max(worst, q)
            energy += vol * q * q * vol * vol
        return worst, energy

    # ----------------------------------------------------------------- passes

    def split_pass(self, l_max):
        count = 0
        for _ in range(64):
            long = [(self.length(a, b), a, b) for a, b in self.edges()]
            long = sorted((x for x in long if x[0] > l_max), key=lambda x: -x[0])
            if not long:
                break
            done = 0
            touched = set()
            for _, a, b in long:
                if a in touched or b in touched:
                    continue
                if self.split_edge(a, b) >= 0:
                    touched.update((a, b))
                    done += 1
            count += done
            if not done:
                break
        return count

    def collapse_pass(self, l_min, l_max, cap):
        short = sorted(((self.length(a, b), a, b) for a, b in self.edges()), key=lambda x: x[0])
        count = 0
        for ell, a, b in short:
            if ell >= l_min:
                break
            if not (self.alive[a] and self.alive[b]) or not (self.vt[a] & self.vt[b]):
                continue
            if self.length(a, b) >= l_min:
                continue
            if self.collapse_edge(a, b, l_max, cap) or self.collapse_edge(b, a, l_max, cap):
                count += 1
        return count

    def flip_pass(self, gain):
        count = 0
        for a, b in self.edges():
            if self.flip_edge(a, b, gain):
                count += 1
        return count

    def smooth_pass(self):
        vols = []
        for tri in self.tris:
            if tri is not None:
                a, b, c = tri
                pa, pb, pc = self.pts[a], self.pts[b], self.pts[c]
                m = _mean_metric(self.met[a], self.met[b], self.met[c])
                area = 0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]))
                vols.append(area * math.sqrt(m[0] * m[2] - m[1] * m[1]))
        self.vol_ref = sum(vols) / len(vols)
        return sum(self.smooth_vertex(v) for v in range(len(self.pts)) if self.alive[v] and self.vt[v])

    def fraction_in_band(self, l_min, l_max):
        ls = [self.length(a, b) for a, b in self.edges()]
        return sum(l_min <= x <= l_max for x in ls) / max(len(ls), 1)

    # ------------------------------------------------------------------ export

    def to_mesh(self) -> Mesh:
        """Compact copy with vertices in reverse Cuthill-McKee order."""
        live = [v for v in range(len(self.pts)) if self.alive[v] and self.vt[v]]
        new_id = {v: i for i, v in enumerate(live)}
        verts = np.array([self.pts[v] for v in live])
        tris = np.array([[new_id[v] for v in tri] for tri in self.tris if tri is not None], dtype=np.int64)
        regs = [self.reg[t] for t, tri in enumerate(self.tris) if tri is not None]
        adj = sp.coo_matrix((np.ones(tris.size * 3), (np.repeat(tris, 3, axis=1).ravel(),
                                                       np.tile(tris, (1, 3)).ravel())),
                            shape=(len(live), len(live))).tocsr()
        perm = np.asarray(reverse_cuthill_mckee(adj, symmetric_mode=True))
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        items = sorted((tuple(sorted((int(inv[new_id[a]]), int(inv[new_id[b]])))), tag, cons)
                       for (a, b), (tag, cons) in self.seg.items())
        bedges = np.array([k for k, _, _ in items], dtype=np.int64).reshape(-1, 2)
        return Mesh(verts[perm], inv[tris], regs, bedges, [t for _, t, _ in items], [c for _, _, c in items])


def expected_element_count(mesh: Mesh, vertex_metric) -> float:
    """Number of unit equilateral metric triangles that fill the domain."""
    from hbadapt.metric import metric_volume, vertex_to_element_metric

    return metric_volume(vertex_to_element_metric(vertex_metric, mesh), mesh) / (math.sqrt(3.0) / 4.0)


def adapt_mesh(mesh: Mesh, vertex_metric, cfg: RemeshConfig | None = None, stats: dict | None = None) -> Mesh:
    """Remesh ``mesh`` so that its edges have unit length in ``vertex_metric``."""
    cfg = cfg or RemeshConfig()
    bg = BackgroundMetric(mesh, vertex_metric)
    work = WorkingMesh(mesh, bg)
    frac = prev = 0.0
    passes = 0
    for passes in range(1, cfg.max_passes + 1):
        ns = work.split_pass(cfg.l_max)
        nc = work.collapse_pass(cfg.l_min, cfg.l_max, cfg.collapse_quality_cap)
        nf = work.flip_pass(cfg.flip_gain)
        for _ in range(cfg.smooth_iterations):
            work.smooth_pass()
        nf += work.flip_pass(cfg.flip_gain)
        frac = work.fraction_in_band(cfg.l_min, cfg.l_max)
        log.debug("pass %d: %d splits, %d collapses, %d flips, %.3f in band", passes, ns, nc, nf, frac)
        # split/collapse pairs near the band edges can cycle forever
        if frac >= cfg.target_fraction and (ns == 0 and nc == 0 or frac <= prev + 1e-4):
            break
        prev = frac
    if frac < cfg.target_fraction:
        warnings.warn(f"remesh reached only {frac:.1%} of edges in the unit band after {passes} passes",
                      RuntimeWarning, stacklevel=2)
    out = work.to_mesh()
    if stats is not None:
        stats.update(passes=passes, fraction_in_band=frac)
    return out


def metric_on_elements(background_mesh: Mesh, vertex_metric, mesh: Mesh) -> np.ndarray:
    """Background metric evaluated at the centroids of ``mesh``."""
    return BackgroundMetric(background_mesh, vertex_metric).at_points(mesh.centroids)
