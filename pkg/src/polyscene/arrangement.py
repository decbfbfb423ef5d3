"""Plane arrangements and convex cell extraction.

The arrangement of n planes partitions space into convex cells, each
identified by a unique sign vector (one side label per plane).  Cells are
built by incremental half-space splitting of a large bounding cube: every
inserted plane splits the cells it crosses, and the two halves share the
cut vertices bitwise so that neighbouring cells carry exactly coincident
facets.  A cell is *bounded* (a candidate polyhedron) when it neither
touches the bounding cube nor has a vertex outside the unit ball.

Cell counts and boundedness for small n are cross-checked in the test
suite against an exhaustive sign-vector oracle built on linear programs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .geom import GEOM_EPS, Plane

# Cells are clipped to this cube; anything reaching it is unbounded for our
# purposes (scene geometry never leaves the unit ball).
BOX_RADIUS = 32.0

# Minimum polygon area for a shared facet to count as adjacency.
FACE_AREA_EPS = 1e-12


class DegenerateArrangement(ValueError):
    """More than half of all plane triples are near-degenerate."""


class NotBounded(ValueError):
    """Operation requires a bounded cell."""


@dataclass
class Face:
    plane_index: int              # < 0 for bounding-box faces
    vertex_indices: list[int]     # ordered cycle
    normal: np.ndarray            # outward unit normal


@dataclass
class Cell:
    sign_vector: tuple[int, ...]  # +1 / -1 per plane
    vertices: np.ndarray          # (V, 3)
    faces: list[Face]
    bounded: bool
    touches_box: bool = False
    index: int = -1

    def interior_point(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def edges(self) -> set[tuple[int, int]]:
        out: set[tuple[int, int]] = set()
        for f in self.faces:
            cyc = f.vertex_indices
            for k in range(len(cyc)):
                a, b = cyc[k], cyc[(k + 1) % len(cyc)]
                out.add((a, b) if a < b else (b, a))
        return out

    def min_edge_length(self) -> float:
        best = math.inf
        for a, b in self.edges():
            best = min(best, float(np.linalg.norm(self.vertices[a] - self.vertices[b])))
        return best


@dataclass
class SharedFace:
    plane_index: int
    area: float
    polygon: np.ndarray           # (K, 3)


@dataclass
class Arrangement:
    planes: list[Plane]
    cells: list[Cell]
    adjacency: dict[tuple[int, int], SharedFace] = field(default_factory=dict)


# --- convex polygon / polytope helpers ----------------------------------------

def _polygon_normal(points) -> tuple[float, float, float]:
    """Newell normal (unnormalized, length = 2 * area)."""
    nx = ny = nz = 0.0
    k = len(points)
    for i in range(k):
        ax, ay, az = points[i]
        bx, by, bz = points[(i + 1) % k]
        nx += (ay - by) * (az + bz)
        ny += (az - bz) * (ax + bx)
        nz += (ax - bx) * (ay + by)
    return (nx, ny, nz)


def _order_convex_cycle(points: list[tuple], outward) -> list[tuple]:
    """Order coplanar points of a convex polygon CCW about ``outward``."""
    nx, ny, nz = float(outward[0]), float(outward[1]), float(outward[2])
    nl = math.sqrt(nx * nx + ny * ny + nz * nz)
    nx, ny, nz = nx / nl, ny / nl, nz / nl
    ax, ay, az = (1.0, 0.0, 0.0) if abs(nx) < 0.9 else (0.0, 1.0, 0.0)
    ux, uy, uz = ny * az - nz * ay, nz * ax - nx * az, nx * ay - ny * ax
    ul = math.sqrt(ux * ux + uy * uy + uz * uz)
    ux, uy, uz = ux / ul, uy / ul, uz / ul
    vx, vy, vz = ny * uz - nz * uy, nz * ux - nx * uz, nx * uy - ny * ux
    k = len(points)
    cx = sum(p[0] for p in points) / k
    cy = sum(p[1] for p in points) / k
    cz = sum(p[2] for p in points) / k
    keyed = []
    for p in points:
        rx, ry, rz = p[0] - cx, p[1] - cy, p[2] - cz
        keyed.append((math.atan2(rx * vx + ry * vy + rz * vz,
                                 rx * ux + ry * uy + rz * uz), p))
    keyed.sort(key=lambda t: t[0])
    return [p for _, p in keyed]


class _Poly:
    """Convex polytope under construction: oriented faces of coordinate
    tuples plus the per-plane sign trail."""

    __slots__ = ("faces", "signs", "varray", "_vlist")

    def __init__(self, faces: list[tuple[int, list[tuple]]], signs: list[int]):
        self.faces = faces
        self.signs = signs
        seen: dict[tuple, None] = {}
        for _, cyc in faces:
            for p in cyc:
                seen.setdefault(p)
        self._vlist = list(seen)
        self.varray = np.asarray(self._vlist)


def _box_poly(r: float) -> _Poly:
    faces = []
    for axis in range(3):
        for s in (-1.0, 1.0):
            pts = []
            for t1 in (-r, r):
                for t2 in (-r, r):
                    p = [0.0, 0.0, 0.0]
                    p[axis] = s * r
                    p[(axis + 1) % 3] = t1
                    p[(axis + 2) % 3] = t2
                    pts.append(tuple(p))
            outward = np.zeros(3)
            outward[axis] = s
            cyc = _order_convex_cycle(pts, outward)
            # box faces get pseudo-indices -1..-6
            faces.append((-(len(faces) + 1), cyc))
    return _Poly(faces, [])


def _dedupe_cycle(cyc: list[tuple]) -> list[tuple]:
    out = []
    for p in cyc:
        if not out or p != out[-1]:
            out.append(p)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


def _split_poly(poly: _Poly, normal: np.ndarray, offset: float,
                plane_index: int, eps: float) -> tuple[_Poly | None, _Poly | None]:
    """Split a convex polytope by plane ``plane_index`` (n.x = offset).

    Returns (plus, minus); one side is None when the plane misses the
    interior.  Cut vertices are computed once per undirected edge and
    shared between both halves, so coincident facets match bitwise.
    """
    dist = {p: float(normal[0] * p[0] + normal[1] * p[1] + normal[2] * p[2] - offset)
            for p in poly._vlist}
    dmin = min(dist.values())
    dmax = max(dist.values())
    if dmin >= -eps:
        return poly, None
    if dmax <= eps:
        return None, poly

    cut_cache: dict[tuple, tuple] = {}

    def cut_point(a: tuple, b: tuple) -> tuple:
        key = (a, b) if a <= b else (b, a)
        got = cut_cache.get(key)
        if got is None:
            p, q = key
            dp, dq = dist[p], dist[q]
            t = dp / (dp - dq)
            got = (p[0] + t * (q[0] - p[0]),
                   p[1] + t * (q[1] - p[1]),
                   p[2] + t * (q[2] - p[2]))
            cut_cache[key] = got
        return got

    plus_faces: list[tuple[int, list[tuple]]] = []
    minus_faces: list[tuple[int, list[tuple]]] = []
    boundary: dict[tuple, None] = {}

    for pidx, cyc in poly.faces:
        plus_cyc: list[tuple] = []
        minus_cyc: list[tuple] = []
        k = len(cyc)
        for i in range(k):
            a, b = cyc[i], cyc[(i + 1) % k]
            da, db = dist[a], dist[b]
            ca = 1 if da > eps else (-1 if da < -eps else 0)
            cb = 1 if db > eps else (-1 if db < -eps else 0)
            if ca >= 0:
                plus_cyc.append(a)
            if ca <= 0:
                minus_cyc.append(a)
            if ca == 0:
                boundary.setdefault(a)
            if ca * cb < 0:
                c = cut_point(a, b)
                plus_cyc.append(c)
                minus_cyc.append(c)
                boundary.setdefault(c)
        plus_cyc = _dedupe_cycle(plus_cyc)
        minus_cyc = _dedupe_cycle(minus_cyc)
        if len(plus_cyc) >= 3:
            plus_faces.append((pidx, plus_cyc))
        if len(minus_cyc) >= 3:
            minus_faces.append((pidx, minus_cyc))

    cap_pts = list(boundary)
    if len(cap_pts) < 3 or not plus_faces or not minus_faces:
        # numerically too thin to split; fall back to the majority side
        return (poly, None) if abs(dmax) >= abs(dmin) else (None, poly)

    cap = _order_convex_cycle(cap_pts, normal)
    plus_faces.append((plane_index, list(reversed(cap))))   # outward -n
    minus_faces.append((plane_index, list(cap)))            # outward +n
    return (_Poly(plus_faces, poly.signs + [1]),
            _Poly(minus_faces, poly.signs + [-1]))


def _finalize_cell(poly: _Poly, cell_index: int) -> Cell:
    vindex = {p: i for i, p in enumerate(poly._vlist)}
    vertices = np.asarray(poly._vlist, dtype=np.float64)
    cx, cy, cz = vertices.mean(axis=0)
    faces: list[Face] = []
    touches_box = False
    for pidx, cyc in poly.faces:
        if pidx < 0:
            touches_box = True
        nx, ny, nz = _polygon_normal(cyc)
        nl = math.sqrt(nx * nx + ny * ny + nz * nz)
        if nl < FACE_AREA_EPS:
            continue
        nx, ny, nz = nx / nl, ny / nl, nz / nl
        k = len(cyc)
        fx = sum(p[0] for p in cyc) / k - cx
        fy = sum(p[1] for p in cyc) / k - cy
        fz = sum(p[2] for p in cyc) / k - cz
        idxs = [vindex[p] for p in cyc]
        if nx * fx + ny * fy + nz * fz < 0.0:
            idxs.reverse()
            nx, ny, nz = -nx, -ny, -nz
        faces.append(Face(pidx, idxs, np.array([nx, ny, nz])))
    n_max = np.sqrt((vertices * vertices).sum(axis=1)).max() if len(vertices) else np.inf
    bounded = (not touches_box) and bool(n_max <= 1.0)
    return Cell(tuple(poly.signs), vertices, faces, bounded, touches_box, cell_index)


def degenerate_triple_fraction(planes: list[Plane], tol: float = GEOM_EPS) -> float:
    """Fraction of plane triples whose normal matrix is near-singular.

    Triples containing a parallel plane pair are not counted: parallel
    structure is legal (those triples simply yield no vertex), whereas a
    near-singular triple of pairwise non-parallel planes sends its vertex
    toward infinity and marks numerically hostile input.
    """
    n = len(planes)
    if n < 3:
        return 0.0
    normals = np.asarray([p.normal for p in planes])
    crosses = np.cross(normals[:, None, :], normals[None, :, :])
    parallel = np.linalg.norm(crosses, axis=2) <= tol
    np.fill_diagonal(parallel, False)
    triples = np.asarray(list(itertools.combinations(range(n), 3)))
    total = len(triples)
    bad = 0
    chunk = 200_000
    for a in range(0, total, chunk):
        t = triples[a:a + chunk]
        has_parallel = (parallel[t[:, 0], t[:, 1]]
                        | parallel[t[:, 0], t[:, 2]]
                        | parallel[t[:, 1], t[:, 2]])
        dets = np.linalg.det(normals[t])
        bad += int(((np.abs(dets) <= tol) & ~has_parallel).sum())
    return bad / total


def build_arrangement(planes: list[Plane], tol: float = GEOM_EPS,
                      clip_radius: float = BOX_RADIUS) -> Arrangement:
    """Partition space by ``planes`` into convex sign-vector cells.

    ``clip_radius`` sets the half-width of the clipping cube.  With the
    default every sign-vector region near the scene is materialized; scene
    generation passes a radius just above 1 so that regions entirely
    outside the unit ball (never candidate polyhedra) are merged into the
    clipped boundary cells, which is substantially faster for many planes.

    Raises DegenerateArrangement when more than half of all plane triples
    are near-parallel (pathological input; random planes never trip this).
    """
    if not planes:
        raise ValueError("need at least one plane")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if clip_radius <= 1.0:
        raise ValueError("clip_radius must exceed the unit ball")
    if len(planes) >= 3 and degenerate_triple_fraction(planes, tol) > 0.5:
        raise DegenerateArrangement(
            "more than 50% of plane triples are degenerate")

    polys = [_box_poly(clip_radius)]
    for i, pl in enumerate(planes):
        nvec = np.asarray(pl.normal, dtype=np.float64)
        d = pl.offset
        # vectorized min/max signed distance per polytope
        counts = np.fromiter((len(p._vlist) for p in polys), dtype=np.int64,
                             count=len(polys))
        cat = np.concatenate([p.varray for p in polys], axis=0)
        dists = cat @ nvec - d
        offsets = np.zeros(len(polys), dtype=np.int64)
        np.cumsum(counts[:-1], out=offsets[1:])
        mins = np.minimum.reduceat(dists, offsets)
        maxs = np.maximum.reduceat(dists, offsets)

        next_polys: list[_Poly] = []
        for k, poly in enumerate(polys):
            if mins[k] >= -tol:
                poly.signs.append(1)
                next_polys.append(poly)
            elif maxs[k] <= tol:
                poly.signs.append(-1)
                next_polys.append(poly)
            else:
                plus, minus = _split_poly(poly, nvec, d, i, tol)
                if plus is not None and minus is not None:
                    next_polys.append(plus)
                    next_polys.append(minus)
                else:
                    kept = plus if plus is not None else minus
                    kept.signs.append(1 if plus is not None else -1)
                    next_polys.append(kept)
        polys = next_polys

    cells = [_finalize_cell(p, idx) for idx, p in enumerate(polys)]
    arr = Arrangement(list(planes), cells)
    arr.adjacency = cell_adjacency(arr)
    return arr


def bounded_cells(arr: Arrangement) -> list[Cell]:
    """Cells that form closed polyhedra inside the unit ball."""
    return [c for c in arr.cells if c.bounded]


def cell_volume(cell: Cell) -> float:
    """Volume by the divergence theorem over fan-triangulated faces."""
    if not cell.bounded:
        raise NotBounded("cell_volume requires a bounded cell")
    v = cell.vertices
    total = 0.0
    for f in cell.faces:
        idx = f.vertex_indices
        a = v[idx[0]]
        for k in range(1, len(idx) - 1):
            b = v[idx[k]]
            c = v[idx[k + 1]]
            total += float(np.dot(a, np.cross(b, c)))
    return total / 6.0


def face_polygon(cell: Cell, face: Face) -> np.ndarray:
    return cell.vertices[face.vertex_indices]


def face_area(cell: Cell, face: Face) -> float:
    nx, ny, nz = _polygon_normal([tuple(p) for p in face_polygon(cell, face)])
    return math.sqrt(nx * nx + ny * ny + nz * nz) / 2.0


def cell_adjacency(arr: Arrangement) -> dict[tuple[int, int], SharedFace]:
    """Face adjacency between bounded cells.

    Two bounded cells are adjacent iff their sign vectors differ in exactly
    one plane and both carry a positive-area facet on it (such facets
    coincide by construction).
    """
    bc = [c for c in arr.cells if c.bounded]
    by_sign = {c.sign_vector: c for c in bc}
    adj: dict[tuple[int, int], SharedFace] = {}
    for a in bc:
        sv = a.sign_vector
        for f in a.faces:
            k = f.plane_index
            if k < 0:
                continue
            flipped = sv[:k] + (-sv[k],) + sv[k + 1:]
            b = by_sign.get(flipped)
            if b is None or b.index <= a.index:
                continue
            fb = next((g for g in b.faces if g.plane_index == k), None)
            if fb is None:
                continue
            area = face_area(a, f)
            if area > FACE_AREA_EPS and face_area(b, fb) > FACE_AREA_EPS:
                adj[(a.index, b.index)] = SharedFace(k, area, face_polygon(a, f).copy())
    return adj


def point_in_cell(cell: Cell, p: np.ndarray, tol: float = GEOM_EPS) -> bool:
    """True iff ``p`` lies on the inner side of every face plane."""
    if not cell.bounded:
        raise NotBounded("point_in_cell requires a bounded cell")
    p = np.asarray(p, dtype=np.float64)
    for f in cell.faces:
        v0 = cell.vertices[f.vertex_indices[0]]
        if float(np.dot(f.normal, p - v0)) > tol:
            return False
    return True
