"""Scene synthesis: user parameters to generator parameters, solid-cell
selection, object grouping per layout, and the retry loop that lands on
the requested object count.

Layout semantics (user facing):

* ``separate``     -- solid cells must not touch at all (no shared face,
                      edge or vertex); one object per cell.
* ``touching``     -- one object per solid cell, contact allowed; a scene
                      only counts as touching when contact actually occurs
                      (vacuously satisfied for a single object).
* ``intersecting`` -- face-connected solid cells merge into one object
                      with a single (possibly non-convex) boundary mesh;
                      at least one object must span two or more cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import arrangement as arr_mod
from .arrangement import Arrangement, Cell, DegenerateArrangement, cell_volume
from .geom import RngStream, sample_plane

# Clip radius used during generation: regions entirely outside the unit
# ball can never become polyhedra, so they need not be materialized.
GEN_CLIP_RADIUS = 1.125

# Slivers render as artifacts and destabilize OBJ export.
MIN_SOLID_VOLUME = 1e-9
MIN_SOLID_EDGE = 1e-6

# Contact tolerance: cells of one arrangement share vertices exactly
# (up to clipping round-off), anything below this is the same point.
CONTACT_TOL = 1e-7

MAX_OBJECTS = 200


class Layout(str, Enum):
    SEPARATE = "separate"
    TOUCHING = "touching"
    INTERSECTING = "intersecting"


class LightingMode(str, Enum):
    FIXED_SPOTLIGHT = "fixed"
    HOMOGENEOUS = "homogeneous"


class LayoutViolation(Exception):
    """Solid cells contradict the requested layout; resample."""


class Unsatisfiable(ValueError):
    """Requested object count is beyond the generator's documented cap."""


class GenerationExhausted(RuntimeError):
    def __init__(self, target: int, closest: int, attempts: int):
        super().__init__(
            f"no scene with {target} objects after {attempts} attempts "
            f"(closest attempt had {closest})")
        self.target = target
        self.closest = closest
        self.attempts = attempts


@dataclass(frozen=True)
class UserParams:
    num_objects: int
    layout: Layout = Layout.SEPARATE
    lighting: LightingMode = LightingMode.FIXED_SPOTLIGHT
    num_views: int = 1

    def __post_init__(self):
        if self.num_objects < 1:
            raise ValueError("num_objects must be >= 1")
        if self.num_views < 1:
            raise ValueError("num_views must be >= 1")


@dataclass
class GenParams:
    num_planes: int
    prob_intersection: float
    max_attempts: int = 100

    def __post_init__(self):
        if not 4 <= self.num_planes <= 200:
            raise ValueError("num_planes must be in [4, 200]")
        if not 0.0 <= self.prob_intersection <= 1.0:
            raise ValueError("prob_intersection must be in [0, 1]")


@dataclass
class SceneObject:
    cells: list[Cell]
    vertices: np.ndarray        # (V, 3)
    triangles: np.ndarray       # (T, 3) int


@dataclass
class Scene:
    objects: list[SceneObject]
    user_params: UserParams | None = None
    gen_params: GenParams | None = None
    seed: int | None = None
    attempts: int = 0
    source: str = "generated"
    source_name: str = ""
    id: str | None = None

    @property
    def num_objects(self) -> int:
        return len(self.objects)


# --- meshes --------------------------------------------------------------------

def weld_vertices(points: np.ndarray, tol: float = CONTACT_TOL):
    """Merge points closer than ``tol``; returns (unique, index_map).

    Uses a floor grid with neighbour lookup so that near-boundary pairs
    cannot land in different buckets.
    """
    points = np.asarray(points, dtype=np.float64)
    cell = tol * 4.0
    grid: dict[tuple[int, int, int], list[int]] = {}
    unique: list[np.ndarray] = []
    index_map = np.empty(len(points), dtype=np.int64)
    for i, p in enumerate(points):
        key = (int(math.floor(p[0] / cell)),
               int(math.floor(p[1] / cell)),
               int(math.floor(p[2] / cell)))
        found = -1
        for dx in (-1, 0, 1):
            if found >= 0:
                break
            for dy in (-1, 0, 1):
                if found >= 0:
                    break
                for dz in (-1, 0, 1):
                    for j in grid.get((key[0] + dx, key[1] + dy, key[2] + dz), ()):
                        q = unique[j]
                        if (abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol
                                and abs(p[2] - q[2]) <= tol):
                            found = j
                            break
                    if found >= 0:
                        break
        if found < 0:
            found = len(unique)
            unique.append(p)
            grid.setdefault(key, []).append(found)
        index_map[i] = found
    return np.asarray(unique), index_map


def build_object_mesh(cells: list[Cell], arrangement: Arrangement) -> SceneObject:
    """Boundary mesh of a union of face-connected cells.

    Facets shared by two member cells are interior and dropped; remaining
    faces are fan-triangulated with their outward orientation and the
    vertices welded across cells, which leaves a closed orientable mesh.
    """
    members = {c.index for c in cells}
    internal: set[tuple[int, int]] = set()
    for (i, j), shared in arrangement.adjacency.items():
        if i in members and j in members:
            internal.add((i, shared.plane_index))
            internal.add((j, shared.plane_index))

    raw_pts: list[np.ndarray] = []
    raw_tris: list[tuple[int, int, int]] = []
    for c in cells:
        for f in c.faces:
            if (c.index, f.plane_index) in internal:
                continue
            idx = f.vertex_indices
            base = len(raw_pts)
            raw_pts.extend(c.vertices[k] for k in idx)
            for k in range(1, len(idx) - 1):
                raw_tris.append((base, base + k, base + k + 1))
    if not raw_pts:
        return SceneObject(list(cells), np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    verts, remap = weld_vertices(np.asarray(raw_pts))
    tris = np.asarray([(remap[a], remap[b], remap[c]) for a, b, c in raw_tris],
                      dtype=np.int64)
    # degenerate triangles can only appear if welding collapsed an edge
    keep = (tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) & (tris[:, 0] != tris[:, 2])
    return SceneObject(list(cells), verts, tris[keep])


def mesh_volume(vertices: np.ndarray, triangles: np.ndarray) -> float:
    """Signed volume of a closed outward-oriented triangle mesh."""
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def mesh_is_watertight(triangles: np.ndarray) -> bool:
    """Every undirected edge borders exactly two triangles."""
    edges: dict[tuple[int, int], int] = {}
    for t in triangles:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (a, b) if a < b else (b, a)
            edges[key] = edges.get(key, 0) + 1
    return bool(edges) and all(v == 2 for v in edges.values())


# --- contact structure ------------------------------------------------------------

def _cells_touch(a: Cell, b: Cell) -> bool:
    """Definitional contact test: any pair of vertices within tolerance.

    Cells of one arrangement meet in a shared complex face, which always
    includes shared vertices, so vertex proximity is a complete test.
    """
    for p in a.vertices:
        d = np.abs(b.vertices - p).max(axis=1)
        if d.min() <= CONTACT_TOL:
            return True
    return False


def contact_pairs(arrangement: Arrangement) -> frozenset[tuple[int, int]]:
    """Pairs of bounded-cell indices sharing at least one (welded) vertex.

    Face-adjacent cells are included (facet corners are shared), as are
    edge- and corner-contacts.  Cached on the arrangement.
    """
    cached = getattr(arrangement, "_contact_pairs", None)
    if cached is not None:
        return cached
    bc = arr_mod.bounded_cells(arrangement)
    pts = []
    owner = []
    for c in bc:
        pts.extend(c.vertices)
        owner.extend([c.index] * len(c.vertices))
    pairs: set[tuple[int, int]] = set()
    if pts:
        _, remap = weld_vertices(np.asarray(pts))
        by_vertex: dict[int, list[int]] = {}
        for w, cell_idx in zip(remap, owner):
            by_vertex.setdefault(int(w), []).append(cell_idx)
        for cells in by_vertex.values():
            uniq = sorted(set(cells))
            for i in range(len(uniq)):
                for j in range(i + 1, len(uniq)):
                    pairs.add((uniq[i], uniq[j]))
    result = frozenset(pairs)
    arrangement._contact_pairs = result
    return result


def _contact_within(indices: set[int], pairs: frozenset[tuple[int, int]]) -> bool:
    k = len(indices)
    if k * (k - 1) // 2 <= len(pairs):
        ordered = sorted(indices)
        for i in range(k):
            for j in range(i + 1, k):
                if (ordered[i], ordered[j]) in pairs:
                    return True
        return False
    return any(a in indices and b in indices for a, b in pairs)


# --- solid selection and grouping ------------------------------------------------

def solid_candidates(arrangement: Arrangement) -> list[Cell]:
    """Bounded cells fit to become scene solids (slivers filtered)."""
    out = []
    for c in arr_mod.bounded_cells(arrangement):
        if cell_volume(c) < MIN_SOLID_VOLUME:
            continue
        if c.min_edge_length() < MIN_SOLID_EDGE:
            continue
        out.append(c)
    return out


def select_solids(cells: list[Cell], p: float, rng: RngStream) -> list[Cell]:
    """Independent Bernoulli(p) selection over the candidate cells."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    return [c for c in cells if rng.random() < p]


def group_solids(solids: list[Cell], arrangement: Arrangement,
                 layout: Layout) -> list[list[Cell]]:
    """Partition solid cells into per-object cell groups for the layout.

    Raises LayoutViolation for ``separate`` scenes with touching solids.
    """
    layout = Layout(layout)
    if layout == Layout.INTERSECTING:
        # connected components under face adjacency
        index = {c.index: k for k, c in enumerate(solids)}
        parent = list(range(len(solids)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for (i, j) in arrangement.adjacency:
            if i in index and j in index:
                ri, rj = find(index[i]), find(index[j])
                if ri != rj:
                    parent[ri] = rj
        groups: dict[int, list[Cell]] = {}
        for k, c in enumerate(solids):
            groups.setdefault(find(k), []).append(c)
        return [groups[r] for r in sorted(groups, key=lambda r: groups[r][0].index)]

    if layout == Layout.SEPARATE:
        idxset = {c.index for c in solids}
        if _contact_within(idxset, contact_pairs(arrangement)):
            raise LayoutViolation("solid cells touch in a separate-layout scene")
    return [[c] for c in solids]


def assemble_objects(solids: list[Cell], arrangement: Arrangement,
                     layout: Layout) -> list[SceneObject]:
    groups = group_solids(solids, arrangement, layout)
    return [build_object_mesh(g, arrangement) for g in groups]


def classify_layout(objects: list[SceneObject],
                    arrangement: Arrangement | None = None) -> Layout:
    """Most specific layout class the objects exhibit.

    Cell-less (imported) objects are classified by mesh-vertex contact;
    they never classify as intersecting.
    """
    if any(len(o.cells) >= 2 for o in objects):
        return Layout.INTERSECTING
    if arrangement is not None and all(o.cells for o in objects):
        idxset = {o.cells[0].index for o in objects}
        if _contact_within(idxset, contact_pairs(arrangement)):
            return Layout.TOUCHING
        return Layout.SEPARATE
    for i in range(len(objects)):
        for j in range(i + 1, len(objects)):
            a, b = objects[i], objects[j]
            if len(a.vertices) and len(b.vertices):
                for p in a.vertices:
                    if np.abs(b.vertices - p).max(axis=1).min() <= CONTACT_TOL:
                        return Layout.TOUCHING
    return Layout.SEPARATE


def _layout_accepts(user: UserParams, classified: Layout) -> bool:
    if classified == user.layout:
        return True
    # a single object cannot touch anything; accept the vacuous case
    return (user.layout == Layout.TOUCHING and user.num_objects == 1
            and classified == Layout.SEPARATE)


# --- parameter conversion ---------------------------------------------------------

def convert_params(user: UserParams) -> GenParams:
    """Initial (num_planes, prob_intersection) estimate for a target count.

    Backed by the packaged calibration table; see ``polyscene.calibration``
    for how it is produced and refreshed.
    """
    from .calibration import lookup_start_params
    if user.num_objects > MAX_OBJECTS:
        raise Unsatisfiable(
            f"num_objects {user.num_objects} exceeds the supported cap {MAX_OBJECTS}")
    n, p = lookup_start_params(user.num_objects, user.layout)
    return GenParams(num_planes=n, prob_intersection=p)


def generate_scene(user: UserParams, seed: int, max_attempts: int = 100) -> Scene:
    """Sample scenes until one has exactly the requested object count and
    layout; deterministic given (user, seed).

    Between attempts an adaptive controller nudges the generator: too many
    objects shrinks the solid probability (x0.8), too few adds two planes.
    """
    gp = convert_params(user)
    n, p = gp.num_planes, gp.prob_intersection
    closest = -1
    for attempt in range(max_attempts):
        rng = RngStream(seed, (attempt,))
        planes = [sample_plane(rng) for _ in range(n)]
        try:
            arrangement = arr_mod.build_arrangement(planes, clip_radius=GEN_CLIP_RADIUS)
        except DegenerateArrangement:
            continue
        candidates = solid_candidates(arrangement)
        solids = select_solids(candidates, p, rng)
        count = len(solids)
        groups = None
        try:
            groups = group_solids(solids, arrangement, user.layout)
            count = len(groups)
        except LayoutViolation:
            pass
        if closest < 0 or abs(count - user.num_objects) < abs(closest - user.num_objects):
            closest = count
        if groups is not None and count == user.num_objects:
            objects = [build_object_mesh(g, arrangement) for g in groups]
            if _layout_accepts(user, classify_layout(objects, arrangement)):
                return Scene(objects=objects, user_params=user,
                             gen_params=GenParams(n, p, max_attempts),
                             seed=seed, attempts=attempt + 1)
        if count > user.num_objects:
            p = max(0.0005, p * 0.8)
        elif count < user.num_objects:
            n = min(200, n + 2)
    raise GenerationExhausted(user.num_objects, closest, max_attempts)
