"""Independent oracles used to freeze expected values.

Everything here is deliberately written against different machinery than
the library paths it checks: sign-vector regions come from linear
programs, boundedness from recession-cone candidate directions, volumes
from Monte-Carlo counting, and ray visibility from a plane-then-barycentric
intersection test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog

# chi2.ppf(0.999, 7), frozen
CHI2_7_ALPHA_001 = 24.321886347856854


def chi_square_stat(counts, probs=None) -> float:
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    k = len(counts)
    expected = n * (np.full(k, 1.0 / k) if probs is None else np.asarray(probs))
    return float(((counts - expected) ** 2 / expected).sum())


def octant_counts(points) -> np.ndarray:
    pts = np.asarray(points)
    idx = (pts[:, 0] > 0).astype(int) * 4 + (pts[:, 1] > 0).astype(int) * 2 \
        + (pts[:, 2] > 0).astype(int)
    return np.bincount(idx, minlength=8)


def latitude_band_counts(points, bands: int = 8) -> np.ndarray:
    """Counts over equal-area latitude bands (uniform z slices)."""
    z = np.asarray(points)[:, 2]
    idx = np.clip(((z + 1.0) / 2.0 * bands).astype(int), 0, bands - 1)
    return np.bincount(idx, minlength=bands)


# --- sign-vector region oracle -------------------------------------------------

def _region_matrix(planes, signs):
    a = np.array([s * np.asarray(p.normal) for s, p in zip(signs, planes)])
    b = np.array([s * p.offset for s, p in zip(signs, planes)])
    return a, b


def region_nonempty(planes, signs, margin: float = 1e-7, box: float = 1e5) -> bool:
    """Open region {x : s_i(n_i . x - d_i) > 0} nonempty, by Chebyshev LP."""
    a, b = _region_matrix(planes, signs)
    # maximize r subject to a x - r >= b, r <= 1
    c = np.array([0.0, 0.0, 0.0, -1.0])
    a_ub = np.hstack([-a, np.ones((len(b), 1))])
    res = linprog(c, A_ub=a_ub, b_ub=-b,
                  bounds=[(-box, box)] * 3 + [(None, 1.0)], method="highs")
    return bool(res.status == 0 and -res.fun > margin)


def region_bounded(planes, signs, tol: float = 1e-9) -> bool:
    """Boundedness via the recession cone {d : s_i n_i . d >= 0}.

    The cone is nontrivial iff one of the candidate directions (pairwise
    normal cross products and the normals themselves) lies in it; this is
    exact in general position.
    """
    a, _ = _region_matrix(planes, signs)
    n = len(a)
    cands = []
    for i in range(n):
        cands.append(a[i])
        cands.append(-a[i])
        for j in range(i + 1, n):
            c = np.cross(a[i], a[j])
            cands.append(c)
            cands.append(-c)
    for d in cands:
        nl = np.linalg.norm(d)
        if nl < tol:
            continue
        d = d / nl
        if np.all(a @ d >= -tol):
            return False
    return True


def region_vertices(planes, signs, tol: float = 1e-7):
    """Triple-intersection points lying in the region's closure."""
    a, b = _region_matrix(planes, signs)
    verts = []
    for i, j, k in itertools.combinations(range(len(planes)), 3):
        m = a[[i, j, k]]
        if abs(np.linalg.det(m)) <= 1e-12:
            continue
        x = np.linalg.solve(m, b[[i, j, k]])
        if np.all(a @ x >= b - tol):
            verts.append(x)
    return verts


def enumerate_regions(planes):
    """All realized sign vectors with their boundedness and ball status."""
    n = len(planes)
    out = []
    for signs in itertools.product((1, -1), repeat=n):
        if not region_nonempty(planes, signs):
            continue
        bounded = region_bounded(planes, signs)
        in_ball = False
        if bounded:
            verts = region_vertices(planes, signs)
            in_ball = (len(verts) >= 4
                       and all(np.linalg.norm(v) <= 1.0 for v in verts))
        out.append((signs, bounded, bounded and in_ball))
    return out


def oracle_bounded_sign_vectors(planes) -> set[tuple[int, ...]]:
    """Sign vectors of bounded-in-ball regions (candidate polyhedra)."""
    return {s for s, _, ok in enumerate_regions(planes) if ok}


def sign_vector_of_point(planes, p) -> tuple[int, ...]:
    return tuple(1 if np.dot(pl.normal, p) - pl.offset >= 0 else -1
                 for pl in planes)


# --- Monte-Carlo volume ---------------------------------------------------------

def monte_carlo_volume(cell, rng, n_samples: int = 100_000):
    """(estimate, sigma) for a bounded cell by box counting."""
    lo = cell.vertices.min(axis=0)
    hi = cell.vertices.max(axis=0)
    span = hi - lo
    box_vol = float(np.prod(span))
    pts = lo + rng.random((n_samples, 3)) * span
    normals = np.array([f.normal for f in cell.faces])
    anchors = np.array([cell.vertices[f.vertex_indices[0]] for f in cell.faces])
    inside = np.ones(n_samples, dtype=bool)
    for nv, av in zip(normals, anchors):
        inside &= (pts - av) @ nv <= 1e-12
    p_hat = inside.mean()
    est = p_hat * box_vol
    sigma = box_vol * math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / n_samples)
    return est, sigma


# --- brute-force ray visibility --------------------------------------------------

def ray_hits_triangle(origin, direction, a, b, c, eps: float = 1e-9) -> bool:
    """Plane intersection followed by a barycentric inside test."""
    n = np.cross(b - a, c - a)
    denom = np.dot(n, direction)
    if abs(denom) < 1e-14:
        return False
    t = np.dot(n, a - origin) / denom
    if t <= 1e-7:
        return False
    p = origin + t * direction
    # barycentric coordinates via the 2x2 system
    v0 = b - a
    v1 = c - a
    v2 = p - a
    d00 = np.dot(v0, v0)
    d01 = np.dot(v0, v1)
    d11 = np.dot(v1, v1)
    d20 = np.dot(v2, v0)
    d21 = np.dot(v2, v1)
    den = d00 * d11 - d01 * d01
    if abs(den) < 1e-18:
        return False
    u = (d11 * d20 - d01 * d21) / den
    v = (d00 * d21 - d01 * d20) / den
    return u >= -eps and v >= -eps and u + v <= 1.0 + eps


def ray_hits_any(origin, direction, vertices, triangles) -> bool:
    for i0, i1, i2 in triangles:
        if ray_hits_triangle(origin, direction,
                             vertices[i0], vertices[i1], vertices[i2]):
            return True
    return False
