"""Ray-triangle intersection kernels.

Two interchangeable backends compute identical results:

* ``numba`` -- @njit compiled scalar loops (parallel over rays), the default
  whenever numba imports.
* ``numpy`` -- chunked vectorized fallback.

The backend is selected once at import time from the environment variable
``POLYSCENE_BACKEND`` (``auto`` | ``numba`` | ``numpy``, default ``auto``).
Both paths evaluate the Moller-Trumbore formulas in the same operation
order, so images rendered through either backend are bit-identical;
``benchmarks/benchmark_render.py`` compares their throughput.
"""

from __future__ import annotations

import os

import numpy as np

# Degenerate-triangle determinant cutoff and barycentric edge slack.  The
# slack keeps rays that graze a shared triangle edge from slipping between
# the two triangles.
DET_EPS = 1e-12
BARY_EPS = 1e-9
T_MIN = 1e-7

_REQUESTED = os.environ.get("POLYSCENE_BACKEND", "auto").lower()
if _REQUESTED not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"POLYSCENE_BACKEND must be auto, numba or numpy, got {_REQUESTED!r}")


def _have_numba() -> bool:
    try:
        import numba  # noqa: F401
        return True
    except ImportError:
        return False


HAVE_NUMBA = _have_numba()
if _REQUESTED == "numba" and not HAVE_NUMBA:
    raise ImportError("POLYSCENE_BACKEND=numba but numba is not importable")

ACTIVE_BACKEND = "numpy" if (_REQUESTED == "numpy" or not HAVE_NUMBA) else "numba"


# --- numpy implementation -----------------------------------------------------

def _nearest_hit_numpy(origin, dirs, v0, e1, e2):
    n = dirs.shape[0]
    m = v0.shape[0]
    t_out = np.full(n, np.inf)
    idx_out = np.full(n, -1, dtype=np.int64)
    if m == 0 or n == 0:
        return t_out, idx_out
    # tvec and qvec depend only on the (shared) origin.
    tv = origin[None, :] - v0
    qx = tv[:, 1] * e1[:, 2] - tv[:, 2] * e1[:, 1]
    qy = tv[:, 2] * e1[:, 0] - tv[:, 0] * e1[:, 2]
    qz = tv[:, 0] * e1[:, 1] - tv[:, 1] * e1[:, 0]
    chunk = max(1, 2_000_000 // m)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for a in range(0, n, chunk):
            d = dirs[a:a + chunk]
            px = d[:, 1:2] * e2[None, :, 2] - d[:, 2:3] * e2[None, :, 1]
            py = d[:, 2:3] * e2[None, :, 0] - d[:, 0:1] * e2[None, :, 2]
            pz = d[:, 0:1] * e2[None, :, 1] - d[:, 1:2] * e2[None, :, 0]
            det = e1[None, :, 0] * px + e1[None, :, 1] * py + e1[None, :, 2] * pz
            ok = np.abs(det) >= DET_EPS
            inv = 1.0 / det
            u = (tv[None, :, 0] * px + tv[None, :, 1] * py + tv[None, :, 2] * pz) * inv
            ok &= (u >= -BARY_EPS) & (u <= 1.0 + BARY_EPS)
            v = (d[:, 0:1] * qx[None, :] + d[:, 1:2] * qy[None, :]
                 + d[:, 2:3] * qz[None, :]) * inv
            ok &= (v >= -BARY_EPS) & (u + v <= 1.0 + BARY_EPS)
            t = (e2[None, :, 0] * qx[None, :] + e2[None, :, 1] * qy[None, :]
                 + e2[None, :, 2] * qz[None, :]) * inv
            ok &= t > T_MIN
            t = np.where(ok, t, np.inf)
            best = np.argmin(t, axis=1)
            rows = np.arange(t.shape[0])
            best_t = t[rows, best]
            hit = np.isfinite(best_t)
            t_out[a:a + chunk][hit] = best_t[hit]
            idx_out[a:a + chunk][hit] = best[hit]
    return t_out, idx_out


def _any_hit_numpy(origins, dirs, tmax, v0, e1, e2):
    n = dirs.shape[0]
    m = v0.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    if m == 0 or n == 0:
        return out
    chunk = max(1, 2_000_000 // m)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for a in range(0, n, chunk):
            o = origins[a:a + chunk]
            d = dirs[a:a + chunk]
            tm = tmax[a:a + chunk]
            px = d[:, 1:2] * e2[None, :, 2] - d[:, 2:3] * e2[None, :, 1]
            py = d[:, 2:3] * e2[None, :, 0] - d[:, 0:1] * e2[None, :, 2]
            pz = d[:, 0:1] * e2[None, :, 1] - d[:, 1:2] * e2[None, :, 0]
            det = e1[None, :, 0] * px + e1[None, :, 1] * py + e1[None, :, 2] * pz
            ok = np.abs(det) >= DET_EPS
            inv = 1.0 / det
            tvx = o[:, 0:1] - v0[None, :, 0]
            tvy = o[:, 1:2] - v0[None, :, 1]
            tvz = o[:, 2:3] - v0[None, :, 2]
            u = (tvx * px + tvy * py + tvz * pz) * inv
            ok &= (u >= -BARY_EPS) & (u <= 1.0 + BARY_EPS)
            qx = tvy * e1[None, :, 2] - tvz * e1[None, :, 1]
            qy = tvz * e1[None, :, 0] - tvx * e1[None, :, 2]
            qz = tvx * e1[None, :, 1] - tvy * e1[None, :, 0]
            v = (d[:, 0:1] * qx + d[:, 1:2] * qy + d[:, 2:3] * qz) * inv
            ok &= (v >= -BARY_EPS) & (u + v <= 1.0 + BARY_EPS)
            t = (e2[None, :, 0] * qx + e2[None, :, 1] * qy + e2[None, :, 2] * qz) * inv
            ok &= (t > T_MIN) & (t < tm[:, None])
            out[a:a + chunk] = ok.any(axis=1)
    return out


# --- numba implementation -----------------------------------------------------

if HAVE_NUMBA:
    from numba import njit, prange

    @njit(cache=True, parallel=True)
    def _nearest_hit_numba(origin, dirs, v0, e1, e2):  # pragma: no cover - jit
        n = dirs.shape[0]
        m = v0.shape[0]
        t_out = np.full(n, np.inf)
        idx_out = np.full(n, -1, dtype=np.int64)
        ox, oy, oz = origin[0], origin[1], origin[2]
        for i in prange(n):
            dx, dy, dz = dirs[i, 0], dirs[i, 1], dirs[i, 2]
            best_t = np.inf
            best_j = -1
            for j in range(m):
                px = dy * e2[j, 2] - dz * e2[j, 1]
                py = dz * e2[j, 0] - dx * e2[j, 2]
                pz = dx * e2[j, 1] - dy * e2[j, 0]
                det = e1[j, 0] * px + e1[j, 1] * py + e1[j, 2] * pz
                if abs(det) < DET_EPS:
                    continue
                inv = 1.0 / det
                tvx = ox - v0[j, 0]
                tvy = oy - v0[j, 1]
                tvz = oz - v0[j, 2]
                u = (tvx * px + tvy * py + tvz * pz) * inv
                if u < -BARY_EPS or u > 1.0 + BARY_EPS:
                    continue
                qx = tvy * e1[j, 2] - tvz * e1[j, 1]
                qy = tvz * e1[j, 0] - tvx * e1[j, 2]
                qz = tvx * e1[j, 1] - tvy * e1[j, 0]
                v = (dx * qx + dy * qy + dz * qz) * inv
                if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
                    continue
                t = (e2[j, 0] * qx + e2[j, 1] * qy + e2[j, 2] * qz) * inv
                if t > T_MIN and t < best_t:
                    best_t = t
                    best_j = j
            t_out[i] = best_t
            idx_out[i] = best_j
        return t_out, idx_out

    @njit(cache=True, parallel=True)
    def _any_hit_numba(origins, dirs, tmax, v0, e1, e2):  # pragma: no cover - jit
        n = dirs.shape[0]
        m = v0.shape[0]
        out = np.zeros(n, dtype=np.bool_)
        for i in prange(n):
            ox, oy, oz = origins[i, 0], origins[i, 1], origins[i, 2]
            dx, dy, dz = dirs[i, 0], dirs[i, 1], dirs[i, 2]
            tm = tmax[i]
            hit = False
            for j in range(m):
                px = dy * e2[j, 2] - dz * e2[j, 1]
                py = dz * e2[j, 0] - dx * e2[j, 2]
                pz = dx * e2[j, 1] - dy * e2[j, 0]
                det = e1[j, 0] * px + e1[j, 1] * py + e1[j, 2] * pz
                if abs(det) < DET_EPS:
                    continue
                inv = 1.0 / det
                tvx = ox - v0[j, 0]
                tvy = oy - v0[j, 1]
                tvz = oz - v0[j, 2]
                u = (tvx * px + tvy * py + tvz * pz) * inv
                if u < -BARY_EPS or u > 1.0 + BARY_EPS:
                    continue
                qx = tvy * e1[j, 2] - tvz * e1[j, 1]
                qy = tvz * e1[j, 0] - tvx * e1[j, 2]
                qz = tvx * e1[j, 1] - tvy * e1[j, 0]
                v = (dx * qx + dy * qy + dz * qz) * inv
                if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
                    continue
                t = (e2[j, 0] * qx + e2[j, 1] * qy + e2[j, 2] * qz) * inv
                if t > T_MIN and t < tm:
                    hit = True
                    break
            out[i] = hit
        return out
else:  # pragma: no cover - environment without numba
    _nearest_hit_numba = None
    _any_hit_numba = None


def _as_c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def nearest_hit(origin, dirs, v0, e1, e2):
    """First intersection along each ray from a shared origin.

    Returns (t, index) arrays; misses carry t = inf and index = -1.
    ``v0`` holds triangle base vertices, ``e1``/``e2`` the two edge vectors.
    """
    origin = _as_c(origin)
    dirs = _as_c(dirs)
    if ACTIVE_BACKEND == "numba":
        return _nearest_hit_numba(origin, dirs, _as_c(v0), _as_c(e1), _as_c(e2))
    return _nearest_hit_numpy(origin, dirs, _as_c(v0), _as_c(e1), _as_c(e2))


def any_hit(origins, dirs, tmax, v0, e1, e2):
    """Per-ray occlusion test against all triangles within (T_MIN, tmax)."""
    origins = _as_c(origins)
    dirs = _as_c(dirs)
    tmax = _as_c(tmax)
    if ACTIVE_BACKEND == "numba":
        return _any_hit_numba(origins, dirs, tmax, _as_c(v0), _as_c(e1), _as_c(e2))
    return _any_hit_numpy(origins, dirs, tmax, _as_c(v0), _as_c(e1), _as_c(e2))
