"""In-plane ray sets and exact voxel traversal.

A ray leaves the centre of its start voxel.  Along axis ``b`` it crosses voxel
faces at parameters ``(t - 0.5) / |d_b|``, ``t = 1, 2, ...``; merging the three
sequences gives the visited voxels.  Coincident crossings (within ``TOUCH_TOL``)
are edge touches (two axes) or vertex touches (three axes): the ray then moves
diagonally and only the diagonal voxel is tested, since void is 26-connected.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numba
import numpy as np

from .medial import CuttingPlane
from .voxgrid import SegmentedImage, VOID

TOUCH_TOL = 1e-9
MIN_PROJECTION = 1e-6


class Touch(enum.IntEnum):
    FACE = 1
    EDGE = 2
    VERTEX = 3


@numba.njit(cache=True, nogil=True)
def _axis_setup(db):
    if db > 0.0:
        return 1, 1.0 / db
    if db < 0.0:
        return -1, -1.0 / db
    return 0, 0.0


@numba.njit(cache=True, nogil=True)
def _march(phase, sx, sy, sz, d, tol, out_vox, out_touch, out_t):
    """Walk from voxel (sx, sy, sz) along ``d``.

    Fills the output buffers with every entered voxel and returns
    ``(count, status)``; status 1 means the last entry is the grain hit,
    0 means the ray left the image, -1 means a zero direction.
    """
    nx, ny, nz = phase.shape
    stx, ivx = _axis_setup(d[0])
    sty, ivy = _axis_setup(d[1])
    stz, ivz = _axis_setup(d[2])
    if stx == 0 and sty == 0 and stz == 0:
        return 0, -1
    inf = np.inf
    tx = 0.5 * ivx if stx != 0 else inf
    ty = 0.5 * ivy if sty != 0 else inf
    tz = 0.5 * ivz if stz != 0 else inf
    cx, cy, cz = sx, sy, sz
    n = 0
    cap = out_vox.shape[0]
    while n < cap:
        cmin = min(tx, min(ty, tz))
        touch = 0
        if tx - cmin <= tol:
            cx += stx
            tx += ivx
            touch += 1
        if ty - cmin <= tol:
            cy += sty
            ty += ivy
            touch += 1
        if tz - cmin <= tol:
            cz += stz
            tz += ivz
            touch += 1
        if cx < 0 or cy < 0 or cz < 0 or cx >= nx or cy >= ny or cz >= nz:
            return n, 0
        out_vox[n, 0] = cx
        out_vox[n, 1] = cy
        out_vox[n, 2] = cz
        out_touch[n] = touch
        out_t[n] = cmin
        n += 1
        if phase[cx, cy, cz] != 0:
            return n, 1
    return n, 0


@numba.njit(cache=True, nogil=True)
def _cast_hits(phase, start, dirs, tol):
    m = dirs.shape[0]
    cap = phase.shape[0] + phase.shape[1] + phase.shape[2] + 3
    vox = np.empty((cap, 3), dtype=np.int64)
    touch = np.empty(cap, dtype=np.int64)
    ts = np.empty(cap)
    hits = np.full((m, 3), -1, dtype=np.int64)
    dist = np.full(m, np.inf)
    for i in range(m):
        n, status = _march(phase, start[0], start[1], start[2], dirs[i], tol, vox, touch, ts)
        if status == 1:
            hits[i, 0] = vox[n - 1, 0]
            hits[i, 1] = vox[n - 1, 1]
            hits[i, 2] = vox[n - 1, 2]
            dist[i] = ts[n - 1]
    return hits, dist


def cast_many(img: SegmentedImage, start, dirs) -> tuple[np.ndarray, np.ndarray]:
    """Hit voxel per direction (``-1`` rows for misses) and the entry parameter."""
    d = np.ascontiguousarray(np.atleast_2d(dirs), dtype=float)
    s = np.asarray(start, dtype=np.int64)
    if img.phase[tuple(s)] != VOID:
        raise ValueError(f"ray origin {tuple(s)} is grain")
    return _cast_hits(img.phase, s, d, TOUCH_TOL)


# -- ray sets ----------------------------------------------------------------

def base_form(normal) -> str:
    """Coordinate plane holding the base rays: the one spanned by the two smaller |n| axes."""
    ax, ay, az = np.abs(np.asarray(normal, dtype=float))
    if az >= ax and az >= ay:
        return "xy"
    if ay >= ax:
        return "xz"
    return "yz"


def base_ray_set(normal, theta_list) -> np.ndarray:
    th = np.radians(np.asarray(theta_list, dtype=float))
    c, s, zero = np.cos(th), np.sin(th), np.zeros(len(th))
    form = base_form(normal)
    if form == "xy":
        return np.stack([c, s, zero], axis=1)
    if form == "xz":
        return np.stack([c, zero, s], axis=1)
    return np.stack([zero, c, s], axis=1)


@dataclass(frozen=True, eq=False)
class InPlaneRaySet:
    plane: CuttingPlane
    thetas: np.ndarray
    rays: np.ndarray

    def __len__(self):
        return len(self.rays)


def project_rays(s_set, plane: CuttingPlane, thetas=None) -> InPlaneRaySet:
    s = np.atleast_2d(np.asarray(s_set, dtype=float))
    n = plane.normal
    u = s - np.outer(s @ n, n)
    norm = np.linalg.norm(u, axis=1)
    keep = norm >= MIN_PROJECTION
    th = np.arange(len(s), dtype=float) if thetas is None else np.asarray(thetas, dtype=float)
    return InPlaneRaySet(plane, th[keep], u[keep] / norm[keep, None])


def plane_rays(plane: CuttingPlane, theta_list=range(360)) -> InPlaneRaySet:
    th = np.asarray(list(theta_list), dtype=float)
    return project_rays(base_ray_set(plane.normal, th), plane, th)


# -- single rays ---------------------------------------------------------------

@dataclass
class RayTraversal:
    origin: tuple[int, int, int]
    direction: np.ndarray
    visited: list[tuple[tuple[int, int, int], Touch]]
    params: list[float]
    hit: tuple[int, int, int] | None
    hit_touch: Touch | None = None
    hit_param: float | None = None


def cast_ray(img: SegmentedImage, origin, direction) -> RayTraversal:
    """Traverse from the centre of void voxel ``origin`` until grain or the image edge."""
    o = tuple(int(c) for c in origin)
    if not img.in_bounds(o) or img.phase[o] != VOID:
        raise ValueError(f"ray origin {o} is not a void voxel")
    d = np.asarray(direction, dtype=float)
    cap = sum(img.dims) + 3
    vox = np.empty((cap, 3), dtype=np.int64)
    touch = np.empty(cap, dtype=np.int64)
    ts = np.empty(cap)
    n, status = _march(img.phase, o[0], o[1], o[2], d, TOUCH_TOL, vox, touch, ts)
    entries = [(tuple(int(c) for c in vox[i]), Touch(int(touch[i]))) for i in range(n)]
    params = [float(t) for t in ts[:n]]
    if status == 1:
        (hv, ht), hp = entries.pop(), params.pop()
        return RayTraversal(o, d, entries, params, hv, ht, hp)
    return RayTraversal(o, d, entries, params, None)


@dataclass
class BarrierAccumulator:
    voxels: set[tuple[int, int, int]] = field(default_factory=set)

    def merge(self, other: "BarrierAccumulator") -> "BarrierAccumulator":
        self.voxels |= other.voxels
        return self

    def __len__(self):
        return len(self.voxels)


def _touch_closure(prev, new) -> list[tuple[int, int, int]]:
    """Voxels sharing the touched edge or vertex between ``prev`` and ``new`` (excluding prev)."""
    diff = [n - p for p, n in zip(prev, new)]
    axes = [b for b in range(3) if diff[b] != 0]
    out = []
    for mask in range(1, 1 << len(axes)):
        v = list(prev)
        for i, b in enumerate(axes):
            if mask >> i & 1:
                v[b] += diff[b]
        out.append(tuple(v))
    return out


def accumulate_barrier(img: SegmentedImage, traversal: RayTraversal, acc: BarrierAccumulator) -> BarrierAccumulator:
    """Add the traversal's void voxels, closing edge/vertex touches when all sharers are void."""
    prev = traversal.origin
    for v, touch in traversal.visited:
        if touch != Touch.FACE:
            sharers = _touch_closure(prev, v)
            if all(img.in_bounds(s) and img.phase[s] == VOID for s in sharers):
                acc.voxels.update(sharers)
        acc.voxels.add(v)
        prev = v
    return acc


@dataclass
class VisibleBoundary:
    """Hits ordered by theta; ``None`` entries mark rays that left the image."""

    hits: list[tuple[int, int, int] | None]
    thetas: list[float]
    barrier: BarrierAccumulator | None = None

    @property
    def n_misses(self) -> int:
        return sum(h is None for h in self.hits)

    def hit_voxels(self) -> list[tuple[int, int, int]]:
        return [h for h in self.hits if h is not None]


def visible_boundary(img: SegmentedImage, plane: CuttingPlane, rays: InPlaneRaySet, nu_k, with_barrier: bool = False) -> VisibleBoundary:
    nu = tuple(int(c) for c in nu_k)
    hits, _ = cast_many(img, nu, rays.rays)
    out: list = []
    thetas: list[float] = []
    for row, th in zip(hits, rays.thetas):
        h = None if row[0] < 0 else (int(row[0]), int(row[1]), int(row[2]))
        if out and out[-1] == h:
            continue
        out.append(h)
        thetas.append(float(th))
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
        thetas.pop()
    acc = None
    if with_barrier:
        acc = BarrierAccumulator({nu})
        for d in rays.rays:
            accumulate_barrier(img, cast_ray(img, nu, d), acc)
    return VisibleBoundary(out, thetas, acc)
