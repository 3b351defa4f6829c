"""Throat perimeters: five ways of closing a loop of boundary-grain voxels around
a medial-axis voxel, and the per-path search for the smallest one.

Algorithms 1 and 2 stay on the cutting plane (1 uses only what the in-plane
rays see, 2 bridges hidden stretches).  Algorithm 3 bridges in free 3D,
algorithm 4 follows an undulating wall through wedge rays, and algorithm 5
drops pieces that belong to other walls and subtracts grain islands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations

import numba
import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError, cKDTree

from . import measure
from .bridge import DEFAULT_PADS, BridgePath, bridge_gap, bridge_with_growing_roi, roi_cube
from .medial import CuttingPlane, MedialAxisPath, direction_fan, plane_membership, plane_of, tangent_at
from .raycast import BarrierAccumulator, _march, TOUCH_TOL, accumulate_barrier, base_ray_set, cast_many, cast_ray, plane_rays, project_rays
from .voxgrid import SegmentedImage, VOID

THROAT_TYPES = {1: "simply_planar", 2: "simply_planar", 3: "simply_nonplanar", 4: "simply_nonplanar", 5: "nonsimply_nonplanar"}
ROUNDING_TOL = 0.01

Voxel = tuple[int, int, int]


class PerimeterError(ValueError):
    """An algorithm could not close a valid perimeter on this plane."""


@dataclass(eq=False)
class CandidatePerimeter:
    algorithm: int
    plane: CuttingPlane
    loop26: list[Voxel]
    loop6: list[Voxel]
    planar: bool
    barrier: BarrierAccumulator | None = None
    bound: float = math.inf
    area: float = math.nan  # net of deductions
    gross_area: float = math.nan
    length: float = math.nan
    method: str = ""
    deductions: list[float] = field(default_factory=list)
    points3d: np.ndarray | None = None


@dataclass(eq=False)
class ThroatRecord:
    path_id: int
    k: int
    perimeter: CandidatePerimeter
    area: float
    length: float
    throat_type: str
    inner_deductions: list[float]
    best_by_algorithm: dict[int, float] = field(default_factory=dict)

    @property
    def normal(self) -> np.ndarray:
        return self.perimeter.plane.normal


@dataclass(frozen=True)
class WedgeSpec:
    kind: str  # "horizontal" or "vertical"
    center_angle: float  # degrees, in-plane azimuth
    half_angle: float  # degrees
    ray_count: int

    def __post_init__(self):
        if self.kind not in ("horizontal", "vertical"):
            raise ValueError(f"unknown wedge kind {self.kind!r}")
        if self.ray_count < 2:
            raise ValueError("a wedge needs at least two rays")


# -- small helpers ----------------------------------------------------------------

def _t(v) -> Voxel:
    return (int(v[0]), int(v[1]), int(v[2]))


def _adj26(a, b) -> bool:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]), abs(a[2] - b[2])) <= 1


def _centre(v) -> np.ndarray:
    return np.asarray(v, dtype=float) + 0.5


def _closed_steps(loop):
    n = len(loop)
    for i in range(n):
        yield loop[i], loop[(i + 1) % n]


def is_closed_loop(loop, connectivity: int = 26) -> bool:
    if len(loop) < 3:
        return False
    for a, b in _closed_steps(loop):
        d = [abs(a[i] - b[i]) for i in range(3)]
        if connectivity == 26 and max(d) > 1:
            return False
        if connectivity == 6 and sum(d) > 1:
            return False
    return True


def _collapse(loop) -> list[Voxel]:
    out: list[Voxel] = []
    for v in loop:
        v = _t(v)
        if not out or out[-1] != v:
            out.append(v)
    while len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


def on_plane(plane: CuttingPlane, v) -> bool:
    """The voxel cube meets the plane, or the offset-corner membership test holds."""
    pi = float(plane.evaluate(_centre(v)))
    return abs(pi) <= 0.5 * float(np.abs(plane.normal).sum()) + 1e-9 or plane_membership(plane, v)


# -- loop conversions and checks ---------------------------------------------------------

def _bridge_score(plane: CuttingPlane, mids) -> tuple:
    off = sum(not plane_membership(plane, m) for m in mids)
    dist = sum(abs(float(plane.evaluate(_centre(m)))) for m in mids)
    return (off, dist, tuple(mids))


def to_six_connected(loop26, plane: CuttingPlane, img: SegmentedImage) -> list[Voxel]:
    """Insert face-sharing boundary-grain voxels at every diagonal step.

    On-plane insertions are preferred, then the ones closest to the plane.
    Raises :class:`PerimeterError` when some diagonal step has no bridge.
    """
    loop = _collapse(loop26)
    bg = img.boundary_grain
    out: list[Voxel] = []

    def ok(v) -> bool:
        return img.in_bounds(v) and bool(bg[v])

    for a, b in _closed_steps(loop):
        out.append(a)
        diff = [b[i] - a[i] for i in range(3)]
        axes = [i for i in range(3) if diff[i] != 0]
        if len(axes) <= 1:
            continue
        options = []
        for order in permutations(axes):
            cur = list(a)
            mids = []
            for ax in order[:-1]:
                cur[ax] += diff[ax]
                mids.append(tuple(cur))
            if all(ok(m) for m in mids):
                options.append(mids)
        if not options:
            raise PerimeterError(f"no face bridge between {a} and {b}")
        out.extend(min(options, key=lambda m: _bridge_score(plane, m)))
    return out


def rounding_number(loop, plane: CuttingPlane, nu_k) -> float:
    """Winding number of the loop's projection on ``plane`` about ``nu_k``."""
    if len(loop) < 2:
        raise ValueError("loop needs at least two members")
    pts = plane.to_plane_coords(np.asarray(loop, dtype=float) + 0.5)
    c = plane.to_plane_coords(_centre(nu_k))[0]
    rel = pts - c
    if np.any(np.hypot(rel[:, 0], rel[:, 1]) < 1e-12):
        raise ValueError("a projected loop member coincides with the medial-axis voxel")
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    inc = np.diff(np.append(ang, ang[0]))
    inc = (inc + np.pi) % (2 * np.pi) - np.pi
    turns = float(abs(inc.sum()) / (2 * np.pi))
    nearest = round(turns)
    return float(nearest) if abs(turns - nearest) < 1e-9 else turns  # drop summation noise


def triangle_fan_bound(hits, nu_k) -> float:
    """Sum of triangles (centre_i, centre_{i+1}, nu_k centre) over hits in ray order."""
    pts = [h for h in hits if h is not None]
    if len(pts) < 3:
        raise ValueError("fan bound needs at least three hits")
    return measure.fan_area(np.asarray(pts, dtype=float) + 0.5, _centre(nu_k))


def split_pieces(hits) -> tuple[list[list[Voxel]], bool]:
    """Cut the cyclic hit sequence at misses and at non-adjacent steps.

    Returns the pieces in ray order and whether the sequence was already one
    closed 26-connected loop.
    """
    seq = [None if h is None else _t(h) for h in hits]
    n = len(seq)
    if n == 0:
        return [], False
    breaks = [i for i in range(n) if seq[i] is None or seq[(i + 1) % n] is None or not _adj26(seq[i], seq[(i + 1) % n])]
    if not breaks:
        return [_collapse(seq)], True
    cut = set(breaks)
    start = (breaks[0] + 1) % n
    pieces: list[list[Voxel]] = []
    cur: list[Voxel] = []
    for step in range(n):
        i = (start + step) % n
        if seq[i] is not None and (not cur or cur[-1] != seq[i]):
            cur.append(seq[i])
        if i in cut and cur:
            pieces.append(cur)
            cur = []
    if cur:
        pieces.append(cur)
    return pieces, False


# -- per-plane view --------------------------------------------------------------

@dataclass(eq=False)
class PlaneView:
    """What the in-plane rays from ``nu`` see: hits in ray order (``None`` = miss)."""

    plane: CuttingPlane
    nu: Voxel
    hits: list[Voxel | None]
    bound: float = math.inf


def view_plane(img: SegmentedImage, plane: CuttingPlane, thetas=range(360)) -> PlaneView:
    nu = _t(plane.nu)
    rays = plane_rays(plane, thetas)
    hits, dist = cast_many(img, nu, rays.rays)
    seq = [None if h[0] < 0 else _t(h) for h in hits]
    pts = _ray_ends(img, nu, rays.rays, hits, dist)
    bound = measure.fan_area(pts, _centre(nu)) if len(pts) >= 3 else math.inf
    return PlaneView(plane, nu, _collapse_cyclic(seq), bound)


def _collapse_cyclic(seq):
    out = []
    for h in seq:
        if not out or out[-1] != h:
            out.append(h)
    while len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


def _exit_params(dims, c, dirs) -> np.ndarray:
    d = np.asarray(dirs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        face = np.where(d > 0, np.asarray(dims, dtype=float), 0.0)
        t = np.where(d != 0, (face - c) / d, np.inf)
    return t.min(axis=-1)


def _ray_ends(img, nu, dirs, hits, dist) -> np.ndarray:
    """Hit centres, or the image-exit point for rays that miss."""
    c = _centre(nu)
    pts = hits.astype(float) + 0.5
    miss = hits[..., 0] < 0
    if miss.any():
        t = _exit_params(img.dims, c, dirs)
        ends = c + t[..., None] * dirs
        pts[miss] = ends[miss]
    return pts


@dataclass
class PlaneScan:
    normals: np.ndarray
    alg1_ok: np.ndarray
    bounds: np.ndarray


@numba.njit(cache=True, nogil=True)
def _scan_kernel(phase, start, normals, cos_t, sin_t, tol):
    m = normals.shape[0]
    T = cos_t.shape[0]
    nx, ny, nz = phase.shape
    cap = nx + ny + nz + 3
    vox = np.empty((cap, 3), dtype=np.int64)
    touch = np.empty(cap, dtype=np.int64)
    ts = np.empty(cap)
    ok = np.zeros(m, dtype=np.bool_)
    bounds = np.zeros(m)
    d = np.empty(3)
    cx, cy, cz = start[0] + 0.5, start[1] + 0.5, start[2] + 0.5
    for j in range(m):
        n0, n1, n2 = normals[j, 0], normals[j, 1], normals[j, 2]
        a0, a1, a2 = abs(n0), abs(n1), abs(n2)
        good = True
        total = 0.0
        fx = fy = fz = 0.0
        px = py = pz = 0.0
        hx0 = hy0 = hz0 = 0
        phx = phy = phz = 0
        pmiss = False
        for t in range(T + 1):
            i = t % T
            c, s = cos_t[i], sin_t[i]
            if a2 >= a0 and a2 >= a1:
                b0, b1, b2 = c, s, 0.0
            elif a1 >= a0:
                b0, b1, b2 = c, 0.0, s
            else:
                b0, b1, b2 = 0.0, c, s
            dot = b0 * n0 + b1 * n1 + b2 * n2
            d[0], d[1], d[2] = b0 - dot * n0, b1 - dot * n1, b2 - dot * n2
            nrm = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
            d[0] /= nrm
            d[1] /= nrm
            d[2] /= nrm
            if t < T:
                cnt, status = _march(phase, start[0], start[1], start[2], d, tol, vox, touch, ts)
                miss = status != 1
                if miss:
                    good = False
                    te = np.inf
                    for b in range(3):
                        if d[b] > 0:
                            te = min(te, ((nx, ny, nz)[b] - (cx, cy, cz)[b]) / d[b])
                        elif d[b] < 0:
                            te = min(te, -(cx, cy, cz)[b] / d[b])
                    qx, qy, qz = cx + te * d[0], cy + te * d[1], cz + te * d[2]
                    hx = hy = hz = -1
                else:
                    hx, hy, hz = vox[cnt - 1, 0], vox[cnt - 1, 1], vox[cnt - 1, 2]
                    qx, qy, qz = hx + 0.5, hy + 0.5, hz + 0.5
            else:
                qx, qy, qz = fx, fy, fz
                hx, hy, hz = hx0, hy0, hz0
                miss = False
            if t == 0:
                fx, fy, fz = qx, qy, qz
                hx0, hy0, hz0 = hx, hy, hz
            else:
                ux, uy, uz = px - cx, py - cy, pz - cz
                vx, vy, vz = qx - cx, qy - cy, qz - cz
                wx = uy * vz - uz * vy
                wy = uz * vx - ux * vz
                wz = ux * vy - uy * vx
                total += 0.5 * math.sqrt(wx * wx + wy * wy + wz * wz)
                if good and not pmiss and not miss:
                    if max(abs(hx - phx), max(abs(hy - phy), abs(hz - phz))) > 1:
                        good = False
            px, py, pz = qx, qy, qz
            phx, phy, phz = hx, hy, hz
            pmiss = miss
        ok[j] = good
        bounds[j] = total
    return ok, bounds


def scan_planes(img: SegmentedImage, nu, normals, thetas=range(360)) -> PlaneScan:
    """Cast every plane's rays in one pass; report closed visibility and fan bounds.

    Misses count towards the bound with their image-exit point.
    """
    nu = np.asarray(_t(nu), dtype=np.int64)
    th = np.radians(np.asarray(list(thetas), dtype=float))
    nrm = np.ascontiguousarray(np.atleast_2d(normals), dtype=float)
    ok, bounds = _scan_kernel(img.phase, nu, nrm, np.cos(th), np.sin(th), TOUCH_TOL)
    return PlaneScan(nrm, ok, bounds)


# -- the five algorithms --------------------------------------------------------------

def _planar_candidate(alg, img, view, loop26) -> CandidatePerimeter:
    loop26 = _collapse(loop26)
    if not is_closed_loop(loop26, 26):
        raise PerimeterError("loop is not closed")
    loop6 = to_six_connected(loop26, view.plane, img)
    cand = CandidatePerimeter(alg, view.plane, loop26, loop6, planar=alg in (1, 2), bound=view.bound)
    _check_rounding(cand, view.nu)
    return cand


def _check_rounding(cand: CandidatePerimeter, nu) -> None:
    try:
        w = rounding_number(cand.loop26, cand.plane, nu)
    except ValueError as exc:
        raise PerimeterError(str(exc)) from None
    if abs(w - 1.0) > ROUNDING_TOL:
        raise PerimeterError(f"rounding number {w:.3f}, not a single encirclement")


def alg1_planar(img: SegmentedImage, view: PlaneView) -> CandidatePerimeter:
    """Accept the visible hits when they already form one closed 26-connected loop."""
    if any(h is None for h in view.hits):
        raise PerimeterError("a ray left the image")
    pieces, closed = split_pieces(view.hits)
    if not closed:
        raise PerimeterError("visible boundary has gaps")
    return _planar_candidate(1, img, view, pieces[0])


def _assemble(img, view, pieces, bridge) -> list[Voxel]:
    loop: list[Voxel] = []
    for i, piece in enumerate(pieces):
        loop.extend(piece)
        nxt = pieces[(i + 1) % len(pieces)]
        found = bridge(loop[-1], nxt[0])
        if found is None:
            raise PerimeterError(f"cannot bridge {loop[-1]} -> {nxt[0]}")
        loop.extend(found.voxels[1:-1])
    return loop


def alg2_planar(img: SegmentedImage, view: PlaneView, best_so_far: float = math.inf, pads=DEFAULT_PADS) -> CandidatePerimeter:
    """Bridge hidden stretches on the plane between visible pieces.

    ``best_so_far`` is compared with the view's fan bound; planes that cannot
    win are skipped before any search.
    """
    if view.bound >= best_so_far:
        raise PerimeterError("pruned by fan bound")
    pieces, closed = split_pieces(view.hits)
    if not pieces:
        raise PerimeterError("no visible boundary")
    if not closed:
        plane = view.plane
        pieces = _assemble(img, view, pieces, lambda a, b: bridge_with_growing_roi(img, a, b, view.nu, plane, pads))
        pieces = [pieces]
    return _planar_candidate(2, img, view, pieces[0])


def alg3_nonplanar(img: SegmentedImage, view: PlaneView, pad: int = 4) -> CandidatePerimeter:
    """As algorithm 2 but bridges may leave the plane (fixed ROI pad)."""
    pieces, closed = split_pieces(view.hits)
    if not pieces:
        raise PerimeterError("no visible boundary")
    loop = pieces[0] if closed else _assemble(img, view, pieces, lambda a, b: bridge_gap(img, a, b, roi_cube(a, b, pad), view.nu))
    cand = _planar_candidate(3, img, view, loop)
    cand.planar = False
    return cand


def wedge_directions(spec: WedgeSpec, plane: CuttingPlane) -> np.ndarray:
    e1, e2 = plane.frame()
    offs = np.linspace(-spec.half_angle, spec.half_angle, spec.ray_count)
    if spec.kind == "horizontal":
        a = np.radians(spec.center_angle + offs)
        return np.cos(a)[:, None] * e1 + np.sin(a)[:, None] * e2
    b = math.radians(spec.center_angle)
    u = math.cos(b) * e1 + math.sin(b) * e2
    psi = np.radians(90.0 + offs)
    return np.cos(psi)[:, None] * plane.normal + np.sin(psi)[:, None] * u


def _nearest_hit(img, nu, dirs) -> tuple[Voxel, np.ndarray]:
    hits, dist = cast_many(img, nu, dirs)
    valid = hits[:, 0] >= 0
    if not valid.any():
        raise PerimeterError("wedge without a hit")
    i = int(np.argmin(np.where(valid, dist, np.inf)))
    return _t(hits[i]), np.asarray(dirs[i])


def _azimuth(plane: CuttingPlane, vec) -> float:
    e1, e2 = plane.frame()
    return math.degrees(math.atan2(float(vec @ e2), float(vec @ e1)))


def wedge_specs(alpha1: float) -> list[WedgeSpec]:
    return [WedgeSpec("horizontal", alpha1 + 90.0 * j, 30.0, 61) for j in (1, 2, 3)]


def alg4_wedge(img: SegmentedImage, view: PlaneView, pad: int = 4) -> CandidatePerimeter:
    """Eight nearest wall points from horizontal and vertical wedges, bridged in 3D."""
    plane, nu = view.plane, view.nu
    first = project_rays(base_ray_set(plane.normal, range(91)), plane)
    p1, d1 = _nearest_hit(img, nu, first.rays)
    alphas, points = [_azimuth(plane, d1)], [p1]
    for spec in wedge_specs(alphas[0]):
        p, d = _nearest_hit(img, nu, wedge_directions(spec, plane))
        alphas.append(_azimuth(plane, d))
        points.append(p)
    for j in range(4):
        a, b = alphas[j], alphas[(j + 1) % 4]
        while b <= a:
            b += 360.0
        p, _ = _nearest_hit(img, nu, wedge_directions(WedgeSpec("vertical", 0.5 * (a + b), 45.0, 91), plane))
        points.append(p)
    c = _centre(nu)
    order = sorted(set(points), key=lambda p: (_azimuth(plane, _centre(p) - c), p))
    if len(order) < 3:
        raise PerimeterError("wedges found fewer than three distinct wall points")
    loop: list[Voxel] = []
    for i, a in enumerate(order):
        b = order[(i + 1) % len(order)]
        found = bridge_gap(img, a, b, roi_cube(a, b, pad), nu)
        if found is None:
            raise PerimeterError(f"cannot bridge wedge points {a} -> {b}")
        loop.extend(found.voxels[:-1])
    cand = _planar_candidate(4, img, view, loop)
    cand.planar = False
    return cand


def _piece_distance(piece, c) -> float:
    return float(np.linalg.norm(np.asarray(piece, dtype=float) + 0.5 - c, axis=1).min())


def alg5_nonsimply(img: SegmentedImage, view: PlaneView, pads=DEFAULT_PADS, n_starts: int = 3, pad3d: int = 4) -> CandidatePerimeter:
    """Assemble a loop from visible pieces, deleting pieces that cannot be reached.

    Starts from the pieces nearest the medial-axis voxel; among closed loops
    with one encirclement, the one with the least summed distance wins.
    Grain islands inside the loop are recorded as deductions.
    """
    plane, nu = view.plane, view.nu
    pieces, closed = split_pieces(view.hits)
    if not pieces:
        raise PerimeterError("no visible boundary")
    c = _centre(nu)

    def link(a, b) -> BridgePath | None:
        found = bridge_with_growing_roi(img, a, b, nu, plane, pads)
        return found if found is not None else bridge_gap(img, a, b, roi_cube(a, b, pad3d), nu)

    starts = sorted(range(len(pieces)), key=lambda i: (_piece_distance(pieces[i], c), i))[:n_starts]
    best: tuple[float, list[Voxel]] | None = None
    for s in starts:
        if closed:
            loop = list(pieces[0])
        else:
            loop = list(pieces[s])
            for step in range(1, len(pieces)):
                nxt = pieces[(s + step) % len(pieces)]
                found = link(loop[-1], nxt[0])
                if found is not None:
                    loop.extend(found.voxels[1:])
                    loop.extend(nxt[1:])
            found = link(loop[-1], loop[0])
            if found is None:
                continue
            loop.extend(found.voxels[1:-1])
        loop = _collapse(loop)
        if not is_closed_loop(loop, 26):
            continue
        try:
            w = rounding_number(loop, plane, nu)
        except ValueError:
            continue
        if abs(w - 1.0) > ROUNDING_TOL:
            continue
        score = float(np.linalg.norm(np.asarray(loop, dtype=float) + 0.5 - c, axis=1).sum())
        if best is None or score < best[0]:
            best = (score, loop)
        if closed:
            break
    if best is None:
        raise PerimeterError("no assembly encircles the medial-axis voxel once")
    cand = _planar_candidate(5, img, view, best[1])
    cand.planar = False
    cand.deductions = inner_grain_deduction(img, cand.loop26, nu, plane)
    return cand


ALGORITHMS = {1: "alg1_planar", 2: "alg2_planar", 3: "alg3_nonplanar", 4: "alg4_wedge", 5: "alg5_nonsimply"}


def run_algorithm(alg: int, img: SegmentedImage, view: PlaneView, best_so_far: float = math.inf, pads=DEFAULT_PADS) -> CandidatePerimeter:
    if alg == 1:
        return alg1_planar(img, view)
    if alg == 2:
        return alg2_planar(img, view, best_so_far, pads)
    if alg == 3:
        return alg3_nonplanar(img, view)
    if alg == 4:
        return alg4_wedge(img, view)
    if alg == 5:
        return alg5_nonsimply(img, view, pads)
    raise ValueError(f"unknown algorithm {alg}")


# -- grain islands -------------------------------------------------------------------

@dataclass
class IslandRun:
    rays: list[int]  # loop indices whose rays cross the island
    entries: np.ndarray  # (m, 3)
    exits: np.ndarray
    area: float


def _fit_plane(loop, nu) -> CuttingPlane:
    pts = np.asarray(loop, dtype=float) + 0.5
    _, _, vt = np.linalg.svd(pts - pts.mean(axis=0))
    return plane_of(nu, vt[2])


def island_runs(img: SegmentedImage, loop, nu_k, plane: CuttingPlane | None = None) -> list[IslandRun]:
    """Rays from ``nu_k`` to each loop voxel that cross grain before arriving.

    Grain within one voxel (Chebyshev) of the loop is wall, not island.  Each
    cyclic run of crossing rays forms one island.
    """
    loop = [_t(v) for v in loop]
    nu = _t(nu_k)
    if plane is None:
        plane = _fit_plane(loop, nu)
    near = set()
    for v in loop:
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    near.add((v[0] + dx, v[1] + dy, v[2] + dz))
    blank = np.zeros(img.dims, dtype=np.uint8)
    cap = sum(img.dims) + 3
    vox = np.empty((cap, 3), dtype=np.int64)
    touch = np.empty(cap, dtype=np.int64)
    ts = np.empty(cap)
    c = _centre(nu)
    crossing: list[tuple[np.ndarray, np.ndarray] | None] = []
    phase = img.phase
    for o in loop:
        d = _centre(o) - c
        n, _ = _march(blank, nu[0], nu[1], nu[2], d, TOUCH_TOL, vox, touch, ts)
        found = None
        i = 0
        while i < n:
            v = _t(vox[i])
            if v == o or ts[i] >= 1.0:
                break
            if phase[v] != VOID and v not in near:
                j = i
                while j + 1 < n and _t(vox[j + 1]) != o and phase[_t(vox[j + 1])] != VOID and _t(vox[j + 1]) not in near:
                    j += 1
                t_out = ts[j + 1] if j + 1 < n else 1.0
                found = (c + ts[i] * d, c + min(t_out, 1.0) * d)
                break
            i += 1
        crossing.append(found)
    m = len(loop)
    flags = [x is not None for x in crossing]
    if not any(flags):
        return []
    if all(flags):
        runs = [list(range(m))]
    else:
        start = next(i for i in range(m) if not flags[i])
        runs, cur = [], []
        for step in range(1, m + 1):
            i = (start + step) % m
            if flags[i]:
                cur.append(i)
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
    out = []
    for r in runs:
        ent = np.array([crossing[i][0] for i in r])
        ext = np.array([crossing[i][1] for i in r])
        out.append(IslandRun(r, ent, ext, _island_area(plane, ent, ext)))
    return out


def _island_area(plane: CuttingPlane, entries, exits) -> float:
    pts = plane.to_plane_coords(np.vstack([entries, exits]))
    if len(pts) >= 3:
        try:
            return float(ConvexHull(pts).volume)
        except QhullError:
            pass
    return measure.quadrilateral_area(pts[0], pts[len(entries) - 1], pts[-1], pts[len(entries)])


def inner_grain_deduction(img: SegmentedImage, loop, nu_k, plane: CuttingPlane | None = None) -> list[float]:
    """Area of every grain island between ``nu_k`` and the loop (empty when none)."""
    return [r.area for r in island_runs(img, loop, nu_k, plane)]


# -- measurement and barrier -------------------------------------------------------

def section_region(img: SegmentedImage, cand: CandidatePerimeter) -> tuple[np.ndarray, np.ndarray, tuple[int, int]] | None:
    """Void cross-section inside a planar loop, seen down the dropped axis.

    Each column of the axis plane is represented by the voxel holding the
    plane point above the column centre (a naive digital plane), so every
    column counts once.  The region is the 4-connected part reachable from the
    medial-axis column within the loop's closed outline, with holes filled.
    """
    plane = cand.plane
    n = plane.normal
    proj = measure.project_to_axis_plane(cand.loop26, n)
    found = measure.enclosed_cells(proj, np.asarray(plane.nu)[list(proj.axis_pair)])
    if found is None:
        return None
    inside, lo = found
    a0, a1 = proj.axis_pair
    drop = 3 - a0 - a1
    outline = inside.copy()
    cells = proj.points - lo
    outline[tuple(cells.T)] = True
    ii, jj = np.nonzero(outline)
    u = ii + lo[0] + 0.5
    w = jj + lo[1] + 0.5
    o = plane.origin
    h = o[drop] - (n[a0] * (u - o[a0]) + n[a1] * (w - o[a1])) / n[drop]
    vox = np.empty((len(u), 3), dtype=np.int64)
    vox[:, a0], vox[:, a1], vox[:, drop] = ii + lo[0], jj + lo[1], np.floor(h).astype(np.int64)
    valid = np.all((vox >= 0) & (vox < np.asarray(img.dims)), axis=1)
    void = np.zeros(len(vox), bool)
    void[valid] = img.void[tuple(vox[valid].T)]
    mask = np.zeros_like(outline)
    mask[ii[void], jj[void]] = True
    labels, _ = ndimage.label(mask)
    seed = tuple(np.asarray(plane.nu)[[a0, a1]] - lo)
    if not (0 <= seed[0] < mask.shape[0] and 0 <= seed[1] < mask.shape[1]) or labels[seed] == 0:
        return None
    region = ndimage.binary_fill_holes(labels == labels[seed])
    return region, lo, proj.axis_pair


def measure_section(img: SegmentedImage, cand: CandidatePerimeter) -> measure.LoopMeasure | None:
    found = section_region(img, cand)
    if found is None:
        return None
    region, lo, pair = found
    n = cand.plane.normal
    contour = measure.contour_from_mask(region, lo)
    ps = measure.extract_points(contour)
    if len(ps) < 3:
        return None
    drop = 3 - sum(pair)
    vs = img.voxel_size
    area = measure.shoelace(ps.points) / abs(n[drop]) * vs**2
    pts3 = measure.lift_to_plane(ps.points, pair, n, cand.plane.origin)
    length = measure.polyline_length(pts3, closed=True) * vs
    return measure.LoopMeasure(area, length, pts3, ps.tags, "pointset")


def measure_candidate(img: SegmentedImage, cand: CandidatePerimeter) -> CandidatePerimeter:
    """Fill area, length and point set: point set when the loop lies on the plane, else centroid fan."""
    plane = cand.plane
    vs = img.voxel_size
    coplanar = all(on_plane(plane, v) for v in cand.loop26)
    m = None
    if coplanar:
        try:
            m = measure_section(img, cand)
        except ValueError:
            m = None
    if m is None:
        m = measure.measure_nonplanar(cand.loop26, cand.loop6, vs)
    cand.gross_area = float(m.area)
    cand.area = float(m.area - sum(cand.deductions) * vs**2)
    cand.length = float(m.length)
    cand.method = m.method
    cand.points3d = m.points3d
    if not cand.area > 0:
        raise PerimeterError("non-positive throat area")
    return cand


def _sample_triangles(apex, ring, step: float) -> np.ndarray:
    out = []
    a = np.asarray(apex, dtype=float)
    for p, q in zip(ring, np.roll(ring, -1, axis=0)):
        n = max(1, int(math.ceil(max(np.linalg.norm(p - a), np.linalg.norm(q - a), np.linalg.norm(q - p)) / step)))
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = i + j <= n
        u, v = i[keep] / n, j[keep] / n
        out.append(a + u[:, None] * (p - a) + v[:, None] * (q - a))
    return np.vstack(out)


def throat_barrier(img: SegmentedImage, cand: CandidatePerimeter, step: float = 0.25) -> BarrierAccumulator:
    """Void voxels whose cube can meet the fan surface spanned by the loop.

    The surface is the fan from the medial-axis voxel (on-plane loops) or from
    the loop centroid (others) to the loop voxel centres; for on-plane loops
    the in-plane ray traversals are added too.
    """
    ring = np.asarray(cand.loop26, dtype=float) + 0.5
    nu = _t(cand.plane.nu)
    coplanar = cand.method == "pointset"
    apex = _centre(nu) if coplanar else ring.mean(axis=0)
    samples = _sample_triangles(apex, ring, step)
    lo = np.maximum(np.floor(samples.min(axis=0)).astype(int) - 1, 0)
    hi = np.minimum(np.floor(samples.max(axis=0)).astype(int) + 2, np.asarray(img.dims))
    sub = img.void[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    idx = np.argwhere(sub) + lo
    acc = BarrierAccumulator({nu})
    if len(idx):
        dist, _ = cKDTree(samples).query(idx + 0.5)
        for v in idx[dist <= 0.5 * math.sqrt(3.0) + 0.5 * step]:
            acc.voxels.add(_t(v))
    if coplanar and cand.algorithm in (1, 2):
        for d in plane_rays(cand.plane).rays:
            accumulate_barrier(img, cast_ray(img, nu, d), acc)
    return acc


# -- per-path selection --------------------------------------------------------------

def _default_config():
    from .pipeline import AnalysisConfig

    return AnalysisConfig()


def path_normals(path: MedialAxisPath, k: int, config) -> np.ndarray | None:
    """Fan of plane normals around the tangent at ``k``; ``None`` when no tangent exists."""
    try:
        t = tangent_at(path, k)
    except ValueError:
        return None
    fan = direction_fan(t, range(1, int(config.polar_max) + 1, int(config.polar_step)), config.azimuth_steps, config.azimuth_step)
    return fan.members


def _thetas(config):
    n = int(config.theta_count)
    return np.arange(n) * (360.0 / n)


def _key(cand: CandidatePerimeter, k: int, j: int):
    return (cand.area, k, j, cand.algorithm)


def select_throat(img: SegmentedImage, path: MedialAxisPath, config=None) -> ThroatRecord | None:
    """Smallest perimeter over every path voxel ``k`` and every plane in its fan.

    Pass one scans all planes with batched rays and measures the closed
    visible loops with the smallest fan bounds.  Pass two runs the remaining
    algorithms on planes whose bound could still beat the best so far.  Ties
    go to the smaller ``k``, then the lower plane index.
    """
    cfg = config if config is not None else _default_config()
    mask = set(cfg.algorithm_mask)
    thetas = _thetas(cfg)
    n = len(path)
    scans: dict[int, PlaneScan] = {}
    for k in range(0, n, max(1, int(cfg.k_stride))):
        normals = path_normals(path, k, cfg)
        if normals is None or not img.void[_t(path.voxels[k])]:
            continue
        scans[k] = scan_planes(img, path.voxels[k], normals, thetas)
    if not scans:
        return None

    views: dict[tuple[int, int], PlaneView] = {}

    def view(k, j) -> PlaneView:
        if (k, j) not in views:
            v = view_plane(img, plane_of(path.voxels[k], scans[k].normals[j]), thetas)
            views[(k, j)] = v
        return views[(k, j)]

    best: tuple | None = None
    best_cand: CandidatePerimeter | None = None
    best_k = -1
    by_alg: dict[int, float] = {}
    tried: set[tuple[int, int, int]] = set()

    def consider(alg, k, j, bound_limit=math.inf):
        nonlocal best, best_cand, best_k
        if (alg, k, j) in tried:
            return None
        tried.add((alg, k, j))
        try:
            cand = run_algorithm(alg, img, view(k, j), bound_limit, cfg.roi_pads)
            cand.bound = views[(k, j)].bound
            measure_candidate(img, cand)
        except PerimeterError:
            return None
        by_alg[alg] = float(min(by_alg.get(alg, math.inf), cand.area))
        key = _key(cand, k, j)
        if best is None or key < best:
            best, best_cand, best_k = key, cand, k
        return cand

    # pass one: closed visible loops, screened by fan bound
    if 1 in mask:
        ok = [(float(s.bounds[j]), k, j) for k, s in scans.items() for j in np.flatnonzero(s.alg1_ok)]
        ok.sort()
        chosen = set((k, j) for _, k, j in ok[: int(cfg.measure_cap)])
        for k, s in scans.items():
            cand_j = np.flatnonzero(s.alg1_ok)
            if len(cand_j):
                chosen.add((k, int(cand_j[np.argmin(s.bounds[cand_j])])))
        for k, j in sorted(chosen, key=lambda kj: (scans[kj[0]].bounds[kj[1]], kj)):
            consider(1, k, j)

    # pass two: cascade on planes whose visible loop is open
    def best_bound():
        return best_cand.bound if best_cand is not None else math.inf

    rest = sorted((float(s.bounds[j]), k, int(j)) for k, s in scans.items() for j in np.flatnonzero(~s.alg1_ok))
    done = 0
    for b, k, j in rest:
        if b >= best_bound() or done >= int(cfg.cascade_cap):
            break
        done += 1
        for alg in (2, 3, 4, 5):
            if alg in mask and consider(alg, k, j, best_bound()) is not None and cfg.cascade == "first":
                break

    # exhaustive mode: every algorithm on the most promising planes
    if cfg.cascade == "all":
        everything = sorted((float(s.bounds[j]), k, int(j)) for k, s in scans.items() for j in range(len(s.bounds)))
        top = everything[: int(cfg.all_top)]
        if best_cand is not None:
            bk = best_k
            bj = next(j for (k, j), v in views.items() if k == bk and v.plane is best_cand.plane)
            top.append((0.0, bk, bj))
        for _, k, j in top:
            for alg in sorted(mask):
                consider(alg, k, j)

    if best_cand is None:
        return None
    best_cand.barrier = throat_barrier(img, best_cand)
    return ThroatRecord(
        path_id=path.id,
        k=best_k,
        perimeter=best_cand,
        area=best_cand.area,
        length=best_cand.length,
        throat_type=THROAT_TYPES[best_cand.algorithm],
        inner_deductions=list(best_cand.deductions),
        best_by_algorithm=dict(sorted(by_alg.items())),
    )
