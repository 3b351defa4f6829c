"""Perimeter point sets, lengths and areas.

The point set lives on the rectilinear contour separating perimeter voxels from
the barrier (void) side.  Horizontal stretches of the contour (a constant-y
``dx`` run) contribute one midpoint each.  Vertical stretches that are local
x-extremes (C shapes) contribute their midpoint.  Right-angle parts with long
arms (L, U, T shapes) contribute vertex points.  The polyline through those
points replaces the staircase of voxel centres.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

# -- projection ----------------------------------------------------------------

_DROP_ORDER = (2, 1, 0)  # ties drop z, then y, then x


def drop_axis(normal) -> int:
    a = np.abs(np.asarray(normal, dtype=float))
    top = a.max()
    for ax in _DROP_ORDER:
        if a[ax] >= top - 1e-12:
            return ax
    raise AssertionError("unreachable")


@dataclass(frozen=True, eq=False)
class ProjectedLoop:
    points: np.ndarray  # (m, 2) int cells
    axis_pair: tuple[int, int]
    closed: bool = True

    def __len__(self):
        return len(self.points)


def project_to_axis_plane(loop, normal, closed: bool = True) -> ProjectedLoop:
    """Drop the coordinate with the largest |normal| component, keeping order.

    Consecutive voxels landing on the same cell are merged.
    """
    drop = drop_axis(normal)
    keep = tuple(a for a in range(3) if a != drop)
    pts = np.asarray(loop, dtype=np.int64).reshape(-1, 3)[:, keep]
    out = [pts[0]]
    for p in pts[1:]:
        if np.any(p != out[-1]):
            out.append(p)
    if closed and len(out) > 1 and np.all(out[0] == out[-1]):
        out.pop()
    arr = np.array(out, dtype=np.int64)
    seq = np.vstack([arr, arr[:1]]) if closed and len(arr) > 1 else arr
    if len(seq) > 1 and np.abs(np.diff(seq, axis=0)).max() > 1:
        raise ValueError("projection breaks 8-adjacency of the loop")
    return ProjectedLoop(arr, keep, closed)


# -- contours ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Contour:
    """Rectilinear polyline on the voxel-face lattice.

    ``vertices`` are the corner points (direction changes) in traversal order.
    ``region_left`` says on which side of the traversal the barrier side lies.
    """

    vertices: np.ndarray  # (m, 2) float
    closed: bool = True
    region_left: bool = True

    def segments(self) -> list[tuple[np.ndarray, np.ndarray]]:
        v = self.vertices
        n = len(v)
        if self.closed:
            return [(v[i], v[(i + 1) % n]) for i in range(n)]
        return [(v[i], v[i + 1]) for i in range(n - 1)]

    def length(self) -> float:
        return float(sum(np.abs(b - a).sum() for a, b in self.segments()))

    def area(self) -> float:
        return shoelace(self.vertices) if self.closed else 0.0


def _compress(vertices: list) -> np.ndarray:
    """Remove collinear intermediate vertices of a closed rectilinear loop."""
    v = np.asarray(vertices, dtype=float)
    keep = []
    n = len(v)
    for i in range(n):
        a, b, c = v[i - 1], v[i], v[(i + 1) % n]
        if abs((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])) > 0:
            keep.append(i)
    return v[keep]


def contour_from_mask(mask: np.ndarray, origin=(0, 0)) -> Contour:
    """Outer boundary of the cells in ``mask`` (cell (i, j) spans [i, i+1] x [j, j+1]).

    Traversed counter-clockwise with the region on the left.  At pinch vertices
    the trace turns left, so diagonal-only contacts stay separate.
    """
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise ValueError("empty region")
    p = np.pad(m, 1)
    out_edges: dict[tuple[int, int], list[tuple[int, int]]] = {}
    cells = np.argwhere(m) + 1
    for i, j in cells:
        x, y = i - 1, j - 1
        if not p[i, j - 1]:
            out_edges.setdefault((x, y), []).append((x + 1, y))
        if not p[i + 1, j]:
            out_edges.setdefault((x + 1, y), []).append((x + 1, y + 1))
        if not p[i, j + 1]:
            out_edges.setdefault((x + 1, y + 1), []).append((x, y + 1))
        if not p[i - 1, j]:
            out_edges.setdefault((x, y + 1), []).append((x, y))
    # lowest row, leftmost cell: its bottom edge is on the outer boundary
    j0 = int(np.argwhere(m)[:, 1].min())
    i0 = int(np.argwhere(m[:, j0])[:, 0].min())
    start = (i0, j0)
    verts = [start]
    cur, heading = start, (1, 0)
    while True:
        choices = out_edges[cur]
        if len(choices) == 1:
            nxt = choices[0]
        else:
            # prefer left turn, then straight, then right
            def rank(e):
                d = (e[0] - cur[0], e[1] - cur[1])
                cross = heading[0] * d[1] - heading[1] * d[0]
                return -cross
            nxt = min(choices, key=rank)
        heading = (nxt[0] - cur[0], nxt[1] - cur[1])
        cur = nxt
        if cur == start:
            break
        verts.append(cur)
    v = _compress(verts) + np.asarray(origin, dtype=float)
    return Contour(v, closed=True, region_left=True)


def enclosed_cells(loop: ProjectedLoop, seed=None) -> tuple[np.ndarray, np.ndarray] | None:
    """Cells enclosed by the loop (4-connected fill from outside is blocked by the loop).

    Returns ``(mask, origin)`` for the component holding ``seed`` when the seed
    is enclosed, else the largest enclosed component; ``None`` when nothing is enclosed.
    """
    pts = loop.points
    lo = pts.min(axis=0) - 1
    hi = pts.max(axis=0) + 2
    grid = np.zeros(tuple(hi - lo), bool)
    grid[tuple((pts - lo).T)] = True
    labels, n = ndimage.label(~grid)  # 4-connectivity
    outside = labels[0, 0]
    inside = (labels != outside) & ~grid
    if not inside.any():
        return None
    comp, nc = ndimage.label(inside)
    pick = 0
    if seed is not None:
        s = np.asarray(seed) - lo
        if np.all(s >= 0) and np.all(s < grid.shape):
            pick = comp[tuple(s)]
    if pick == 0:
        sizes = ndimage.sum(inside, comp, index=range(1, nc + 1))
        pick = int(np.argmax(sizes)) + 1
    return comp == pick, lo


def contour_from_loop(loop: ProjectedLoop, seed=None) -> Contour | None:
    found = enclosed_cells(loop, seed)
    if found is None:
        return None
    mask, lo = found
    return contour_from_mask(mask, lo)


def inner_cells(contour: Contour) -> np.ndarray:
    """Cells on the barrier side of each unit edge, consecutive duplicates merged."""
    cells = []
    sign = 1.0 if contour.region_left else -1.0
    for a, b in contour.segments():
        d = np.sign(b - a)
        n = int(np.abs(b - a).sum())
        left = np.array([-d[1], d[0]]) * sign
        for t in range(n):
            mid = a + d * (t + 0.5)
            cell = np.floor(mid + 0.5 * left).astype(np.int64)
            if not cells or np.any(cells[-1] != cell):
                cells.append(cell)
    if contour.closed and len(cells) > 1 and np.all(cells[0] == cells[-1]):
        cells.pop()
    return np.array(cells, dtype=np.int64)


# -- shape classification --------------------------------------------------------

ARM_MIN = 3  # faces per arm of an L / U / T shape
U_MIDDLE = (2, 3)  # face count range of the short middle part of a U / T shape


@dataclass(frozen=True)
class ShapeSegment:
    kind: str  # "U", "T", "L", "C" or "run"
    indices: tuple[int, ...]  # contour segment indices


def _seg_info(contour: Contour):
    segs = contour.segments()
    dirs = [np.sign(b - a).astype(int) for a, b in segs]
    lens = [int(np.abs(b - a).sum()) for a, b in segs]
    return segs, dirs, lens


def _turn(d1, d2) -> int:
    return int(d1[0] * d2[1] - d1[1] * d2[0])


def classify_shapes(contour: Contour) -> list[ShapeSegment]:
    segs, dirs, lens = _seg_info(contour)
    n = len(segs)
    closed = contour.closed

    def idx(i):
        return i % n if closed else i

    def valid(i):
        return closed or 0 <= i < n

    out: list[ShapeSegment] = []
    sharp_corner = set()  # corner i sits between segment i and i+1
    used_middle = set()
    claimed = set()  # segments inside an accepted U / T
    found: dict[str, list] = {"U": [], "T": []}
    for i in range(n if closed else n - 2):
        a, b, c = idx(i), idx(i + 1), idx(i + 2)
        if not (valid(i) and valid(i + 2)):
            continue
        if lens[a] >= ARM_MIN and U_MIDDLE[0] <= lens[b] <= U_MIDDLE[1] and lens[c] >= ARM_MIN:
            kind = "U" if _turn(dirs[a], dirs[b]) == _turn(dirs[b], dirs[c]) else "T"
            found[kind].append((a, b, c))
    # U before T; a middle may not be reused, nor may an arm be another's middle
    for kind in ("U", "T"):
        for a, b, c in found[kind]:
            if b in claimed or a in used_middle or c in used_middle:
                continue
            out.append(ShapeSegment(kind, (a, b, c)))
            sharp_corner.update({a, b})
            used_middle.add(b)
            claimed.update({a, b, c})
    for i in range(n if closed else n - 1):
        a, b = idx(i), idx(i + 1)
        if a in sharp_corner:
            continue
        if lens[a] >= ARM_MIN and lens[b] >= ARM_MIN:
            out.append(ShapeSegment("L", (a, b)))
            sharp_corner.add(a)
    for i in range(n):
        if dirs[i][0] != 0 or i in used_middle:
            continue
        if not closed and (i == 0 or i == n - 1):
            continue
        p, q = idx(i - 1), idx(i + 1)
        if p in sharp_corner or i in sharp_corner:
            continue
        if dirs[p][0] != 0 and dirs[q][0] != 0 and dirs[p][0] == -dirs[q][0]:
            out.append(ShapeSegment("C", (i,)))
    for i in range(n):
        if dirs[i][1] == 0:
            out.append(ShapeSegment("run", (i,)))
    return out


# -- point sets ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray  # (m, 2)
    tags: tuple[str, ...]  # "vertex", "c_mid", "run_mid" or "end"
    closed: bool = True

    def __len__(self):
        return len(self.points)


VERTEX_GAP = 2.0  # minimum contour distance between shape vertex points


def extract_points(contour: Contour, shapes: list[ShapeSegment] | None = None) -> PointSet:
    if shapes is None:
        shapes = classify_shapes(contour)
    segs, dirs, lens = _seg_info(contour)
    offset = np.concatenate([[0], np.cumsum(lens)])
    total = offset[-1]
    items: list[tuple[float, tuple[float, float], str]] = []
    vertices: list[tuple[int, float, tuple[float, float], bool]] = []  # (rank, pos, point, corner)

    def place(seg, t):
        p = segs[seg][0] + dirs[seg] * t
        return float(offset[seg] + t), (float(p[0]), float(p[1]))

    def at(seg, t, tag):
        pos, p = place(seg, t)
        items.append((pos, p, tag))

    def vertex(rank, seg, t):
        pos, p = place(seg, t)
        vertices.append((rank, pos, p, t == 0.0))

    for sh in shapes:
        if sh.kind == "run":
            i = sh.indices[0]
            at(i, lens[i] / 2.0, "run_mid")
        elif sh.kind == "C":
            i = sh.indices[0]
            at(i, lens[i] / 2.0, "c_mid")
        else:
            rank = 0 if sh.kind in ("U", "T") else 1
            first, last = sh.indices[0], sh.indices[-1]
            vertex(rank, first, max(lens[first] - 2, 0))
            for i in sh.indices[1:]:
                vertex(rank, i, 0.0)
            vertex(rank, last, min(2, lens[last]))

    def gap(p, q):
        d = abs(p - q)
        return min(d, total - d) if contour.closed else d

    kept: list[float] = []
    for rank, pos, p, corner in sorted(vertices, key=lambda v: (not v[3], v[0], v[1])):
        if corner or all(gap(pos, q) >= VERTEX_GAP - 1e-9 for q in kept):
            kept.append(pos)
            items.append((pos, p, "vertex"))
    if not contour.closed:
        at(0, 0.0, "end")
        at(len(segs) - 1, float(lens[-1]), "end")
    items.sort(key=lambda it: it[0])
    pts, tags, last_pos = [], [], None
    for pos, p, tag in items:
        if last_pos is not None and abs(pos - last_pos) < 1e-9:
            if tag == "vertex":
                tags[-1] = tag
            continue
        if contour.closed and pts and abs(pos - total) < 1e-9 and abs(items[0][0]) < 1e-9:
            continue
        pts.append(p)
        tags.append(tag)
        last_pos = pos
    return PointSet(np.array(pts, dtype=float).reshape(-1, 2), tuple(tags), contour.closed)


# -- lengths ---------------------------------------------------------------------

def polyline_length(ps: PointSet | np.ndarray, closed: bool | None = None, voxel_size: float = 1.0) -> float:
    pts = ps.points if isinstance(ps, PointSet) else np.asarray(ps, dtype=float)
    if closed is None:
        closed = ps.closed if isinstance(ps, PointSet) else False
    if len(pts) < 2:
        raise ValueError("need at least two points")
    seq = np.vstack([pts, pts[:1]]) if closed else pts
    return float(np.linalg.norm(np.diff(seq, axis=0), axis=1).sum()) * voxel_size


def face_midpoints(contour: Contour) -> np.ndarray:
    """Midpoint of every unit face along the contour, in order."""
    out = []
    for a, b in contour.segments():
        d = np.sign(b - a)
        n = int(np.abs(b - a).sum())
        out.extend(a + d * (t + 0.5) for t in range(n))
    return np.array(out, dtype=float).reshape(-1, 2)


def midpoint_length_baseline(chain, closed: bool = True, voxel_size: float = 1.0) -> float:
    """Classic mid-point length: straight links between consecutive boundary midpoints.

    ``chain`` is a :class:`Contour` (face midpoints are used), a
    :class:`ProjectedLoop` or an array of points.  Links are unit, diagonal or
    half-diagonal, which is the source of the method's error.
    """
    if isinstance(chain, Contour):
        pts, closed = face_midpoints(chain), chain.closed
    elif isinstance(chain, ProjectedLoop):
        pts, closed = chain.points.astype(float), chain.closed
    else:
        pts = np.asarray(chain, dtype=float)
    if len(pts) < 2:
        return 0.0
    return polyline_length(pts, closed=closed, voxel_size=voxel_size)


# -- areas -----------------------------------------------------------------------

def shoelace(points) -> float:
    p = np.asarray(points, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def self_intersects(points) -> bool:
    """True when two non-adjacent edges of the closed polygon properly cross."""
    p = np.asarray(points, dtype=float)
    n = len(p)
    if n < 4:
        return False
    a, b = p, np.roll(p, -1, axis=0)
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]

    def orient(p1, p2, p3):
        return np.sign((p2[:, 0] - p1[:, 0]) * (p3[:, 1] - p1[:, 1]) - (p2[:, 1] - p1[:, 1]) * (p3[:, 0] - p1[:, 0]))

    o1 = orient(a[i], b[i], a[j])
    o2 = orient(a[i], b[i], b[j])
    o3 = orient(a[j], b[j], a[i])
    o4 = orient(a[j], b[j], b[i])
    return bool(np.any((o1 * o2 < 0) & (o3 * o4 < 0)))


def polygon_area(ps: PointSet | np.ndarray, voxel_size: float = 1.0, check: bool = True) -> float:
    pts = ps.points if isinstance(ps, PointSet) else np.asarray(ps, dtype=float)
    if len(pts) < 3:
        raise ValueError("need at least three points")
    if check and self_intersects(pts):
        raise ValueError("polygon is self-intersecting")
    return shoelace(pts) * voxel_size**2


def fan_area(loop3d, apex) -> float:
    """Sum of triangles (c_i, c_{i+1}, apex) around a closed loop."""
    c = np.asarray(loop3d, dtype=float)
    if len(c) < 3:
        raise ValueError("fan area needs at least three loop points")
    a = c - np.asarray(apex, dtype=float)
    b = np.roll(a, -1, axis=0)
    if a.shape[1] == 2:
        return 0.5 * float(np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]).sum())
    return 0.5 * float(np.linalg.norm(np.cross(a, b), axis=1).sum())


def convex_order(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    g = p.mean(axis=0)
    ang = np.arctan2(p[:, 1] - g[1], p[:, 0] - g[0])
    return p[np.argsort(ang, kind="stable")]


def quadrilateral_area(p1, p2, p3, p4) -> float:
    return shoelace(convex_order([p1, p2, p3, p4]))


# -- throat-level measurement ----------------------------------------------------

@dataclass
class LoopMeasure:
    area: float
    length: float
    points3d: np.ndarray | None = None
    tags: tuple[str, ...] = ()
    method: str = "pointset"


def lift_to_plane(points2d, axis_pair, normal, origin) -> np.ndarray:
    """Place 2D points of the retained axes back on the plane through ``origin``."""
    p2 = np.asarray(points2d, dtype=float)
    drop = 3 - sum(axis_pair)
    n = np.asarray(normal, dtype=float)
    o = np.asarray(origin, dtype=float)
    out = np.empty((len(p2), 3))
    out[:, axis_pair[0]] = p2[:, 0]
    out[:, axis_pair[1]] = p2[:, 1]
    rhs = n @ o - n[axis_pair[0]] * p2[:, 0] - n[axis_pair[1]] * p2[:, 1]
    out[:, drop] = rhs / n[drop]
    return out


def planar_pointset(loop, normal, origin, seed3d=None) -> tuple[PointSet, ProjectedLoop] | None:
    proj = project_to_axis_plane(loop, normal)
    seed = None
    if seed3d is not None:
        seed = np.asarray(seed3d)[list(proj.axis_pair)]
    contour = contour_from_loop(proj, seed)
    if contour is None:
        return None
    ps = extract_points(contour)
    if len(ps) < 3:
        return None
    return ps, proj


def measure_planar(loop_area, loop_length, normal, origin, nu_k, voxel_size: float = 1.0) -> LoopMeasure | None:
    """Point-set area (from the 26-connected loop) and length (from the 6-connected loop)."""
    n = np.asarray(normal, dtype=float)
    found = planar_pointset(loop_area, n, origin, nu_k)
    if found is None:
        return None
    ps, proj = found
    drop = 3 - sum(proj.axis_pair)
    area = shoelace(ps.points) / abs(n[drop]) * voxel_size**2
    found_len = planar_pointset(loop_length, n, origin, nu_k)
    ps_len, proj_len = found_len if found_len is not None else found
    pts3 = lift_to_plane(ps_len.points, proj_len.axis_pair, n, origin)
    length = polyline_length(pts3, closed=True) * voxel_size
    return LoopMeasure(area, length, pts3, ps_len.tags, "pointset")


def inset_centres(loop, amount: float = 0.5) -> np.ndarray:
    """Voxel centres pulled ``amount`` towards the loop centroid (the void-facing side)."""
    c = np.asarray(loop, dtype=float) + 0.5
    g = c.mean(axis=0)
    d = g - c
    nrm = np.linalg.norm(d, axis=1)
    nrm[nrm == 0] = 1.0
    return c + amount * d / nrm[:, None]


def measure_nonplanar(loop_area, loop_length, voxel_size: float = 1.0) -> LoopMeasure:
    """Centroid fan over inset voxel centres; length along the inset 6-connected loop."""
    pa = inset_centres(loop_area)
    area = fan_area(pa, pa.mean(axis=0)) * voxel_size**2
    pl = inset_centres(loop_length)
    length = polyline_length(pl, closed=True) * voxel_size
    return LoopMeasure(area, length, pl, (), "centroid_fan")

