"""Gap bridging over boundary-grain voxels.

Searches run Dijkstra inside a cube around the two gap ends.  Entering a voxel
costs its centre's distance to the medial-axis voxel, so among connecting
paths the one hugging the medial axis wins even when it takes more steps.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .medial import CuttingPlane, plane_membership_mask
from .voxgrid import SegmentedImage, is_boundary_grain, offsets, Connectivity

DEFAULT_PADS = (4, 5, 6, 7, 8)
_N26 = [tuple(int(c) for c in o) for o in offsets(Connectivity.TWENTY_SIX)]


@dataclass(frozen=True)
class RoiCube:
    center: tuple[float, float, float]  # voxel-centre coordinates
    side: int
    l_c: int

    def bounds(self, dims) -> tuple[np.ndarray, np.ndarray]:
        """Inclusive lo / exclusive hi bounds of voxels whose cube lies inside, clipped to ``dims``."""
        c = np.asarray(self.center)
        half = self.side / 2.0
        lo = np.ceil(c - half - 1e-9).astype(int)
        hi = np.floor(c + half + 1e-9).astype(int)
        return np.maximum(lo, 0), np.minimum(hi, np.asarray(dims))

    def contains(self, v) -> bool:
        v = np.asarray(v, dtype=float)
        c = np.asarray(self.center)
        half = self.side / 2.0
        return bool(np.all(v >= c - half - 1e-9) and np.all(v + 1.0 <= c + half + 1e-9))


def roi_cube(a, b, pad: int) -> RoiCube:
    if pad < 0:
        raise ValueError("pad must be non-negative")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    l_c = int(np.abs(a - b).max()) + 1
    center = tuple(float(x) for x in (a + b) / 2.0 + 0.5)
    return RoiCube(center, l_c + pad, l_c)


@dataclass
class BridgePath:
    voxels: list[tuple[int, int, int]]
    cost: float

    @property
    def steps(self) -> int:
        return len(self.voxels) - 1


def _node_mask(img: SegmentedImage, roi: RoiCube, plane: CuttingPlane | None) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = roi.bounds(img.dims)
    if np.any(hi <= lo):
        return np.zeros((0, 0, 0), bool), lo
    sub = img.boundary_grain[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]].copy()
    if plane is not None and sub.any():
        idx = np.argwhere(sub)
        on = plane_membership_mask(plane, idx + lo)
        sub[tuple(idx[~on].T)] = False
    return sub, lo


def bridge_gap(img: SegmentedImage, start, goal, roi: RoiCube, nu_k, plane: CuttingPlane | None = None) -> BridgePath | None:
    """Cheapest 26-connected boundary-grain path from ``start`` to ``goal`` inside ``roi``.

    ``plane`` restricts intermediate nodes to voxels on that plane (the two
    end voxels are always admitted).  Ties on cost go to fewer steps, then to
    the lexicographically smaller voxel.  Returns ``None`` when unreachable.
    """
    start = tuple(int(c) for c in start)
    goal = tuple(int(c) for c in goal)
    for name, v in (("start", start), ("goal", goal)):
        if not is_boundary_grain(img, v):
            raise ValueError(f"{name} voxel {v} is not boundary grain")
    nu = np.asarray(nu_k, dtype=float) + 0.5
    if start == goal:
        return BridgePath([start], 0.0)
    mask, lo = _node_mask(img, roi, plane)
    lo_t = tuple(int(c) for c in lo)
    shape = mask.shape

    def admitted(v) -> bool:
        if v == start or v == goal:
            return True
        i = (v[0] - lo_t[0], v[1] - lo_t[1], v[2] - lo_t[2])
        return 0 <= i[0] < shape[0] and 0 <= i[1] < shape[1] and 0 <= i[2] < shape[2] and bool(mask[i])

    def weight(v) -> float:
        return math.sqrt((v[0] + 0.5 - nu[0]) ** 2 + (v[1] + 0.5 - nu[1]) ** 2 + (v[2] + 0.5 - nu[2]) ** 2)

    best = {start: (0.0, 0)}
    prev: dict = {}
    heap = [(0.0, 0, start)]
    done = set()
    while heap:
        cost, steps, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        if v == goal:
            break
        for o in _N26:
            w = (v[0] + o[0], v[1] + o[1], v[2] + o[2])
            if w in done or not admitted(w):
                continue
            key = (cost + weight(w), steps + 1)
            old = best.get(w)
            if old is None or key < old or (key == old and v < prev[w]):
                best[w] = key
                prev[w] = v
                heapq.heappush(heap, (key[0], key[1], w))
    if goal not in done:
        return None
    path = [goal]
    while path[-1] != start:
        path.append(prev[path[-1]])
    path.reverse()
    return BridgePath(path, best[goal][0])


def bridge_with_growing_roi(img: SegmentedImage, start, goal, nu_k, plane: CuttingPlane | None = None, pads=DEFAULT_PADS) -> BridgePath | None:
    """Try :func:`bridge_gap` with ROI side ``l_c + pad`` for each pad in turn."""
    for pad in pads:
        found = bridge_gap(img, start, goal, roi_cube(start, goal, pad), nu_k, plane)
        if found is not None:
            return found
    return None
