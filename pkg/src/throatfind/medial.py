"""Medial-axis paths, tangent fits, direction fans and cutting planes.

Path indices ``k`` are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .voxgrid import InputError, SegmentedImage, voxel_center


@dataclass(frozen=True, eq=False)
class MedialAxisPath:
    id: int
    voxels: np.ndarray  # (n, 3) int

    def __post_init__(self):
        v = np.asarray(self.voxels, dtype=np.int64).reshape(-1, 3)
        if len(v) == 0:
            raise ValueError(f"path {self.id}: needs at least one voxel")
        steps = np.abs(np.diff(v, axis=0)).max(axis=1) if len(v) > 1 else np.ones(0)
        if np.any(steps != 1):
            bad = int(np.flatnonzero(steps != 1)[0])
            raise ValueError(f"path {self.id}: voxels {bad} and {bad + 1} are not 26-adjacent")
        v.setflags(write=False)
        object.__setattr__(self, "voxels", v)

    def __len__(self):
        return len(self.voxels)

    def check_void(self, img: SegmentedImage) -> None:
        v = self.voxels
        inside = np.all((v >= 0) & (v < np.asarray(img.dims)), axis=1)
        if not inside.all():
            raise InputError(f"path {self.id}: voxel {tuple(v[~inside][0])} outside image")
        solid = ~img.void[v[:, 0], v[:, 1], v[:, 2]]
        if solid.any():
            raise InputError(f"path {self.id}: voxel {tuple(v[solid][0])} is grain")


def _window(n: int, k: int) -> slice:
    if n <= 5:
        return slice(0, n)
    lo = min(max(k - 2, 0), n - 5)
    return slice(lo, lo + 5)


def tangent_at(path: MedialAxisPath, k: int) -> np.ndarray:
    """Unit principal axis of the 5-voxel window around ``k``.

    Near the ends the window is the 5 outermost voxels containing ``k``;
    shorter paths use every voxel.  The sign points towards increasing ``k``.
    """
    n = len(path)
    if not 0 <= k < n:
        raise IndexError(f"k={k} outside path of length {n}")
    if n == 1:
        raise ValueError(f"path {path.id} has a single voxel; no tangent direction")
    pts = path.voxels[_window(n, k)].astype(float)
    centred = pts - pts.mean(axis=0)
    if not np.any(centred):
        raise ValueError(f"path {path.id}: degenerate tangent window at k={k}")
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    t = vt[0]
    ref = path.voxels[min(k + 1, n - 1)] - path.voxels[max(k - 1, 0)]
    if float(t @ ref) == 0.0:
        ref = path.voxels[-1] - path.voxels[0]
    if float(t @ ref) < 0:
        t = -t
    return t / np.linalg.norm(t)


def orthonormal_frame(zenith) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(e1, e2, z) right-handed; e1 comes from the coordinate axis least aligned with z."""
    z = np.asarray(zenith, dtype=float)
    nrm = np.linalg.norm(z)
    if nrm == 0:
        raise ValueError("zero zenith vector")
    z = z / nrm
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(z)))] = 1.0
    e1 = helper - (helper @ z) * z
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(z, e1)
    return e1, e2, z


@dataclass(frozen=True, eq=False)
class DirectionFan:
    zenith: np.ndarray
    members: np.ndarray  # (m, 3); row 0 is the zenith
    polar: np.ndarray  # degrees, per member
    azimuth: np.ndarray  # degrees, per member

    def __len__(self):
        return len(self.members)


def direction_fan(zenith, polar_degrees=range(1, 46), azimuth_steps: int = 45, azimuth_step: float | None = None) -> DirectionFan:
    """Zenith plus every tilt by ``polar_degrees`` at uniform azimuths.

    The azimuth grid has ``azimuth_steps`` values, or, when ``azimuth_step``
    (degrees) is given, every multiple of it below 360.
    """
    e1, e2, z = orthonormal_frame(zenith)
    members, polar, azim = [z], [0.0], [0.0]
    if azimuth_step is not None:
        if azimuth_step <= 0:
            raise ValueError("azimuth step must be positive")
        step = float(azimuth_step)
        count = int(math.ceil(360.0 / step - 1e-9))
    else:
        step = 360.0 / azimuth_steps
        count = azimuth_steps
    for i in polar_degrees:
        if i == 0:
            continue
        pi = math.radians(i)
        for j in range(count):
            phi = math.radians(j * step)
            members.append(math.cos(pi) * z + math.sin(pi) * (math.cos(phi) * e1 + math.sin(phi) * e2))
            polar.append(float(i))
            azim.append(j * step)
    m = np.array(members)
    m /= np.linalg.norm(m, axis=1)[:, None]
    keep = _dedupe(m, 1e-9)
    return DirectionFan(z, m[keep], np.array(polar)[keep], np.array(azim)[keep])


def _dedupe(vecs: np.ndarray, tol: float) -> np.ndarray:
    """Indices of first occurrences after snapping to a ``tol`` grid."""
    keys = np.round(vecs / tol).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return np.sort(first)


@dataclass(frozen=True, eq=False)
class CuttingPlane:
    origin: np.ndarray  # voxel units
    normal: np.ndarray
    nu: tuple[int, int, int] = field(default=(0, 0, 0))

    def evaluate(self, p) -> np.ndarray | float:
        return (np.asarray(p, dtype=float) - self.origin) @ self.normal

    def frame(self) -> tuple[np.ndarray, np.ndarray]:
        e1, e2, _ = orthonormal_frame(self.normal)
        return e1, e2

    def to_plane_coords(self, pts) -> np.ndarray:
        e1, e2 = self.frame()
        d = np.atleast_2d(np.asarray(pts, dtype=float)) - self.origin
        return np.stack([d @ e1, d @ e2], axis=1)


def plane_of(nu_k, normal) -> CuttingPlane:
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    nu = tuple(int(c) for c in nu_k)
    return CuttingPlane(voxel_center(nu), n, nu)


_EPS = np.array([[a, b, c] for a in (0, 1) for b in (0, 1) for c in (0, 1)][1:], dtype=float)


def plane_membership_mask(plane: CuttingPlane, coords) -> np.ndarray:
    """Vectorised plane membership for an (m, 3) array of voxel indices."""
    c = np.atleast_2d(np.asarray(coords, dtype=float)) + 0.5
    base = (c - plane.origin) @ plane.normal
    shifted = base[:, None] + _EPS @ plane.normal
    return np.any(base[:, None] * shifted <= 0.0, axis=1)


def plane_membership(plane: CuttingPlane, v) -> bool:
    return bool(plane_membership_mask(plane, [v])[0])


# -- path files --------------------------------------------------------------

def read_paths(path) -> list[MedialAxisPath]:
    """Parse ``path <id>`` blocks of ``x y z`` lines separated by blank lines."""
    path = Path(path)
    out: list[MedialAxisPath] = []
    cur_id, cur, start_line = None, [], 0

    def flush():
        nonlocal cur_id, cur
        if cur_id is None:
            return
        try:
            out.append(MedialAxisPath(cur_id, np.array(cur, dtype=np.int64).reshape(-1, 3)))
        except ValueError as exc:
            raise InputError(f"{path}:{start_line}: {exc}") from None
        cur_id, cur = None, []

    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            flush()
            continue
        parts = line.split()
        if parts[0] == "path":
            flush()
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected 'path <id>'")
            try:
                cur_id = int(parts[1])
            except ValueError:
                raise InputError(f"{path}:{lineno}: path id must be an integer") from None
            start_line = lineno
            continue
        if cur_id is None:
            raise InputError(f"{path}:{lineno}: voxel line outside a 'path' block")
        if len(parts) != 3:
            raise InputError(f"{path}:{lineno}: expected three integers 'x y z'")
        try:
            cur.append([int(p) for p in parts])
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-integer coordinate") from None
    flush()
    ids = [p.id for p in out]
    if len(set(ids)) != len(ids):
        raise InputError(f"{path}: duplicate path ids")
    return out


def write_paths(paths, path) -> None:
    lines = []
    for p in paths:
        lines.append(f"path {p.id}")
        lines.extend(f"{x} {y} {z}" for x, y, z in p.voxels)
        lines.append("")
    Path(path).write_text("\n".join(lines))


def digital_segment(p0, p1) -> np.ndarray:
    """26-connected voxel chain from voxel ``p0`` to voxel ``p1`` (inclusive)."""
    a = np.asarray(p0, dtype=float)
    b = np.asarray(p1, dtype=float)
    n = int(np.abs(b - a).max())
    if n == 0:
        return a.astype(np.int64)[None, :]
    t = np.linspace(0.0, 1.0, n + 1)[:, None]
    pts = np.floor(a + t * (b - a) + 0.5).astype(np.int64)
    keep = np.ones(len(pts), bool)
    keep[1:] = np.any(np.diff(pts, axis=0) != 0, axis=1)
    return pts[keep]
