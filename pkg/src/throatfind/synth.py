"""Synthetic solids with known answers, plus the digitised-length benchmark."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import measure
from .medial import MedialAxisPath, digital_segment
from .voxgrid import SegmentedImage

MARGIN = 2

# -- 2D digitised boundaries -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DigitizedLine:
    """Grain below ``y = tan(k) x`` on columns ``0 .. x_max - 1``."""

    angle_deg: float
    x_max: int
    heights: np.ndarray  # grain cells per column, bottom-contiguous

    @property
    def true_length(self) -> float:
        return self.x_max / math.cos(math.radians(self.angle_deg))

    def mask(self) -> np.ndarray:
        h = int(self.heights.max()) + 1
        return np.arange(h)[None, :] < self.heights[:, None]

    def contour(self) -> measure.Contour:
        """Open top contour from x = 0 to x = x_max; grain lies on the right."""
        verts = [(0.0, float(self.heights[0]))]
        for x in range(self.x_max):
            h = float(self.heights[x])
            verts.append((x + 1.0, h))
            if x + 1 < self.x_max and self.heights[x + 1] != self.heights[x]:
                verts.append((x + 1.0, float(self.heights[x + 1])))
        v = np.array(verts)
        keep = [0]
        for i in range(1, len(v) - 1):
            a, b, c = v[keep[-1]], v[i], v[i + 1]
            if (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) != 0:
                keep.append(i)
        keep.append(len(v) - 1)
        return measure.Contour(v[keep], closed=False, region_left=False)


def gen_digitized_line(angle_deg: float, scale: float = 5000) -> DigitizedLine:
    """Digitise the boundary ``y = tan(k) x`` over ``x in [0, floor(scale cos k)]``.

    A cell is grain when at least half its area lies below the line.  For a
    straight line that area equals one half exactly when the line passes
    through the cell centre, so the count per column is
    ``floor(f(x + 1/2) + 1/2)``.
    """
    if not 0 < angle_deg < 90:
        raise ValueError("angle must lie strictly between 0 and 90 degrees")
    k = math.radians(angle_deg)
    x_max = int(math.floor(scale * math.cos(k)))
    x = np.arange(x_max) + 0.5
    heights = np.floor(math.tan(k) * x + 0.5).astype(np.int64)
    return DigitizedLine(float(angle_deg), x_max, np.maximum(heights, 0))


@dataclass(frozen=True, eq=False)
class DigitizedCircle:
    radius: float
    mask: np.ndarray  # grain disc

    @property
    def true_length(self) -> float:
        return 2 * math.pi * self.radius


def gen_digitized_circle(radius: float, subsample: int = 16) -> DigitizedCircle:
    """Grain disc: a cell is grain when more than half of its ``subsample``^2 samples fall inside."""
    if radius < 5:
        raise ValueError("radius must be at least 5")
    n = int(math.ceil(2 * radius)) + 2 * MARGIN + 2
    c = n / 2.0
    offs = (np.arange(subsample) + 0.5) / subsample
    mask = np.zeros((n, n), bool)
    ys = (np.arange(n)[:, None] + offs[None, :]).ravel() - c  # (n * s,)
    half = subsample * subsample / 2.0
    for i in range(n):
        xs = i + offs - c
        inside = (xs[:, None] ** 2 + ys[None, :] ** 2) <= radius * radius
        counts = inside.reshape(subsample, n, subsample).sum(axis=(0, 2))
        mask[i] = counts > half
    return DigitizedCircle(float(radius), mask)


@dataclass
class LengthCase:
    case: float
    true_length: float
    pointset_length: float
    midpoint_length: float

    @property
    def pointset_error(self) -> float:
        return abs(self.pointset_length - self.true_length) / self.true_length

    @property
    def midpoint_error(self) -> float:
        return abs(self.midpoint_length - self.true_length) / self.true_length


def line_case(angle_deg: float, scale: float = 5000) -> LengthCase:
    line = gen_digitized_line(angle_deg, scale)
    contour = line.contour()
    ps = measure.extract_points(contour)
    return LengthCase(angle_deg, line.true_length, measure.polyline_length(ps), measure.midpoint_length_baseline(contour))


def circle_case(radius: float) -> LengthCase:
    circ = gen_digitized_circle(radius)
    contour = measure.contour_from_mask(circ.mask)
    ps = measure.extract_points(contour)
    return LengthCase(radius, circ.true_length, measure.polyline_length(ps), measure.midpoint_length_baseline(contour))


def bench_length_errors(kind: str, cases=None, scale: float = 5000) -> list[LengthCase]:
    if kind == "line":
        return [line_case(k, scale) for k in (cases if cases is not None else range(1, 90))]
    if kind == "circle":
        return [circle_case(r) for r in (cases if cases is not None else (10, 20, 50, 100, 200))]
    raise ValueError(f"unknown benchmark kind {kind!r}")


# -- 3D solids ------------------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one generated fixture; ``kind`` selects the generator."""

    kind: str
    params: dict = field(default_factory=dict)

    def build(self):
        gens = {
            "tube": gen_tube,
            "hourglass": gen_hourglass,
            "annulus": gen_annulus,
            "crossed_cylinders": gen_crossed_cylinders,
            "sphere_pack": gen_sphere_pack,
            "line": gen_digitized_line,
            "circle": gen_digitized_circle,
        }
        if self.kind not in gens:
            raise ValueError(f"unknown synthetic kind {self.kind!r}")
        return gens[self.kind](**self.params)


@dataclass(frozen=True, eq=False)
class SynthVolume:
    image: SegmentedImage
    paths: list[MedialAxisPath]
    info: dict = field(default_factory=dict)


def _centres(dims) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return tuple(np.arange(n, dtype=float) + 0.5 for n in dims)  # type: ignore[return-value]


def _axis_frame(direction) -> np.ndarray:
    d = np.asarray(direction, dtype=float)
    return d / np.linalg.norm(d)


def _tube_void(dims, centre, axis, radius_at: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    x, y, z = _centres(dims)
    px = x[:, None, None] - centre[0]
    py = y[None, :, None] - centre[1]
    pz = z[None, None, :] - centre[2]
    s = px * axis[0] + py * axis[1] + pz * axis[2]
    r2 = px**2 + py**2 + pz**2 - s**2
    return r2 <= radius_at(s) ** 2


def _axis_path(centre, axis, half: float, path_id: int = 0) -> MedialAxisPath:
    a = np.floor(centre - axis * half).astype(np.int64)
    b = np.floor(centre + axis * half).astype(np.int64)
    return MedialAxisPath(path_id, digital_segment(a, b))


def _open_tube_dims(axis, half_path: float, radius: float) -> tuple[np.ndarray, np.ndarray]:
    # room for planes tilted up to 45 degrees at either path end
    half_len = half_path + radius + 3
    ext = half_len * np.abs(axis) + radius * np.sqrt(np.clip(1 - axis**2, 0, 1)) + MARGIN
    dims = np.ceil(2 * ext).astype(int) + 1
    centre = np.floor(dims / 2.0) + 0.5
    return dims, centre


def gen_tube(radius: float, direction=(0, 0, 1), half_path: float = 10.0, radius_at=None) -> SynthVolume:
    """Straight open-ended tube through the image centre, with its axis as the path.

    The tube runs out through the image faces, far enough beyond the path ends
    that planes tilted by up to 45 degrees stay inside it.
    """
    if radius < 2:
        raise ValueError("tube radius must be at least 2 voxels")
    axis = _axis_frame(direction)
    dims, centre = _open_tube_dims(axis, half_path, radius)
    prof = radius_at if radius_at is not None else (lambda s: np.full_like(s, float(radius)))
    void = _tube_void(dims, centre, axis, prof)
    img = SegmentedImage.from_void_mask(void)
    path = _axis_path(centre, axis, half_path)
    return SynthVolume(img, [path], {"radius": float(radius), "axis": axis, "centre": centre})


def gen_hourglass(r_max: float = 12.0, r_min: float = 6.0, slope: float = 0.5, direction=(0, 0, 1)) -> SynthVolume:
    """Tube whose radius narrows linearly from ``r_max`` to ``r_min`` at the middle of the path."""
    if not 2 <= r_min < r_max:
        raise ValueError("need 2 <= r_min < r_max")
    taper = (r_max - r_min) / slope
    vol = gen_tube(r_max, direction, half_path=taper + 4, radius_at=lambda s: np.minimum(r_max, r_min + slope * np.abs(s)))
    path = vol.paths[0]
    centre = vol.info["centre"]
    d = np.linalg.norm(path.voxels + 0.5 - centre, axis=1)
    waist = int(np.argmin(d))
    return SynthVolume(vol.image, vol.paths, {**vol.info, "r_min": r_min, "waist_index": waist})


def gen_annulus(radius: float = 10.0, pillar: int = 3, offset: int = 6, half_path: float = 4.0) -> SynthVolume:
    """Open z-tube with a square grain pillar along its axis; the path runs ``offset`` voxels off-centre."""
    if pillar % 2 != 1:
        raise ValueError("pillar width must be odd")
    if not (pillar / 2.0 + 1 <= offset <= radius - 2):
        raise ValueError("path offset must lie between the pillar and the wall")
    axis = np.array([0.0, 0.0, 1.0])
    dims, centre = _open_tube_dims(axis, half_path, radius)
    void = _tube_void(dims, centre, axis, lambda s: np.full_like(s, float(radius)))
    ci = np.floor(centre).astype(int)
    h = pillar // 2
    void[ci[0] - h:ci[0] + h + 1, ci[1] - h:ci[1] + h + 1, :] = False
    img = SegmentedImage.from_void_mask(void)
    path = _axis_path(centre + np.array([offset, 0.0, 0.0]), axis, half_path)
    return SynthVolume(img, [path], {"radius": float(radius), "pillar": pillar, "centre": centre})


def gen_crossed_cylinders(r1: float = 10.0, r2: float = 10.0, angle: float = 90.0, offset: float = 0.0, half_length: float | None = None) -> SynthVolume:
    """Two capped cylinders in the xy plane crossing at ``angle`` degrees.

    Cylinder 1 runs along x through the image centre; cylinder 2 is rotated by
    ``angle`` about z and shifted by ``offset`` along z.  Each path is the part
    of a cylinder axis at least ``radius + 1`` voxels away from its caps.
    """
    if min(r1, r2) < 3:
        raise ValueError("cylinder radii must be at least 3 voxels")
    if abs(math.sin(math.radians(angle))) < 1e-9:
        raise ValueError("parallel cylinders do not cross")
    if abs(offset) >= r1 + r2:
        raise ValueError("cylinders do not overlap")
    rmax = max(r1, r2)
    hl = float(half_length) if half_length is not None else 3.0 * rmax
    a1 = np.array([1.0, 0.0, 0.0])
    t = math.radians(angle)
    a2 = np.array([math.cos(t), math.sin(t), 0.0])
    ext_xy = hl + rmax
    ext_z = rmax + abs(offset) / 2.0
    dims = np.array([math.ceil(2 * ext_xy), math.ceil(2 * ext_xy), math.ceil(2 * ext_z)]) + 2 * MARGIN
    centre = np.floor(dims / 2.0) + 0.5
    c1 = centre - np.array([0.0, 0.0, offset / 2.0])
    c2 = centre + np.array([0.0, 0.0, offset / 2.0])
    void = np.zeros(tuple(dims), bool)
    for c, a, r in ((c1, a1, r1), (c2, a2, r2)):
        part = _tube_void(dims, c, a, lambda s, r=r: np.where(np.abs(s) <= hl, r, -1.0))
        void |= part
    void[:MARGIN] = void[-MARGIN:] = False
    void[:, :MARGIN] = void[:, -MARGIN:] = False
    void[:, :, :MARGIN] = void[:, :, -MARGIN:] = False
    img = SegmentedImage.from_void_mask(void)
    paths = [_axis_path(c1, a1, hl - r1 - 1, 0), _axis_path(c2, a2, hl - r2 - 1, 1)]
    return SynthVolume(img, paths, {"r1": r1, "r2": r2, "angle": angle, "offset": offset, "centre": centre})


def gen_sphere_pack(n_side: int = 3, layers: int | None = None, radius: float = 10.0, spacing: float | None = None) -> SynthVolume:
    """Cubic lattice of spheres inside a box tangent to the outer spheres.

    Paths join neighbouring interstitial sites (cube centres of eight spheres)
    through the square window between four spheres, and join every site next
    to the box to the wall through the window facing it.
    """
    nz = layers if layers is not None else n_side
    sp = float(spacing) if spacing is not None else 2.0 * radius
    if sp < 2 * radius - 2:
        raise ValueError("spacing must be at least 2 * radius - 2")
    if 2 * radius - sp > 0.2 * radius:
        raise ValueError("spheres overlap by more than 20% of the radius")
    counts = np.array([n_side, n_side, nz])
    inner = (counts - 1) * sp + 2 * radius
    dims = np.ceil(inner).astype(int) + 2 * MARGIN
    lo = np.full(3, float(MARGIN))
    x, y, z = _centres(dims)
    grain = np.ones(tuple(dims), bool)
    box = (slice(MARGIN, MARGIN + int(math.ceil(inner[0]))), slice(MARGIN, MARGIN + int(math.ceil(inner[1]))), slice(MARGIN, MARGIN + int(math.ceil(inner[2]))))
    grain[box] = False
    centres = [lo + radius + sp * np.array([i, j, k]) for i in range(counts[0]) for j in range(counts[1]) for k in range(counts[2])]
    for c in centres:
        d2 = (x[:, None, None] - c[0]) ** 2 + (y[None, :, None] - c[1]) ** 2 + (z[None, None, :] - c[2]) ** 2
        grain |= d2 <= radius * radius
    img = SegmentedImage.from_void_mask(~grain)

    sites = {}
    for i in range(counts[0] - 1):
        for j in range(counts[1] - 1):
            for k in range(counts[2] - 1):
                sites[(i, j, k)] = lo + radius + sp * (np.array([i, j, k]) + 0.5)
    paths = []
    hi = lo + inner

    def add(p0, p1):
        seg = digital_segment(np.floor(p0).astype(int), np.floor(p1).astype(int))
        paths.append(MedialAxisPath(len(paths), seg))

    for key, p in sites.items():
        for ax in range(3):
            nb = list(key)
            nb[ax] += 1
            if tuple(nb) in sites:
                add(p, sites[tuple(nb)])
    n_interior = len(paths)
    for key, p in sites.items():
        for ax in range(3):
            for side in (-1, 1):
                nb = list(key)
                nb[ax] += side
                if tuple(nb) in sites:
                    continue
                q = p.copy()
                q[ax] = lo[ax] + 0.5 if side < 0 else hi[ax] - 0.5
                add(p, q)
    neck = (4.0 - math.pi) * radius**2 if sp == 2 * radius else None
    return SynthVolume(img, paths, {"radius": radius, "spacing": sp, "n_interior_paths": n_interior, "neck_area": neck, "n_sites": len(sites)})
