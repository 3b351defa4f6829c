"""Segmented voxel volumes: phase queries, neighbourhoods, labelling and raw I/O."""

from __future__ import annotations

import enum
import functools
import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

VOID = 0
GRAIN = 1


class Connectivity(enum.IntEnum):
    SIX = 6
    TWENTY_SIX = 26


_OFFSETS_26 = np.array(
    [o for o in itertools.product((-1, 0, 1), repeat=3) if o != (0, 0, 0)], dtype=np.int64
)
_OFFSETS_6 = np.array([o for o in _OFFSETS_26 if np.abs(o).sum() == 1], dtype=np.int64)


def offsets(kind: Connectivity) -> np.ndarray:
    return _OFFSETS_6 if Connectivity(kind) == Connectivity.SIX else _OFFSETS_26


class InputError(ValueError):
    """Malformed image or medial-axis input."""


@dataclass(frozen=True, eq=False)
class SegmentedImage:
    """Binary grain/void volume indexed ``phase[x, y, z]``.

    ``phase`` holds ``GRAIN`` (1) or ``VOID`` (0) as uint8 and is made read-only
    on construction so one instance can be shared between workers.
    """

    phase: np.ndarray
    voxel_size: float = 1.0

    def __post_init__(self):
        ph = np.asarray(self.phase)
        if ph.ndim != 3 or min(ph.shape) < 1:
            raise ValueError(f"phase must be a non-empty 3D array, got shape {ph.shape}")
        if ph.dtype == bool:
            ph = ph.astype(np.uint8)
        elif not np.isin(ph, (VOID, GRAIN)).all():
            raise ValueError("phase values must be 0 (void) or 1 (grain)")
        ph = np.ascontiguousarray(ph, dtype=np.uint8)
        ph.setflags(write=False)
        object.__setattr__(self, "phase", ph)
        if not self.voxel_size > 0:
            raise ValueError("voxel_size must be positive")
        object.__setattr__(self, "voxel_size", float(self.voxel_size))

    @classmethod
    def from_void_mask(cls, void: np.ndarray, voxel_size: float = 1.0) -> "SegmentedImage":
        return cls(np.where(np.asarray(void, dtype=bool), VOID, GRAIN).astype(np.uint8), voxel_size)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(s) for s in self.phase.shape)

    @functools.cached_property
    def void(self) -> np.ndarray:
        v = self.phase == VOID
        v.setflags(write=False)
        return v

    @functools.cached_property
    def boundary_grain(self) -> np.ndarray:
        """Grain voxels with at least one void voxel among their 26 neighbours."""
        near_void = ndimage.binary_dilation(self.void, structure=np.ones((3, 3, 3), bool))
        m = near_void & ~self.void
        m.setflags(write=False)
        return m

    def in_bounds(self, v) -> bool:
        x, y, z = v
        nx, ny, nz = self.phase.shape
        return 0 <= x < nx and 0 <= y < ny and 0 <= z < nz

    def __repr__(self):
        return f"SegmentedImage(dims={self.dims}, voxel_size={self.voxel_size}, porosity={self.void.mean():.3f})"


def voxel_center(v, voxel_size: float = 1.0) -> np.ndarray:
    return (np.asarray(v, dtype=float) + 0.5) * voxel_size


def phase_at(img: SegmentedImage, v, strict: bool = True) -> int:
    """Phase of voxel ``v``.

    With ``strict=False`` coordinates outside the volume read as grain, which is
    what ray marching and perimeter searches rely on.
    """
    if not img.in_bounds(v):
        if strict:
            raise IndexError(f"voxel {tuple(v)} outside image of dims {img.dims}")
        return GRAIN
    return int(img.phase[tuple(int(c) for c in v)])


def is_void(img: SegmentedImage, v) -> bool:
    return phase_at(img, v, strict=False) == VOID


def neighbors(v, kind: Connectivity, dims) -> list[tuple[int, int, int]]:
    base = np.asarray(v, dtype=np.int64)
    cand = base + offsets(kind)
    ok = np.all((cand >= 0) & (cand < np.asarray(dims)), axis=1)
    return [tuple(int(c) for c in row) for row in cand[ok]]


def are_adjacent(a, b, kind: Connectivity = Connectivity.TWENTY_SIX) -> bool:
    d = np.abs(np.asarray(a) - np.asarray(b))
    if kind == Connectivity.SIX:
        return int(d.sum()) == 1
    return int(d.max()) == 1


def connected_components(img: SegmentedImage, phase: int, kind: Connectivity) -> tuple[np.ndarray, int]:
    mask = img.phase == phase
    structure = ndimage.generate_binary_structure(3, 1 if Connectivity(kind) == Connectivity.SIX else 3)
    labels, n = ndimage.label(mask, structure=structure)
    return labels, int(n)


def is_boundary_grain(img: SegmentedImage, v) -> bool:
    if not img.in_bounds(v):
        return False
    return bool(img.boundary_grain[tuple(int(c) for c in v)])


# -- raw image files ---------------------------------------------------------

def header_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".json")


def save_image(img: SegmentedImage, path) -> None:
    """Write the raw body (x fastest, 0=void 1=grain) and a JSON sidecar header."""
    path = Path(path)
    header = {
        "dims": list(img.dims),
        "voxel_size": img.voxel_size,
        "encoding": {"void": VOID, "grain": GRAIN},
        "order": "x-fastest",
        "dtype": "uint8",
    }
    path.write_bytes(img.phase.tobytes(order="F"))
    header_path(path).write_text(json.dumps(header, indent=2))


def load_image(path) -> SegmentedImage:
    path = Path(path)
    hpath = header_path(path)
    try:
        header = json.loads(hpath.read_text())
    except FileNotFoundError:
        raise InputError(f"{hpath}: missing image header") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{hpath}:{exc.lineno}: invalid JSON header ({exc.msg})") from None
    try:
        dims = tuple(int(d) for d in header["dims"])
        voxel_size = float(header.get("voxel_size", 1.0))
    except (KeyError, TypeError, ValueError):
        raise InputError(f"{hpath}: header needs integer 'dims' and numeric 'voxel_size'") from None
    enc = header.get("encoding", {"void": VOID, "grain": GRAIN})
    body = np.frombuffer(path.read_bytes(), dtype=np.uint8)
    if len(dims) != 3 or body.size != int(np.prod(dims)):
        raise InputError(f"{path}: body has {body.size} bytes, header dims {dims} need {int(np.prod(dims))}")
    raw = body.reshape(dims, order="F")
    void_code, grain_code = int(enc["void"]), int(enc["grain"])
    if not np.isin(raw, (void_code, grain_code)).all():
        raise InputError(f"{path}: body contains values other than {void_code}/{grain_code}")
    return SegmentedImage(np.where(raw == void_code, VOID, GRAIN).astype(np.uint8), voxel_size)
