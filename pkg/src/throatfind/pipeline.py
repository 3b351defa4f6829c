"""Whole-image analysis: throats for every path, pore partition, distributions."""

from __future__ import annotations

import csv
import json
import logging
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .throats import ThroatRecord, select_throat
from .voxgrid import SegmentedImage

log = logging.getLogger(__name__)


def _env_workers() -> int:
    raw = os.environ.get("THROATFIND_WORKERS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class AnalysisConfig:
    polar_max: int = 45
    polar_step: int = 1
    azimuth_steps: int = 45
    azimuth_step: float | None = None  # degrees; overrides azimuth_steps
    theta_count: int = 360
    roi_pads: tuple[int, ...] = (4, 5, 6, 7, 8)
    algorithm_mask: frozenset[int] = frozenset({1, 2, 3, 4, 5})
    worker_count: int = field(default_factory=_env_workers)
    k_stride: int = 1
    cascade: str = "first"  # or "all"
    measure_cap: int = 64
    cascade_cap: int = 64
    all_top: int = 4

    def __post_init__(self):
        if self.cascade not in ("first", "all"):
            raise ValueError("cascade must be 'first' or 'all'")
        if not set(self.algorithm_mask) <= {1, 2, 3, 4, 5} or not self.algorithm_mask:
            raise ValueError("algorithm_mask must be a non-empty subset of 1..5")
        object.__setattr__(self, "algorithm_mask", frozenset(self.algorithm_mask))
        object.__setattr__(self, "roi_pads", tuple(self.roi_pads))


# -- analysis ---------------------------------------------------------------------

_WORKER_IMAGE = None


def _init_worker(img):
    global _WORKER_IMAGE
    _WORKER_IMAGE = img


def _run_path(args):
    path, config = args
    return path.id, select_throat(_WORKER_IMAGE, path, config)


@dataclass
class AnalysisResult:
    throats: list[ThroatRecord]
    unresolved: list[int]

    @property
    def detection_ratio(self) -> float:
        total = len(self.throats) + len(self.unresolved)
        return len(self.throats) / total if total else 1.0


def analyze(img: SegmentedImage, paths, config: AnalysisConfig | None = None) -> AnalysisResult:
    """Throat per medial-axis path; results ordered by path id whatever the worker count."""
    cfg = config if config is not None else AnalysisConfig()
    paths = sorted(paths, key=lambda p: p.id)
    for p in paths:
        p.check_void(img)
    found: dict[int, ThroatRecord | None] = {}
    if cfg.worker_count <= 1 or len(paths) <= 1:
        for p in paths:
            found[p.id] = select_throat(img, p, cfg)
    else:
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
        with ProcessPoolExecutor(max_workers=cfg.worker_count, mp_context=ctx, initializer=_init_worker, initargs=(img,)) as pool:
            for pid, rec in pool.map(_run_path, [(p, cfg) for p in paths]):
                found[pid] = rec
    throats = [found[p.id] for p in paths if found[p.id] is not None]
    unresolved = [p.id for p in paths if found[p.id] is None]
    log.info("resolved %d of %d paths", len(throats), len(paths))
    return AnalysisResult(throats, unresolved)


# -- pores -------------------------------------------------------------------------

@dataclass
class PoreNetwork:
    labels: np.ndarray  # 0 = grain or barrier
    volumes: dict[int, int]
    throats: list[ThroatRecord]
    incidence: list[tuple[int, ...]]  # pore labels per throat, () when degenerate
    barrier_count: int
    void_count: int
    voxel_size: float = 1.0

    @property
    def coordination(self) -> dict[int, int]:
        out = {p: 0 for p in self.volumes}
        for inc in self.incidence:
            for p in inc:
                out[p] += 1
        return out

    @property
    def degenerate(self) -> list[int]:
        return [t.path_id for t, inc in zip(self.throats, self.incidence) if not inc]


def partition_pores(img: SegmentedImage, throats) -> PoreNetwork:
    """Pores are the 26-connected void components left after removing every barrier."""
    barrier = np.zeros(img.dims, bool)
    for t in throats:
        if t.perimeter.barrier is None:
            raise ValueError(f"throat on path {t.path_id} has no barrier")
        vox = np.array(sorted(t.perimeter.barrier.voxels), dtype=np.int64).reshape(-1, 3)
        barrier[tuple(vox.T)] = True
    barrier &= img.void
    open_void = img.void & ~barrier
    labels, n = ndimage.label(open_void, structure=np.ones((3, 3, 3), bool))
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    volumes = {i: int(counts[i]) for i in range(1, n + 1)}
    incidence = []
    for t in throats:
        vox = np.array(sorted(t.perimeter.barrier.voxels), dtype=np.int64).reshape(-1, 3)
        m = np.zeros(img.dims, bool)
        m[tuple(vox.T)] = True
        ring = ndimage.binary_dilation(m, structure=np.ones((3, 3, 3), bool))
        touched = tuple(int(x) for x in np.unique(labels[ring & open_void]))
        incidence.append(touched if 1 <= len(touched) <= 2 else ())
    return PoreNetwork(labels, volumes, list(throats), incidence, int(barrier.sum()), int(img.void.sum()), img.voxel_size)


# -- distributions -------------------------------------------------------------------

@dataclass
class Table:
    name: str
    centers: np.ndarray
    density: np.ndarray
    widths: np.ndarray

    def rows(self):
        return list(zip(self.centers.tolist(), self.density.tolist()))


def _pdf(name: str, values, bins="fd") -> Table:
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return Table(name, np.zeros(0), np.zeros(0), np.zeros(0))
    if np.ptp(v) == 0:
        edges = np.array([v[0] - 0.5, v[0] + 0.5])
    else:
        edges = np.histogram_bin_edges(v, bins=bins)
        if len(edges) < 2:
            edges = np.array([v.min(), v.max()])
    dens, edges = np.histogram(v, bins=edges, density=True)
    return Table(name, 0.5 * (edges[:-1] + edges[1:]), dens, np.diff(edges))


def _integer_pdf(name: str, values) -> Table:
    v = np.asarray(values, dtype=int)
    if len(v) == 0:
        return Table(name, np.zeros(0), np.zeros(0), np.zeros(0))
    edges = np.arange(v.min(), v.max() + 2) - 0.5
    dens, _ = np.histogram(v, bins=edges, density=True)
    return Table(name, 0.5 * (edges[:-1] + edges[1:]), dens, np.diff(edges))


def emit_distributions(network: PoreNetwork, bins="fd") -> dict[str, Table]:
    """Throat-area and pore-volume pdfs plus the coordination histogram (all normalised)."""
    areas = [t.area for t in network.throats]
    volumes = [v * network.voxel_size**3 for v in network.volumes.values()] if network.throats else []
    coord = list(network.coordination.values()) if network.throats else []
    return {
        "areas": _pdf("throat_area", areas, bins),
        "volumes": _pdf("pore_volume", volumes, bins),
        "coordination": _integer_pdf("coordination", coord),
    }


def write_table(table: Table, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_center", "density"])
        for c, d in table.rows():
            w.writerow([repr(float(c)), repr(float(d))])


# -- serialisation ------------------------------------------------------------------

def throat_to_dict(t: ThroatRecord) -> dict:
    return {
        "path_id": int(t.path_id),
        "k": int(t.k),
        "normal": [float(x) for x in t.normal],
        "area": float(t.area),
        "length": float(t.length),
        "type": t.throat_type,
        "algorithm": int(t.perimeter.algorithm),
        "area_method": t.perimeter.method,
        "perimeter26": [list(map(int, v)) for v in t.perimeter.loop26],
        "deductions": [float(x) for x in t.inner_deductions],
    }


def result_to_json(result: AnalysisResult, network: PoreNetwork | None = None) -> str:
    doc = {
        "throats": [throat_to_dict(t) for t in result.throats],
        "unresolved": [int(i) for i in result.unresolved],
        "detection_ratio": result.detection_ratio,
    }
    if network is not None:
        doc["pores"] = {str(k): v for k, v in network.volumes.items()}
        doc["incidence"] = {str(t.path_id): list(inc) for t, inc in zip(network.throats, network.incidence)}
        doc["degenerate"] = network.degenerate
    return json.dumps(doc, indent=1, sort_keys=True)
