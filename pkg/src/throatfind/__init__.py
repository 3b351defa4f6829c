"""Throat detection in segmented 3D voxel images."""

from .medial import MedialAxisPath, read_paths, write_paths
from .pipeline import AnalysisConfig, AnalysisResult, PoreNetwork, analyze, emit_distributions, partition_pores
from .throats import CandidatePerimeter, ThroatRecord, select_throat
from .voxgrid import InputError, SegmentedImage, load_image, save_image

__all__ = [
    "AnalysisConfig",
    "AnalysisResult",
    "CandidatePerimeter",
    "InputError",
    "MedialAxisPath",
    "PoreNetwork",
    "SegmentedImage",
    "ThroatRecord",
    "analyze",
    "emit_distributions",
    "load_image",
    "partition_pores",
    "read_paths",
    "save_image",
    "select_throat",
    "write_paths",
]
__version__ = "0.1.0"
