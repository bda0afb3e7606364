"""Amino-acid detection geometry, density simulation and sequence-guided threading."""

from ._accel import backend
from .geometry import AnchorConfig, Box3, TemplateSizes, iou
from .graph import build_knn_graph, prune_graph
from .metrics import EvalReport, evaluate_thread
from .proposals import NoiseConfig, Proposal, oracle_detect
from .threader import SearchConfig, ThreadResult, dfs_thread, mcts_thread
from .volume import DensityVolume, Structure, read_mrc, read_pdb, simulate_density, write_mrc

__version__ = "0.1.0"

__all__ = [
    "AnchorConfig", "Box3", "DensityVolume", "EvalReport", "NoiseConfig", "Proposal",
    "SearchConfig", "Structure", "TemplateSizes", "ThreadResult", "backend",
    "build_knn_graph", "dfs_thread", "evaluate_thread", "iou", "mcts_thread",
    "oracle_detect", "prune_graph", "read_mrc", "read_pdb", "simulate_density", "write_mrc",
]
