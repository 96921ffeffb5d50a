"""Solvers for node-weighted prize-collecting Steiner tree and forest on planar graphs."""

from .instance import (
    ForestInstance,
    Graph,
    InstanceError,
    TreeInstance,
    gadgetize_demands,
    generate_planar_instance,
    neighbors,
    normalize_tree,
    planarity_screen,
    read_instance,
    write_instance,
)
from .lmp_tree import PcSolution, audit_lmp, prune, solve_lmp, solve_nwst
from .lp import min_vertex_cut, solve_lp, solve_lpb, solve_lpb_k
from .pcsf import ForestSolution, audit_pcsf, solve_pcsf
from .threshold import CombineConfig, combine, optimize_constants

__all__ = [
    "CombineConfig",
    "ForestInstance",
    "ForestSolution",
    "Graph",
    "InstanceError",
    "PcSolution",
    "TreeInstance",
    "audit_lmp",
    "audit_pcsf",
    "combine",
    "gadgetize_demands",
    "generate_planar_instance",
    "min_vertex_cut",
    "neighbors",
    "normalize_tree",
    "optimize_constants",
    "planarity_screen",
    "prune",
    "read_instance",
    "solve_lmp",
    "solve_lp",
    "solve_lpb",
    "solve_lpb_k",
    "solve_nwst",
    "solve_pcsf",
    "write_instance",
]
