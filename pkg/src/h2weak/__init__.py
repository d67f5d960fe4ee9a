"""Kernel-independent hierarchical matrices on weak admissibility.

Algebraic fast matrix-vector products through nested cross approximation
(bottom-to-top and top-to-bottom pivot selection), adaptive cross
approximation, and a restart-free GMRES on top of any representation.
"""

from .blr import BlockLowRankRep, build_blr, mvp_blr
from .engine import (HierRep, VARIANTS, build_operators, build_variant,
                     compute_potential, select_pivots_b2t, select_pivots_t2b)
from .kernels import Kernel, make_kernel
from .lowrank import (LowRankFactor, PivotQuad, SingularCrossMatrix,
                      aca_factor, aca_pivots, solve_square)
from .partition import (PartitionLists, Strong, WeakVertex, build_partition,
                        classify_pair)
from .points import chebyshev_grid, make_points, uniform_grid, uniform_points
from .solver import GmresConfig, SolveReport, gmres
from .tree import Cluster, ClusterTree, ParticleSet, build_tree

__all__ = [n for n in dir() if not n.startswith("_")]
__version__ = "0.1.0"
