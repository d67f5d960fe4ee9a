"""Non-nested H-matrix engine: per-block ACA over an interaction list plus
dense near-field blocks at the leaves.

Used directly for the non-nested variants (weak or strong lists) and, with
lists="ver" and include_near=False, as the vertex-sharing leg of the
semi-nested variant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import Kernel
from .lowrank import LowRankFactor, aca_factor
from .partition import PartitionLists
from .tree import ClusterTree


@dataclass
class BlockLowRankRep:
    tree: ClusterTree
    partition: PartitionLists
    eps: float
    factors: dict = field(default_factory=dict)  # (xid, yid) -> LowRankFactor
    near_blocks: dict = field(default_factory=dict)  # (xid, yid) -> dense
    near_pairs: list = field(default_factory=list)  # leaf (xid, yid), id order
    mem_scalars: int = 0
    kernel: Kernel = None

    def matvec(self, q: np.ndarray) -> np.ndarray:
        return mvp_blr(self, q)


def _block_lists(partition: PartitionLists, lists: str):
    if lists == "all":
        return lambda cid: partition.il_far[cid] + partition.il_ver[cid]
    if lists == "far":
        return lambda cid: partition.il_far[cid]
    if lists == "ver":
        return lambda cid: partition.il_ver[cid]
    raise ValueError(f"lists must be all/far/ver, got {lists!r}")


def build_blr(tree: ClusterTree, partition: PartitionLists, kernel: Kernel,
              eps: float, lists: str = "all", include_near: bool = True,
              store_near: bool = True) -> BlockLowRankRep:
    """Factor every admissible block at every level with per-block ACA."""
    sel = _block_lists(partition, lists)
    pts = tree.particles.points
    rep = BlockLowRankRep(tree=tree, partition=partition, eps=eps, kernel=kernel)
    for l in range(1, tree.kappa + 1):
        for X in tree.level_clusters(l):
            for yid in sel(X.id):
                Y = tree.clusters[yid]
                f = aca_factor(X.index_set, Y.index_set, kernel, eps, points=pts)
                rep.factors[(X.id, yid)] = f
                rep.mem_scalars += f.n_scalars
    if include_near:
        for X in tree.leaves:
            for yid in partition.near[X.id]:
                Y = tree.clusters[yid]
                rep.near_pairs.append((X.id, yid))
                rep.mem_scalars += X.size * Y.size
                if store_near:
                    rep.near_blocks[(X.id, yid)] = kernel.block(
                        X.index_set, Y.index_set)
    return rep


def mvp_blr(rep: BlockLowRankRep, q: np.ndarray) -> np.ndarray:
    tree = rep.tree
    N = tree.particles.N
    if len(q) != N:
        raise ValueError("vector length mismatch")
    phi = np.zeros(N, dtype=np.result_type(q.dtype, rep.kernel.dtype))
    for (xid, yid), f in rep.factors.items():
        if f.rank == 0:
            continue
        t = tree.clusters[xid].index_set
        s = tree.clusters[yid].index_set
        phi[t] += f.matvec(q[s])
    for xid, yid in rep.near_pairs:
        t = tree.clusters[xid].index_set
        s = tree.clusters[yid].index_set
        if t.size == 0 or s.size == 0:
            continue
        blk = rep.near_blocks.get((xid, yid))
        if blk is None:
            blk = rep.kernel.block(t, s)
        phi[t] += blk @ q[s]
    return phi
