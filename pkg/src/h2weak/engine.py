"""Nested-bases engine: B2T/T2B pivot selection, operator construction and
the upward/transverse/downward potential calculation.

A "channel" is one nested operator set over one interaction-list selector.
The fully-nested weak variant runs two independent channels (far-field via
bottom-to-top pivots, vertex-sharing via top-to-bottom pivots); the
semi-nested variant replaces the vertex channel with per-block ACA; the
standard variants run a single channel over the strong lists; the non-nested
variants delegate entirely to the block low-rank engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blr import BlockLowRankRep, build_blr, mvp_blr
from .kernels import Kernel
from .lowrank import (PivotQuad, SingularCrossMatrix, aca_pivots, rsolve,
                      solve_square)
from .partition import PartitionLists, Strong, WeakVertex, build_partition
from .tree import ClusterTree

_EMPTY = np.empty(0, dtype=np.intp)
_EMPTY_QUAD = PivotQuad(_EMPTY, _EMPTY, _EMPTY, _EMPTY)

VARIANTS = ("h2star-bt", "h2plusH-star", "h2std-b", "h2std-t", "h2star-t",
            "hstar", "hstd")


def _cat(arrays):
    arrays = [a for a in arrays if len(a)]
    if not arrays:
        return _EMPTY
    return np.unique(np.concatenate(arrays))


def _pivot_pair(rows, cols, kernel, eps, points, cluster_id):
    """ACA pivot selection with a nonsingular-cross check (retry at eps/10)."""
    for trial_eps in (eps, eps / 10.0):
        tau, sigma = aca_pivots(rows, cols, kernel, trial_eps, points=points)
        if len(tau) == 0:
            return tau, sigma
        A = kernel.block(tau, sigma)
        try:
            solve_square(A, np.eye(len(tau), dtype=kernel.dtype), cluster_id)
            return tau, sigma
        except SingularCrossMatrix:
            continue
    raise SingularCrossMatrix("singular cross matrix after retry", cluster_id)


def select_pivots_b2t(tree: ClusterTree, lists_fn, kernel: Kernel, eps: float,
                      symmetric: bool = False):
    """Bottom-to-top pivot selection: leaf candidates are the cluster's own
    points against the union of its interaction list; non-leaf candidates are
    the unions of the children's pivots."""
    pts = tree.particles.points
    quads = [None] * len(tree.clusters)
    for l in range(tree.kappa, 0, -1):
        leaf = l == tree.kappa
        for X in tree.level_clusters(l):
            L = lists_fn(X.id)
            if not L:
                quads[X.id] = _EMPTY_QUAD
                continue
            members = [tree.clusters[y].index_set for y in L]
            if leaf:
                t_i_cand, s_o_cand = X.index_set, X.index_set
                s_i_cand = _cat(members)
                t_o_cand = s_i_cand
            else:
                t_i_cand = _cat([quads[c].t_i for c in X.children])
                s_o_cand = _cat([quads[c].s_o for c in X.children])
                s_i_cand = _cat([quads[yc].s_o for y in L
                                 for yc in tree.clusters[y].children])
                t_o_cand = _cat([quads[yc].t_i for y in L
                                 for yc in tree.clusters[y].children])
            t_i, s_i = _pivot_pair(t_i_cand, s_i_cand, kernel, eps, pts, X.id)
            if symmetric and kernel.symmetric:
                t_o, s_o = s_i, t_i
            else:
                t_o, s_o = _pivot_pair(t_o_cand, s_o_cand, kernel, eps, pts, X.id)
            quads[X.id] = PivotQuad(t_i, s_i, t_o, s_o)
    return quads


def select_pivots_t2b(tree: ClusterTree, lists_fn, kernel: Kernel, eps: float,
                      symmetric: bool = False):
    """Top-to-bottom pivot selection: candidates are the cluster's own points
    against its interaction list, augmented with the parent's pivots."""
    pts = tree.particles.points
    quads = [None] * len(tree.clusters)
    for l in range(1, tree.kappa + 1):
        for X in tree.level_clusters(l):
            L = lists_fn(X.id)
            pq = quads[X.parent] if X.parent is not None else None
            if pq is None or pq.empty:
                pq = None
            if not L and pq is None:
                quads[X.id] = _EMPTY_QUAD
                continue
            members = [tree.clusters[y].index_set for y in L]
            s_i_cand = _cat(members + ([pq.s_i] if pq is not None else []))
            t_o_cand = _cat(members + ([pq.t_o] if pq is not None else []))
            t_i, s_i = _pivot_pair(X.index_set, s_i_cand, kernel, eps, pts, X.id)
            if symmetric and kernel.symmetric:
                t_o, s_o = s_i, t_i
            else:
                t_o, s_o = _pivot_pair(t_o_cand, X.index_set, kernel, eps, pts,
                                       X.id)
            quads[X.id] = PivotQuad(t_i, s_i, t_o, s_o)
    return quads


@dataclass
class NestedOperatorSet:
    """Per-channel operators, all stored as the matrices actually applied:
    p2m[X] (rank_out x |t^X|), m2m[(X, c)] (rank_out_X x rank_out_c),
    m2l[(X, Y)] (rank_in_X x rank_out_Y), l2l[(c, X)] (rank_in_c x rank_in_X),
    l2p[X] (|t^X| x rank_in_X)."""
    quads: list
    lists_fn: object
    p2m: dict = field(default_factory=dict)
    m2m: dict = field(default_factory=dict)
    m2l: dict = field(default_factory=dict)
    l2l: dict = field(default_factory=dict)
    l2p: dict = field(default_factory=dict)
    mem_scalars: int = 0


def build_operators(tree: ClusterTree, quads, lists_fn, kernel: Kernel,
                    symmetric: bool = False) -> NestedOperatorSet:
    ops = NestedOperatorSet(quads=quads, lists_fn=lists_fn)
    sym = symmetric and kernel.symmetric
    for l in range(1, tree.kappa + 1):
        leaf = l == tree.kappa
        for X in tree.level_clusters(l):
            quad = quads[X.id]
            if quad is None or quad.empty:
                continue
            if quad.rank_in:
                A_i = kernel.block(quad.t_i, quad.s_i)
                if leaf:
                    if X.size:
                        ops.l2p[X.id] = rsolve(
                            kernel.block(X.index_set, quad.s_i), A_i, X.id)
                else:
                    for c in X.children:
                        cq = quads[c]
                        if cq is not None and cq.rank_in:
                            ops.l2l[(c, X.id)] = rsolve(
                                kernel.block(cq.t_i, quad.s_i), A_i, X.id)
            if quad.rank_out:
                if sym:
                    if leaf:
                        if X.id in ops.l2p:
                            ops.p2m[X.id] = ops.l2p[X.id].T
                    else:
                        for c in X.children:
                            if (c, X.id) in ops.l2l:
                                ops.m2m[(X.id, c)] = ops.l2l[(c, X.id)].T
                else:
                    A_o = kernel.block(quad.t_o, quad.s_o)
                    if leaf:
                        if X.size:
                            ops.p2m[X.id] = solve_square(
                                A_o, kernel.block(quad.t_o, X.index_set), X.id)
                    else:
                        for c in X.children:
                            cq = quads[c]
                            if cq is not None and cq.rank_out:
                                ops.m2m[(X.id, c)] = solve_square(
                                    A_o, kernel.block(quad.t_o, cq.s_o), X.id)
            for y in lists_fn(X.id):
                yq = quads[y]
                if quad.rank_in and yq is not None and yq.rank_out:
                    ops.m2l[(X.id, y)] = kernel.block(quad.t_i, yq.s_o)
    shared = 0
    if sym:  # transposed views share storage with their l2p/l2l sources
        shared = sum(m.size for m in ops.p2m.values())
        shared += sum(m.size for m in ops.m2m.values())
    ops.mem_scalars = sum(m.size for dd in (ops.p2m, ops.m2m, ops.m2l,
                                            ops.l2l, ops.l2p)
                          for m in dd.values()) - shared
    return ops


def _channel_mvp(tree: ClusterTree, ops: NestedOperatorSet, q, phi):
    """One upward/transverse/downward sweep; adds the far potential to phi."""
    quads = ops.quads
    v = {}
    for X in tree.leaves:
        p2m = ops.p2m.get(X.id)
        if p2m is not None:
            v[X.id] = p2m @ q[X.index_set]
    for l in range(tree.kappa - 1, 0, -1):
        for X in tree.level_clusters(l):
            quad = quads[X.id]
            if quad is None or not quad.rank_out:
                continue
            acc = np.zeros(quad.rank_out, dtype=phi.dtype)
            for c in X.children:
                m2m = ops.m2m.get((X.id, c))
                if m2m is not None and c in v:
                    acc += m2m @ v[c]
            v[X.id] = acc
    u = {}
    for l in range(1, tree.kappa + 1):
        for X in tree.level_clusters(l):
            quad = quads[X.id]
            if quad is None or not quad.rank_in:
                continue
            acc = np.zeros(quad.rank_in, dtype=phi.dtype)
            for y in ops.lists_fn(X.id):
                m2l = ops.m2l.get((X.id, y))
                if m2l is not None and y in v:
                    acc += m2l @ v[y]
            u[X.id] = acc
    for l in range(1, tree.kappa):
        for X in tree.level_clusters(l):
            if X.id not in u:
                continue
            for c in X.children:
                l2l = ops.l2l.get((c, X.id))
                if l2l is not None:
                    u[c] = u.get(c, 0) + l2l @ u[X.id]
    for X in tree.leaves:
        l2p = ops.l2p.get(X.id)
        if l2p is not None and X.id in u:
            phi[X.index_set] += l2p @ u[X.id]


@dataclass
class HierRep:
    """Tagged union over the algorithm variants, exposing one MVP contract."""
    variant: str
    tree: ClusterTree
    kernel: Kernel
    eps_far: float
    eps_ver: float
    partition: PartitionLists  # owner of the near-field lists
    channels: list = field(default_factory=list)  # NestedOperatorSet
    blr_leg: BlockLowRankRep | None = None
    near_pairs: list = field(default_factory=list)
    near_blocks: dict = field(default_factory=dict)
    mem_scalars: int = 0

    def matvec(self, q: np.ndarray) -> np.ndarray:
        tree = self.tree
        q = np.asarray(q)
        if len(q) != tree.particles.N:
            raise ValueError("vector length mismatch")
        phi = np.zeros(len(q), dtype=np.result_type(q.dtype, self.kernel.dtype))
        for ops in self.channels:
            _channel_mvp(tree, ops, q, phi)
        if self.blr_leg is not None:
            phi += mvp_blr(self.blr_leg, q)
        for xid, yid in self.near_pairs:
            t = tree.clusters[xid].index_set
            s = tree.clusters[yid].index_set
            if t.size == 0 or s.size == 0:
                continue
            blk = self.near_blocks.get((xid, yid))
            if blk is None:
                blk = self.kernel.block(t, s)
            phi[t] += blk @ q[s]
        return phi

    def leaf_ranks(self) -> np.ndarray:
        """Incoming ranks (nested) / block ranks (non-nested) at leaf level."""
        tree = self.tree
        ranks = []
        for X in tree.leaves:
            if X.is_empty:
                continue
            for ops in self.channels:
                quad = ops.quads[X.id]
                if quad is not None:
                    ranks.append(quad.rank_in)
            if self.blr_leg is not None:
                for (xid, _), f in self.blr_leg.factors.items():
                    if xid == X.id:
                        ranks.append(f.rank)
        return np.asarray(ranks, dtype=int)

    def level_rank_profile(self) -> dict:
        """level -> (max, min, avg) of per-cluster incoming ranks."""
        out = {}
        for l in range(1, self.tree.kappa + 1):
            ranks = []
            for X in self.tree.level_clusters(l):
                if X.is_empty:
                    continue
                for ops in self.channels:
                    quad = ops.quads[X.id]
                    if quad is not None:
                        ranks.append(quad.rank_in)
                if self.blr_leg is not None:
                    ranks.extend(f.rank for (xid, _), f
                                 in self.blr_leg.factors.items() if xid == X.id)
            if ranks:
                r = np.asarray(ranks)
                out[l] = (int(r.max()), int(r.min()), float(r.mean()))
        return out


def _attach_near(rep: HierRep, store_near: bool):
    tree, partition = rep.tree, rep.partition
    for X in tree.leaves:
        for yid in partition.near[X.id]:
            Y = tree.clusters[yid]
            rep.near_pairs.append((X.id, yid))
            rep.mem_scalars += X.size * Y.size
            if store_near and X.size and Y.size:
                rep.near_blocks[(X.id, yid)] = rep.kernel.block(
                    X.index_set, Y.index_set)


def compute_potential(rep: HierRep, q: np.ndarray) -> np.ndarray:
    return rep.matvec(q)


def build_variant(variant: str, tree: ClusterTree, kernel: Kernel,
                  eps: float = 1e-8, eps_far: float = None,
                  eps_ver: float = None, symmetric: bool = False,
                  store_near: bool = True) -> HierRep:
    """Build one of the algorithm variants (plus the internal "h2star-b"
    negative control: bottom-to-top pivots over the full weak list)."""
    eps_far = eps if eps_far is None else eps_far
    eps_ver = eps if eps_ver is None else eps_ver
    if variant not in VARIANTS + ("h2star-b",):
        raise ValueError(f"unknown variant '{variant}'")

    weak = variant not in ("h2std-b", "h2std-t", "hstd")
    partition = build_partition(tree, WeakVertex() if weak else Strong())
    rep = HierRep(variant=variant, tree=tree, kernel=kernel,
                  eps_far=eps_far, eps_ver=eps_ver, partition=partition)

    far_fn = lambda cid: partition.il_far[cid]
    ver_fn = lambda cid: partition.il_ver[cid]
    all_fn = lambda cid: partition.il_far[cid] + partition.il_ver[cid]

    def channel(select, fn, e):
        quads = select(tree, fn, kernel, e, symmetric=symmetric)
        ops = build_operators(tree, quads, fn, kernel, symmetric=symmetric)
        rep.channels.append(ops)
        rep.mem_scalars += ops.mem_scalars

    if variant == "h2star-bt":
        channel(select_pivots_b2t, far_fn, eps_far)
        channel(select_pivots_t2b, ver_fn, eps_ver)
    elif variant == "h2plusH-star":
        channel(select_pivots_b2t, far_fn, eps_far)
        rep.blr_leg = build_blr(tree, partition, kernel, eps_ver, lists="ver",
                                include_near=False)
        rep.mem_scalars += rep.blr_leg.mem_scalars
    elif variant == "h2std-b":
        channel(select_pivots_b2t, far_fn, eps_far)
    elif variant == "h2std-t":
        channel(select_pivots_t2b, far_fn, eps_far)
    elif variant == "h2star-t":
        channel(select_pivots_t2b, all_fn, eps_far)
    elif variant == "h2star-b":  # negative control, not a public variant
        channel(select_pivots_b2t, all_fn, eps_far)
    elif variant in ("hstar", "hstd"):
        fn = "all" if variant == "hstar" else "far"
        rep.blr_leg = build_blr(tree, partition, kernel, eps_far, lists=fn,
                                include_near=False)
        rep.mem_scalars += rep.blr_leg.mem_scalars
    _attach_near(rep, store_near)
    return rep
