"""Interaction and near-field lists under strong and weak admissibility.

All list construction works on the integer cell coordinates of the clusters
at each level, never on floating-point boxes, so the classification is exact.

Strong (eta = sqrt(d)): neighbours are the full 3^d stencil; the interaction
list of C holds the far-field children of parent(C)'s neighbours.

Weak (vertex-sharing admissible): the near field keeps only neighbours that
share a surface of dimension >= 1 (edge/face), so |near| <= 3^d - 2^d; the
interaction list is clan(C) restricted to vertex-sharing and far-field
members, |il| <= 6^d - 4^d - 3^d + 2^d.  clan(C) = siblings of C together
with the children of parent(C)'s surface-sharing neighbours.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .tree import ClusterTree, Cluster, _morton_encode

FAR = "far"
SELF = "self"


@dataclass(frozen=True)
class Strong:
    eta: float = None  # defaults to sqrt(d) at build time


@dataclass(frozen=True)
class WeakVertex:
    pass


@dataclass
class PartitionLists:
    kind: object
    il_far: list  # per cluster id: list of cluster ids
    il_ver: list
    near: list  # includes self

    def il(self, cid: int) -> list:
        return self.il_far[cid] + self.il_ver[cid]


def classify_pair(X: Cluster, Y: Cluster):
    """Geometric relation of two equal boxes at the same level.

    Returns "self", "far", or the dimension d' of the shared hyper-surface
    (d'=0 vertex, d'=1 edge, d'=2 face).
    """
    if X.level != Y.level:
        raise ValueError("level mismatch")
    diff = [abs(a - b) for a, b in zip(X.coord, Y.coord)]
    if max(diff, default=0) == 0:
        return SELF
    if max(diff) <= 1:
        return diff.count(0)  # shared-surface dimension
    return FAR


def _relation(cx, cy):
    diff = [abs(a - b) for a, b in zip(cx, cy)]
    m = max(diff)
    if m == 0:
        return SELF
    if m <= 1:
        return diff.count(0)
    return FAR


def build_partition(tree: ClusterTree, kind) -> PartitionLists:
    d = tree.dim
    if isinstance(kind, Strong) and kind.eta is None:
        kind = Strong(eta=math.sqrt(d))
    weak = isinstance(kind, WeakVertex)
    if not weak and not isinstance(kind, Strong):
        raise TypeError(f"unknown admissibility kind: {kind!r}")

    n = len(tree.clusters)
    il_far = [[] for _ in range(n)]
    il_ver = [[] for _ in range(n)]
    near = [[] for _ in range(n)]
    offsets = list(itertools.product((-1, 0, 1), repeat=d))

    near[0] = [0]  # root: no admissible blocks, near is itself
    for l in range(1, tree.kappa + 1):
        side = 1 << l
        base = tree.level_offset[l]

        def cid_at(coord):
            m = _morton_encode(np.asarray([coord], dtype=np.int64), l)[0]
            return base + int(m)

        for X in tree.level_clusters(l):
            cx = X.coord
            # same-level stencil -> near field
            for off in offsets:
                cy = tuple(a + o for a, o in zip(cx, off))
                if any(c < 0 or c >= side for c in cy):
                    continue
                rel = _relation(cx, cy)
                if rel == SELF:
                    near[X.id].append(X.id)
                elif weak:
                    if rel != 0:  # vertex-only neighbours are admissible
                        near[X.id].append(cid_at(cy))
                else:
                    near[X.id].append(cid_at(cy))
            # candidates: children of the parent's near field (strong: the
            # full 3^d stencil; weak: surface-sharing parents only, which
            # makes the candidate pool exactly clan(X))
            px = tuple(c >> 1 for c in cx)
            pside = side >> 1
            for off in offsets:
                py = tuple(a + o for a, o in zip(px, off))
                if any(c < 0 or c >= pside for c in py):
                    continue
                if weak and _relation(px, py) == 0:
                    continue  # vertex-only parents were admissible already
                for child in itertools.product((0, 1), repeat=d):
                    cy = tuple(2 * a + b for a, b in zip(py, child))
                    rel = _relation(cx, cy)
                    if rel == FAR:
                        il_far[X.id].append(cid_at(cy))
                    elif weak and rel == 0:
                        il_ver[X.id].append(cid_at(cy))
        for X in tree.level_clusters(l):
            il_far[X.id].sort()
            il_ver[X.id].sort()
            near[X.id].sort()
    return PartitionLists(kind=kind, il_far=il_far, il_ver=il_ver, near=near)
