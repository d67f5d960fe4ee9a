"""Uniform 2^d cluster tree over a point cloud.

The domain is the smallest axis-aligned hyper-cube containing the points
(unless a bounding box is supplied).  Every level l holds exactly 2^(d*l)
clusters; clusters that receive no points are kept with empty index sets so
that non-uniform distributions (e.g. Chebyshev grids) still live on the
uniform tree.  Clusters within a level are numbered in Z-order, so the
children of the cluster with within-level index m are m*2^d + c,
c = 0..2^d-1, where bit k of c selects the upper half along axis k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ParticleSet:
    points: np.ndarray  # (N, d)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("points must be an (N, d) array")
        object.__setattr__(self, "points", pts)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass
class Cluster:
    id: int
    level: int
    coord: tuple  # integer cell coordinates within the level, in [0, 2^level)^d
    index_set: np.ndarray  # global particle indices, ascending
    parent: int | None = None
    children: list = field(default_factory=list)
    box_low: np.ndarray | None = None
    box_high: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.index_set)

    @property
    def is_empty(self) -> bool:
        return len(self.index_set) == 0


class ClusterTree:
    """Complete uniform 2^d tree of depth kappa."""

    def __init__(self, particles: ParticleSet, n_max: int, clusters, kappa: int,
                 root_low: np.ndarray, root_side: float):
        self.particles = particles
        self.n_max = n_max
        self.kappa = kappa
        self.clusters = clusters  # flat list, id-indexed
        self.root_low = root_low
        self.root_side = root_side
        d = particles.dim
        self.dim = d
        # offsets of the first cluster id at each level
        self.level_offset = [0]
        for l in range(kappa + 1):
            self.level_offset.append(self.level_offset[-1] + (1 << (d * l)))

    def level_clusters(self, level: int):
        lo, hi = self.level_offset[level], self.level_offset[level + 1]
        return self.clusters[lo:hi]

    @property
    def leaves(self):
        return self.level_clusters(self.kappa)

    def cluster_at(self, level: int, coord) -> Cluster:
        m = _morton_encode(np.asarray(coord, dtype=np.int64)[None, :], level)[0]
        return self.clusters[self.level_offset[level] + int(m)]

    def index_set(self, cid: int) -> np.ndarray:
        return self.clusters[cid].index_set


def _morton_encode(coords: np.ndarray, level: int) -> np.ndarray:
    """Interleave the bits of integer coordinates (n, d) -> within-level index."""
    n, d = coords.shape
    out = np.zeros(n, dtype=np.int64)
    for bit in range(level):
        for ax in range(d):
            out |= ((coords[:, ax] >> bit) & 1) << (bit * d + ax)
    return out


def _morton_decode(m: int, level: int, d: int) -> tuple:
    coord = [0] * d
    for bit in range(level):
        for ax in range(d):
            coord[ax] |= ((m >> (bit * d + ax)) & 1) << bit
    return tuple(coord)


def build_tree(particles: ParticleSet, n_max: int, bounding_box=None) -> ClusterTree:
    """Build the uniform 2^d tree.

    kappa = ceil(log_{2^d}(N / n_max)); if N <= n_max a single subdivision is
    forced (kappa = 1) so that at least one level of admissible blocks exists.
    Points are binned with half-open boxes [low, high); the topmost face of
    the root box is closed.
    """
    N, d = particles.N, particles.dim
    if N == 0:
        raise ValueError("no particles")
    if d not in (1, 2, 3):
        raise ValueError("unsupported dimension")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")

    pts = particles.points
    if bounding_box is None:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        side = float((hi - lo).max())
        if side == 0.0:
            side = 1.0
        center = 0.5 * (lo + hi)
        root_low = center - 0.5 * side
    else:
        root_low = np.asarray(bounding_box[0], dtype=float)
        root_high = np.asarray(bounding_box[1], dtype=float)
        side = float((root_high - root_low).max())

    if N > n_max:
        kappa = max(1, math.ceil(math.log(N / n_max) / math.log(2 ** d)))
    else:
        kappa = 1

    # leaf cell of every point; points on the closed top face clip into the
    # last cell, and floor() puts internal-face points on the higher side
    ncell = 1 << kappa
    cell = np.floor((pts - root_low) / side * ncell).astype(np.int64)
    np.clip(cell, 0, ncell - 1, out=cell)
    leaf_m = _morton_encode(cell, kappa)

    order = np.lexsort((np.arange(N), leaf_m))
    sorted_m = leaf_m[order]
    # index sets of the (possibly empty) leaves
    starts = np.searchsorted(sorted_m, np.arange((1 << (d * kappa)) + 1))

    clusters: list[Cluster] = []
    offset = [0]
    for l in range(kappa + 1):
        offset.append(offset[-1] + (1 << (d * l)))
    total = offset[-1]

    level_sets: list[list[np.ndarray]] = [None] * (kappa + 1)
    level_sets[kappa] = [order[starts[m]:starts[m + 1]]
                         for m in range(1 << (d * kappa))]
    for l in range(kappa - 1, -1, -1):
        fine = level_sets[l + 1]
        level_sets[l] = [np.concatenate(fine[m * (1 << d):(m + 1) * (1 << d)])
                         for m in range(1 << (d * l))]

    for l in range(kappa + 1):
        h = side / (1 << l)
        for m in range(1 << (d * l)):
            coord = _morton_decode(m, l, d)
            cid = offset[l] + m
            parent = offset[l - 1] + (m >> d) if l > 0 else None
            children = ([offset[l + 1] + (m << d) + c for c in range(1 << d)]
                        if l < kappa else [])
            low = root_low + h * np.asarray(coord, dtype=float)
            clusters.append(Cluster(id=cid, level=l, coord=coord,
                                    index_set=level_sets[l][m],
                                    parent=parent, children=children,
                                    box_low=low, box_high=low + h))
    assert len(clusters) == total
    return ClusterTree(particles, n_max, clusters, kappa, root_low, side)
