"""Point-cloud generators for the experiments (domain [-1, 1]^d)."""

from __future__ import annotations

import numpy as np

from .tree import ParticleSet


def uniform_points(N: int, d: int, seed: int = 0) -> ParticleSet:
    rng = np.random.default_rng(seed)
    return ParticleSet(rng.uniform(-1.0, 1.0, size=(N, d)))


def _tensor(axis: np.ndarray, d: int) -> np.ndarray:
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _grid_side(N: int, d: int) -> int:
    n = round(N ** (1.0 / d))
    if n ** d != N:
        raise ValueError(f"N={N} is not a {d}-th power, cannot build a grid")
    return n


def chebyshev_grid(N: int, d: int) -> ParticleSet:
    """Tensor grid of Chebyshev nodes, N = n^d (deterministic)."""
    n = _grid_side(N, d)
    axis = np.cos((2 * np.arange(n) + 1) * np.pi / (2 * n))
    return ParticleSet(_tensor(axis, d))


def uniform_grid(N: int, d: int) -> ParticleSet:
    """Cell-centred uniform grid (collocation points), N = n^d."""
    n = _grid_side(N, d)
    axis = -1.0 + (np.arange(n) + 0.5) * (2.0 / n)
    return ParticleSet(_tensor(axis, d))


def make_points(dist: str, N: int, d: int, seed: int = 0) -> ParticleSet:
    if dist == "uniform":
        return uniform_points(N, d, seed)
    if dist == "chebyshev":
        return chebyshev_grid(N, d)
    if dist == "grid":
        return uniform_grid(N, d)
    raise ValueError(f"unknown distribution '{dist}'")
