import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import h2weak as h
from h2weak.lowrank import (SingularCrossMatrix, aca, aca_factor, aca_pivots,
                            rsolve, solve_square)


class MatrixKernel:
    """Adapter: expose a dense matrix through the kernel block interface."""

    def __init__(self, A):
        self.A = np.asarray(A)
        self.dtype = self.A.dtype

    def block(self, rows, cols):
        return self.A[np.ix_(np.asarray(rows, int), np.asarray(cols, int))]


def test_rank_one_block():
    f = np.arange(1, 9, dtype=float)
    g = np.linspace(1, 2, 11)
    k = MatrixKernel(np.outer(f, g))
    fac = aca_factor(np.arange(8), np.arange(11), k, 1e-10)
    assert fac.rank == 1
    assert np.allclose(fac.U @ fac.V.T, k.A, atol=1e-13)
    # the single pivot is the max-modulus entry's column for the start row
    assert fac.col_pivots[0] == np.argmax(g)


def test_zero_block():
    k = MatrixKernel(np.zeros((5, 7)))
    fac = aca_factor(np.arange(5), np.arange(7), k, 1e-8)
    assert fac.rank == 0
    assert fac.exhausted


def test_empty_candidates():
    k = MatrixKernel(np.zeros((5, 7)))
    fac = aca_factor([], np.arange(7), k, 1e-8)
    assert fac.rank == 0 and fac.U.shape == (0, 0)
    tau, sigma = aca_pivots([], [], k, 1e-8)
    assert len(tau) == 0 and len(sigma) == 0


def test_separated_boxes_one_over_r():
    # 200x200 block of 1/r between unit boxes one box apart
    rng = np.random.default_rng(0)
    src = rng.uniform(0, 1, (200, 2))
    tgt = rng.uniform(0, 1, (200, 2)) + np.array([2.0, 0.0])
    pts = h.ParticleSet(np.vstack([tgt, src]))
    k = h.make_kernel("lap3d", h.ParticleSet(
        np.hstack([pts.points, np.zeros((400, 1))])))
    rows, cols = np.arange(200), np.arange(200, 400)
    fac = aca_factor(rows, cols, k, 1e-8, points=k.particles.points)
    K = k.block(rows, cols)
    err = np.linalg.norm(K - fac.U @ fac.V.T, 2) / np.linalg.norm(K, 2)
    assert err <= 1e-6
    assert fac.rank < 40  # far smaller than 200
    # SVD oracle: the ACA rank is within a small factor of the eps-rank
    sv = np.linalg.svd(K, compute_uv=False)
    svd_rank = int(np.sum(sv > 1e-8 * sv[0]))
    assert fac.rank <= 3 * svd_rank + 5


def test_pivots_match_factor():
    rng = np.random.default_rng(3)
    k = MatrixKernel(rng.standard_normal((30, 5)) @ rng.standard_normal((5, 40)))
    rows, cols = np.arange(30), np.arange(40)
    fac = aca_factor(rows, cols, k, 1e-9)
    tau, sigma = aca_pivots(rows, cols, k, 1e-9)
    assert np.array_equal(fac.row_pivots, tau)
    assert np.array_equal(fac.col_pivots, sigma)


def test_cross_interpolation_property():
    rng = np.random.default_rng(4)
    pts = h.uniform_points(120, 2, seed=4)
    k = h.make_kernel("log2d", pts)
    rows, cols = np.arange(60), np.arange(60, 120)
    fac = aca_factor(rows, cols, k, 1e-6)
    approx = fac.U @ fac.V.T
    K = k.block(rows, cols)
    for r in fac.row_pivots:
        i = int(np.where(rows == r)[0][0])
        np.testing.assert_allclose(approx[i], K[i], atol=1e-11 * np.abs(K).max())
    for c in fac.col_pivots:
        j = int(np.where(cols == c)[0][0])
        np.testing.assert_allclose(approx[:, j], K[:, j],
                                   atol=1e-11 * np.abs(K).max())


def test_monotone_stopping():
    pts = h.uniform_points(150, 2, seed=5)
    k = h.make_kernel("log2d", pts)
    rows, cols = np.arange(70), np.arange(80, 150)
    ranks = [aca_factor(rows, cols, k, e).rank for e in (1e-4, 1e-7, 1e-10)]
    assert ranks == sorted(ranks)


def test_reproducibility():
    pts = h.uniform_points(100, 3, seed=6)
    k = h.make_kernel("matern", pts)
    a = aca_factor(np.arange(50), np.arange(50, 100), k, 1e-8)
    b = aca_factor(np.arange(50), np.arange(50, 100), k, 1e-8)
    assert np.array_equal(a.U, b.U) and np.array_equal(a.V, b.V)


def test_complex_aca():
    pts = h.uniform_points(160, 3, seed=7)
    k = h.make_kernel("helmholtz", pts)
    rows, cols = np.arange(80), np.arange(80, 160)
    fac = aca_factor(rows, cols, k, 1e-8, points=pts.points)
    K = k.block(rows, cols)
    assert np.linalg.norm(K - fac.U @ fac.V.conj().T) <= 1e-6 * np.linalg.norm(K)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1000), st.integers(1, 6))
def test_property_low_rank_recovery(seed, p):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((15, p)) @ rng.standard_normal((p, 12))
    fac = aca_factor(np.arange(15), np.arange(12), MatrixKernel(A), 1e-11)
    assert fac.rank <= p
    assert np.linalg.norm(A - fac.U @ fac.V.T) <= 1e-9 * max(
        1.0, np.linalg.norm(A))


def test_solve_square():
    assert np.allclose(solve_square(np.eye(3), np.arange(6.).reshape(3, 2)),
                       np.arange(6.).reshape(3, 2))
    assert solve_square(np.array([[4.0]]), np.array([[2.0]]))[0, 0] == 0.5
    rng = np.random.default_rng(8)
    A = rng.standard_normal((8, 8)) + 8 * np.eye(8)
    B = rng.standard_normal((8, 3))
    X = solve_square(A, B)
    assert np.linalg.norm(A @ X - B) <= 1e-12 * np.linalg.norm(B)
    Xr = rsolve(B.T, A)
    assert np.linalg.norm(Xr @ A - B.T) <= 1e-11 * np.linalg.norm(B)


def test_solve_square_singular():
    A = np.ones((3, 3))
    with pytest.raises(SingularCrossMatrix):
        solve_square(A, np.eye(3), cluster_id=17)
