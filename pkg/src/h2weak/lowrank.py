"""Partially pivoted ACA and the small dense solves used by the operators.

ACA stopping rule: ||u_p|| * ||v_p|| <= eps * ||A_p||_F, with the Frobenius
norm of the approximant maintained incrementally.  Pivoting is deterministic:
the first pivot row is the point nearest the centroid of the opposing index
set (row 0 when no geometry is given); later pivot rows maximise |residual|
in the last computed column.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class SingularCrossMatrix(Exception):
    def __init__(self, msg, cluster_id=None):
        super().__init__(msg)
        self.cluster_id = cluster_id


@dataclass
class LowRankFactor:
    U: np.ndarray  # (m, p)
    V: np.ndarray  # (n, p); block ~= U @ V.conj().T
    row_pivots: np.ndarray  # global row indices, length p
    col_pivots: np.ndarray
    exhausted: bool = False  # stopped on zero pivots rather than the eps rule

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def matvec(self, q: np.ndarray) -> np.ndarray:
        return self.U @ (self.V.conj().T @ q)

    @property
    def n_scalars(self) -> int:
        return self.U.size + self.V.size


@dataclass
class PivotQuad:
    """Incoming (t_i, s_i) and outgoing (t_o, s_o) pivots of one cluster."""
    t_i: np.ndarray
    s_i: np.ndarray
    t_o: np.ndarray
    s_o: np.ndarray

    @property
    def rank_in(self) -> int:
        return len(self.t_i)

    @property
    def rank_out(self) -> int:
        return len(self.t_o)

    @property
    def empty(self) -> bool:
        return len(self.t_i) == 0 and len(self.t_o) == 0


_EMPTY = np.empty(0, dtype=np.intp)


def _first_row(rows, cols, points):
    if points is None or len(cols) == 0:
        return 0
    centroid = points[cols].mean(axis=0)
    d2 = ((points[rows] - centroid) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def aca(rows, cols, kernel, eps, points=None, max_rank=None):
    """Core partially pivoted ACA on the block K[rows, cols].

    Returns (U, V, tau, sigma, exhausted) with tau/sigma the global pivot
    indices in selection order.
    """
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    m, n = len(rows), len(cols)
    dtype = kernel.dtype
    if max_rank is None:
        max_rank = min(m, n)
    else:
        max_rank = min(max_rank, m, n)
    us, vs, tau, sigma = [], [], [], []
    if m == 0 or n == 0 or max_rank == 0:
        return (np.zeros((m, 0), dtype), np.zeros((n, 0), dtype),
                _EMPTY.copy(), _EMPTY.copy(), False)

    used_rows = np.zeros(m, dtype=bool)
    used_cols = np.zeros(n, dtype=bool)
    fro2 = 0.0  # ||approximant||_F^2
    i = _first_row(rows, cols, points)
    exhausted = False
    while True:
        # residual row i
        row = kernel.block(rows[i:i + 1], cols)[0]
        for u, v in zip(us, vs):
            row = row - u[i] * v
        used_rows[i] = True
        masked = np.where(used_cols, 0.0, np.abs(row))
        j = int(np.argmax(masked))
        piv = row[j]
        if masked[j] <= 1e-14 * max(1.0, np.sqrt(fro2)):
            # numerically zero row: try the next untried row
            untried = np.flatnonzero(~used_rows)
            if untried.size == 0:
                exhausted = True
                break
            i = int(untried[0])
            continue
        col = kernel.block(rows, cols[j:j + 1])[:, 0]
        for u, v in zip(us, vs):
            col = col - v[j] * u
        used_cols[j] = True
        u = col / piv
        v = row
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        # ||A + u v^T||_F^2 = ||A||^2 + 2 Re<A, u v^T> + ||u||^2 ||v||^2
        cross = sum((np.vdot(uk, u) * np.vdot(v, vk)).real
                    for uk, vk in zip(us, vs))
        fro2 += 2.0 * cross + (nu * nv) ** 2
        us.append(u)
        vs.append(v)
        tau.append(rows[i])
        sigma.append(cols[j])
        if nu * nv <= eps * np.sqrt(fro2) or len(us) >= max_rank:
            break
        masked = np.where(used_rows, 0.0, np.abs(u))
        if masked.max() == 0.0:
            untried = np.flatnonzero(~used_rows)
            if untried.size == 0:
                break
            i = int(untried[0])
        else:
            i = int(np.argmax(masked))

    U = np.stack(us, axis=1) if us else np.zeros((m, 0), dtype)
    V = np.stack([np.conj(v) for v in vs], axis=1) if vs else np.zeros((n, 0), dtype)
    return (U, V, np.asarray(tau, dtype=np.intp), np.asarray(sigma, dtype=np.intp),
            exhausted)


def aca_factor(rows, cols, kernel, eps, points=None, max_rank=None) -> LowRankFactor:
    U, V, tau, sigma, exhausted = aca(rows, cols, kernel, eps, points, max_rank)
    return LowRankFactor(U=U, V=V, row_pivots=tau, col_pivots=sigma,
                         exhausted=exhausted)


def aca_pivots(rows, cols, kernel, eps, points=None, max_rank=None):
    """Pivot rows/columns only (the NCA entry point)."""
    _, _, tau, sigma, _ = aca(rows, cols, kernel, eps, points, max_rank)
    return tau, sigma


def solve_square(A: np.ndarray, B: np.ndarray, cluster_id=None) -> np.ndarray:
    """A^{-1} B via partially pivoted LU; raises on singular cross matrices."""
    if A.shape[0] == 0:
        return np.zeros_like(B)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    # singular to working precision: the smallest LU pivot is pure roundoff
    # relative to the largest (legitimate cross matrices at tight eps have
    # ratios down to ~10 * machine epsilon, so the cut sits below that)
    d = np.abs(np.diag(lu))
    if d.min() <= 0.5 * np.finfo(lu.dtype).eps * max(d.max(), 1e-300):
        raise SingularCrossMatrix("singular cross matrix", cluster_id)
    return scipy.linalg.lu_solve((lu, piv), B, check_finite=False)


def rsolve(B: np.ndarray, A: np.ndarray, cluster_id=None) -> np.ndarray:
    """B A^{-1} (solve from the right)."""
    return solve_square(A.T, B.T, cluster_id).T
