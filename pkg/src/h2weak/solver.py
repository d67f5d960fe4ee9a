"""Restart-free GMRES (Arnoldi + modified Gram-Schmidt + Givens rotations).

Works over real or complex scalars; the matrix enters only through an
apply(v) -> A v callable, so any hierarchical representation (or a dense
oracle) can drive it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class GmresConfig:
    tol: float = 1e-12
    max_iter: int = None  # defaults to n (full Krylov space, no restart)
    record_residuals: bool = True


@dataclass
class SolveReport:
    x: np.ndarray
    iterations: int
    residual: float  # final relative residual
    converged: bool
    wall_time: float
    residual_history: list = field(default_factory=list)


def _givens(a, b):
    """Rotation [c, s; -conj(s), c] (c real) zeroing b against a."""
    if b == 0:
        return 1.0, 0.0 * a
    t = np.hypot(abs(a), abs(b))
    c = abs(a) / t
    s = (a / abs(a)) * np.conj(b) / t if a != 0 else np.conj(b) / abs(b)
    return c, s


def gmres(apply, b: np.ndarray, cfg: GmresConfig = None) -> SolveReport:
    if cfg is None:
        cfg = GmresConfig()
    t0 = time.perf_counter()
    b = np.asarray(b)
    n = len(b)
    max_iter = cfg.max_iter if cfg.max_iter is not None else n
    beta = np.linalg.norm(b)
    if beta == 0:
        raise ValueError("b must be nonzero")
    probe = apply(b)  # reused as the first Krylov step: A V[0] = probe / beta
    dtype = np.result_type(b.dtype, probe.dtype, np.float64)

    V = np.zeros((max_iter + 1, n), dtype=dtype)
    H = np.zeros((max_iter + 1, max_iter), dtype=dtype)
    cs = np.zeros(max_iter, dtype=np.float64)
    sn = np.zeros(max_iter, dtype=dtype)
    g = np.zeros(max_iter + 1, dtype=dtype)

    V[0] = b / beta
    g[0] = beta
    history = []
    res = 1.0
    converged = False
    k = 0
    for k in range(max_iter):
        w = probe / beta if k == 0 else apply(V[k])
        w = w.astype(dtype, copy=False)
        # modified Gram-Schmidt
        for i in range(k + 1):
            H[i, k] = np.vdot(V[i], w)
            w = w - H[i, k] * V[i]
        H[k + 1, k] = np.linalg.norm(w)
        happy = abs(H[k + 1, k]) <= 1e-14 * beta
        if not happy:
            V[k + 1] = w / H[k + 1, k]
        # apply the accumulated rotations, then a new one
        for i in range(k):
            hi, hj = H[i, k], H[i + 1, k]
            H[i, k] = cs[i] * hi + sn[i] * hj
            H[i + 1, k] = -np.conj(sn[i]) * hi + cs[i] * hj
        c, s = _givens(H[k, k], H[k + 1, k])
        cs[k], sn[k] = c, s
        H[k, k] = c * H[k, k] + s * H[k + 1, k]
        H[k + 1, k] = 0.0
        g[k + 1] = -np.conj(s) * g[k]
        g[k] = c * g[k]
        res = abs(g[k + 1]) / beta
        if cfg.record_residuals:
            history.append(res)
        if res <= cfg.tol or happy:
            converged = True
            k += 1
            break
    else:
        k = max_iter
    y = np.linalg.solve(H[:k, :k], g[:k]) if k else np.zeros(0, dtype=dtype)
    x = V[:k].T @ y
    return SolveReport(x=x, iterations=k, residual=float(res),
                       converged=converged, wall_time=time.perf_counter() - t0,
                       residual_history=history)
