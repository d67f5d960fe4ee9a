"""Kernel matrices evaluated lazily, entry-block at a time.

Sources and targets coincide: entry (i, j) couples points x_i and x_j of one
ParticleSet.  Every kernel exposes block(rows, cols) -> dense sub-matrix; no
caller may ask for the full N x N matrix except small-N oracles.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .tree import ParticleSet


class Kernel:
    """Base: radial kernels f(r) with a diagonal rule.

    diag        value placed at entries with i == j (None: use f applied to r=0).
    zero_value  value used when r == 0 for i != j (coincident points).
    shift       added to the diagonal on top of everything (system-level shift).
    """

    symmetric = True
    dtype = np.float64

    def __init__(self, particles: ParticleSet, diag=None, zero_value=0.0, shift=0.0):
        self.particles = particles
        self.diag = diag
        self.zero_value = zero_value
        self.shift = shift

    def _f(self, r):  # pragma: no cover - abstract
        raise NotImplementedError

    def block(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        if rows.size == 0 or cols.size == 0:
            return np.zeros((rows.size, cols.size), dtype=self.dtype)
        pts = self.particles.points
        r = cdist(pts[rows], pts[cols])
        zero = r == 0.0
        if zero.any():
            r = np.where(zero, 1.0, r)  # silence singular evaluations
        out = np.asarray(self._f(r), dtype=self.dtype)
        if zero.any():
            out[zero] = self.zero_value
            if self.diag is not None or self.shift:
                same = rows[:, None] == cols[None, :]
                if self.diag is not None:
                    out[same] = self.diag
                out[same] += self.shift
        elif self.shift:
            same = rows[:, None] == cols[None, :]
            out[same] += self.shift
        return out

    def entry(self, i, j):
        return self.block([i], [j])[0, 0]


class Log2D(Kernel):
    """log r, 0 on the diagonal."""

    def __init__(self, particles, **kw):
        kw.setdefault("zero_value", 0.0)
        super().__init__(particles, **kw)

    def _f(self, r):
        return np.log(r)


class InverseR(Kernel):
    """1/r with a configurable r = 0 value (0 by default, 1 selectable)."""

    def __init__(self, particles, zero_value=0.0, **kw):
        super().__init__(particles, zero_value=zero_value, **kw)

    def _f(self, r):
        return 1.0 / r


class Matern(Kernel):
    """exp(-r); smooth at r = 0, no diagonal rule needed."""

    def __init__(self, particles, **kw):
        kw.setdefault("zero_value", 1.0)
        super().__init__(particles, **kw)

    def _f(self, r):
        return np.exp(-r)


class Helmholtz(Kernel):
    """exp(i k r)/r with k = 1; 0 at r = 0.  Complex symmetric."""

    dtype = np.complex128

    def __init__(self, particles, k=1.0, **kw):
        kw.setdefault("zero_value", 0.0)
        super().__init__(particles, **kw)
        self.k = k

    def _f(self, r):
        return np.exp(1j * self.k * r) / r


class Rbf2D(Kernel):
    """Piecewise a/r (r >= a) / r/a (r < a), alpha = N^(1/4) on the diagonal."""

    def __init__(self, particles, a=1e-4, **kw):
        kw.setdefault("diag", particles.N ** 0.25)
        kw.setdefault("zero_value", 0.0)  # r/a at r=0
        super().__init__(particles, **kw)
        self.a = a

    def _f(self, r):
        return np.where(r >= self.a, self.a / r, r / self.a)


class RbfLog3D(Kernel):
    """log r/log a (r >= a), (r log r - 1)/(a log a - 1) (r < a); alpha = sqrt(N)."""

    def __init__(self, particles, a=1e-4, **kw):
        kw.setdefault("diag", particles.N ** 0.5)
        kw.setdefault("zero_value", -1.0 / (1e-4 * np.log(1e-4) - 1.0))
        super().__init__(particles, **kw)
        self.a = a
        self.zero_value = -1.0 / (self.a * np.log(self.a) - 1.0)

    def _f(self, r):
        la = np.log(self.a)
        return np.where(r >= self.a,
                        np.log(r) / la,
                        (r * np.log(r) - 1.0) / (self.a * la - 1.0))


class NtiMultiquadric3D(Kernel):
    """(||x-y||^2 + (c(x)-c(y))^2 + 1)^(3/2), c(x) = exp(-(x_1 + x_3)).

    Not translation invariant; the interpolation system adds a sqrt(N) shift
    on the diagonal (pass shift=sqrt(N)).
    """

    def __init__(self, particles, **kw):
        super().__init__(particles, **kw)
        p = particles.points
        self.c = np.exp(-(p[:, 0] + p[:, 2]))

    def block(self, rows, cols):
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        if rows.size == 0 or cols.size == 0:
            return np.zeros((rows.size, cols.size))
        pts = self.particles.points
        r2 = cdist(pts[rows], pts[cols], "sqeuclidean")
        dc = self.c[rows][:, None] - self.c[cols][None, :]
        out = (r2 + dc * dc + 1.0) ** 1.5
        if self.shift:
            out[rows[:, None] == cols[None, :]] += self.shift
        return out


class IntegralEq(Kernel):
    """Piece-wise constant collocation matrix: delta_ij + w * F(x_i, x_j).

    F is the free-space Green's function (-log(r)/2pi in 2D, 1/(4 pi r) in
    3D); w is the uniform cell volume (2/N^(1/d))^d on [-1, 1]^d; the
    singular self-integral is dropped, so the diagonal is 1.
    """

    def __init__(self, particles, **kw):
        kw.setdefault("diag", 1.0)
        kw.setdefault("zero_value", 1.0)
        super().__init__(particles, **kw)
        d = particles.dim
        self.w = (2.0 / particles.N ** (1.0 / d)) ** d

    def _green(self, r):
        if self.particles.dim == 2:
            return -np.log(r) / (2.0 * np.pi)
        return 1.0 / (4.0 * np.pi * r)

    def _f(self, r):
        return self.w * self._green(r)

    def block(self, rows, cols):
        out = super().block(rows, cols)
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        if rows.size and cols.size:
            same = rows[:, None] == cols[None, :]
            out[same] = 1.0 + self.shift
        return out


KERNELS = {
    "log2d": Log2D,
    "lap3d": InverseR,
    "matern": Matern,
    "helmholtz": Helmholtz,
    "rbf2d": Rbf2D,
    "rbflog3d": RbfLog3D,
    "ntimq3d": NtiMultiquadric3D,
    "inteq2d": IntegralEq,
    "inteq3d": IntegralEq,
}


def make_kernel(name: str, particles: ParticleSet, **kw) -> Kernel:
    try:
        cls = KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown kernel '{name}'") from None
    if name == "ntimq3d" and "shift" not in kw:
        kw["shift"] = np.sqrt(particles.N)
    return cls(particles, **kw)
