"""Experiment harness: build representations, measure MVP/GMRES error, time
and memory, and emit CSV rows (optionally with companion figures)."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .engine import VARIANTS, build_variant
from .kernels import make_kernel
from .points import make_points
from .solver import GmresConfig, gmres
from .tree import build_tree

CSV_HEADER = ("experiment,task,variant,kernel,dim,N,nmax,dist,eps,eps_far,"
              "eps_ver,seed,kappa,init_s,mvp_s,direct_s,mem_scalars,re_mvp,"
              "gmres_iters,re_sol,rank_max,rank_min,rank_avg")

DENSE_CAP = 20000  # largest N for which the dense oracle runs


class NumericalFailure(Exception):
    pass


@dataclass
class ExperimentSpec:
    task: str  # mvp | gmres | rankprofile | negcontrol
    kernel: str
    dim: int
    Ns: tuple
    variants: tuple = ("h2star-bt",)
    n_max: int = None  # default 100 (d<=2) / 125 (d=3)
    dist: str = "uniform"
    eps: float = 1e-8
    eps_far: float = None
    eps_ver: float = None
    seed: int = 42
    trials: int = 5
    gmres_tol: float = None  # default 1e-12 (2D) / 1e-10 (3D)
    label: str = ""
    symmetric: bool = False
    store_near: bool = True

    def __post_init__(self):
        if self.n_max is None:
            self.n_max = 125 if self.dim == 3 else 100
        if self.gmres_tol is None:
            self.gmres_tol = 1e-10 if self.dim == 3 else 1e-12
        if not self.label:
            self.label = f"{self.task}-{self.kernel}-{self.dim}d"


@dataclass
class ResultRow:
    spec: ExperimentSpec
    variant: str
    N: int
    kappa: int
    init_s: float = float("nan")
    mvp_s: float = float("nan")
    direct_s: float = float("nan")
    mem_scalars: int = 0
    re_mvp: float = float("nan")
    gmres_iters: int = -1
    re_sol: float = float("nan")
    rank_max: int = -1
    rank_min: int = -1
    rank_avg: float = float("nan")
    residual_history: list = field(default_factory=list)

    def csv_values(self):
        s = self.spec
        return [s.label, s.task, self.variant, s.kernel, s.dim, self.N,
                s.n_max, s.dist, s.eps,
                s.eps_far if s.eps_far is not None else s.eps,
                s.eps_ver if s.eps_ver is not None else s.eps,
                s.seed, self.kappa, f"{self.init_s:.6g}", f"{self.mvp_s:.6g}",
                f"{self.direct_s:.6g}", self.mem_scalars,
                f"{self.re_mvp:.6g}", self.gmres_iters, f"{self.re_sol:.6g}",
                self.rank_max, self.rank_min, f"{self.rank_avg:.6g}"]


def dense_matvec(kernel, q, block=2048, timer=None):
    """Streaming dense oracle phi = K q, never forming the full matrix."""
    N = kernel.particles.N
    t0 = time.perf_counter()
    phi = np.zeros(N, dtype=np.result_type(q.dtype, kernel.dtype))
    idx = np.arange(N)
    for lo in range(0, N, block):
        phi[lo:lo + block] = kernel.block(idx[lo:lo + block], idx) @ q
    if timer is not None:
        timer.append(time.perf_counter() - t0)
    return phi


def relative_error(approx, exact):
    denom = np.linalg.norm(exact)
    if denom == 0:
        return float(np.linalg.norm(approx))
    return float(np.linalg.norm(approx - exact) / denom)


def _make_kernel(spec: ExperimentSpec, particles):
    kw = {}
    if spec.task == "negcontrol":
        # 1/r with the r = 0 -> 1 convention of the pivot-selection study
        return make_kernel("lap3d", particles, zero_value=1.0)
    return make_kernel(spec.kernel, particles, **kw)


def _build(spec, variant, tree, kernel):
    t0 = time.perf_counter()
    rep = build_variant(variant, tree, kernel, eps=spec.eps,
                        eps_far=spec.eps_far, eps_ver=spec.eps_ver,
                        symmetric=spec.symmetric, store_near=spec.store_near)
    return rep, time.perf_counter() - t0


def _rank_cols(row, rep):
    ranks = rep.leaf_ranks()
    if ranks.size:
        row.rank_max = int(ranks.max())
        row.rank_min = int(ranks.min())
        row.rank_avg = float(ranks.mean())


def _random_q(N, seed, dtype=np.float64, count=1):
    rng = np.random.default_rng(seed)
    qs = rng.standard_normal((count, N))
    if np.issubdtype(dtype, np.complexfloating):
        qs = qs + 1j * rng.standard_normal((count, N))
    return qs.astype(dtype)


def run_experiment(spec: ExperimentSpec) -> list:
    """Run the task over every variant x N; returns one ResultRow each."""
    rows = []
    for N in spec.Ns:
        particles = make_points(spec.dist, N, spec.dim, spec.seed)
        kernel = _make_kernel(spec, particles)
        tree = build_tree(particles, spec.n_max)
        variants = spec.variants
        if spec.task in ("negcontrol", "rankprofile"):
            variants = ("h2star-b", "h2star-t")
        for variant in variants:
            row = ResultRow(spec=spec, variant=variant, N=N, kappa=tree.kappa)
            rep, row.init_s = _build(spec, variant, tree, kernel)
            row.mem_scalars = rep.mem_scalars
            _rank_cols(row, rep)
            if spec.task in ("mvp", "negcontrol"):
                qs = _random_q(N, spec.seed + 1, kernel.dtype, spec.trials)
                times, errs = [], []
                dtimes = []
                for q in qs:
                    t0 = time.perf_counter()
                    phi = rep.matvec(q)
                    times.append(time.perf_counter() - t0)
                    if not np.all(np.isfinite(phi)):
                        raise NumericalFailure(
                            f"non-finite MVP output ({variant}, N={N})")
                    if N <= DENSE_CAP:
                        exact = dense_matvec(kernel, q, timer=dtimes)
                        errs.append(relative_error(phi, exact))
                row.mvp_s = float(np.mean(times))
                if dtimes:
                    row.direct_s = float(np.mean(dtimes))
                if errs:
                    row.re_mvp = float(np.max(errs))
            elif spec.task == "gmres":
                q_true = _random_q(N, spec.seed + 1, kernel.dtype)[0]
                if N <= DENSE_CAP:
                    b = dense_matvec(kernel, q_true)
                else:
                    # tightened representation so RE_sol isolates solver error
                    tight = build_variant(variant, tree, kernel,
                                          eps=spec.eps / 100,
                                          symmetric=spec.symmetric,
                                          store_near=False)
                    b = tight.matvec(q_true)
                    del tight
                report = gmres(rep.matvec, b, GmresConfig(tol=spec.gmres_tol))
                if not report.converged:
                    raise NumericalFailure(
                        f"GMRES did not converge ({variant}, N={N})")
                row.gmres_iters = report.iterations
                row.re_sol = relative_error(report.x, q_true)
                row.residual_history = report.residual_history
            rows.append(row)
            del rep
    return rows


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow(row.csv_values())


def render_figure(rows, spec: ExperimentSpec, path: str):
    """Companion figure next to the CSV (report path)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    task = spec.task
    if task == "mvp":
        for variant in {r.variant for r in rows}:
            sub = sorted((r for r in rows if r.variant == variant),
                         key=lambda r: r.N)
            ax.loglog([r.N for r in sub], [r.mvp_s for r in sub],
                      "o-", label=variant)
        ax.set_xlabel("N")
        ax.set_ylabel("MVP time (s)")
    elif task == "gmres":
        for row in rows:
            ax.semilogy(range(1, len(row.residual_history) + 1),
                        row.residual_history, "o-",
                        label=f"{row.variant} N={row.N}")
        ax.set_xlabel("iteration")
        ax.set_ylabel("relative residual")
    elif task in ("negcontrol", "rankprofile"):
        labels = [f"{r.variant}\nN={r.N}" for r in rows]
        vals = [r.re_mvp if task == "negcontrol" else r.rank_avg for r in rows]
        ax.bar(range(len(rows)), vals)
        ax.set_xticks(range(len(rows)), labels)
        ax.set_ylabel("relative MVP error" if task == "negcontrol"
                      else "leaf-level average rank")
        if task == "negcontrol":
            ax.set_yscale("log")
    ax.set_title(spec.label)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
