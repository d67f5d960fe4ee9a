"""`h2weak` command line: benchmark harness around the library.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import os
import sys

import click

from .bench import (ExperimentSpec, NumericalFailure, render_figure,
                    run_experiment, write_csv)
from .engine import VARIANTS
from .kernels import KERNELS
from .lowrank import SingularCrossMatrix


class ConfigError(Exception):
    pass


def _validate(spec: ExperimentSpec):
    if spec.task not in ("mvp", "gmres", "rankprofile", "negcontrol"):
        raise ConfigError(f"unknown task '{spec.task}'")
    if spec.kernel not in KERNELS:
        raise ConfigError(f"unknown kernel '{spec.kernel}'")
    if spec.dim not in (1, 2, 3):
        raise ConfigError(f"unsupported dimension {spec.dim}")
    for v in spec.variants:
        if v not in VARIANTS:
            raise ConfigError(f"unknown variant '{v}'")
    if spec.eps <= 0:
        raise ConfigError("eps must be positive")
    if not spec.Ns:
        raise ConfigError("at least one -N value is required")
    if spec.task == "negcontrol" and spec.dim != 2:
        raise ConfigError("negcontrol is a 2D experiment")


@click.group()
def main():
    """Hierarchical-matrix fast MVP benchmarks."""


@main.command()
@click.option("--task", default="mvp", show_default=True,
              help="mvp | gmres | rankprofile | negcontrol")
@click.option("--variant", "variants", multiple=True, default=("h2star-bt",),
              show_default=True,
              help="any of: " + ", ".join(VARIANTS) + " (repeatable)")
@click.option("--kernel", default="log2d", show_default=True,
              help="one of: " + ", ".join(KERNELS))
@click.option("--dim", default=2, show_default=True, type=int)
@click.option("-N", "Ns", multiple=True, type=int, required=True,
              help="problem size (repeatable for sweeps)")
@click.option("--nmax", default=None, type=int,
              help="leaf capacity [default: 100 in 2D, 125 in 3D]")
@click.option("--eps", default=1e-8, show_default=True, type=float)
@click.option("--eps-far", default=None, type=float)
@click.option("--eps-ver", default=None, type=float)
@click.option("--dist", default="uniform", show_default=True,
              help="uniform | chebyshev | grid")
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--trials", default=5, show_default=True, type=int)
@click.option("--gmres-tol", default=None, type=float,
              help="[default: 1e-12 in 2D, 1e-10 in 3D]")
@click.option("--symmetric", is_flag=True,
              help="reuse transposed operators for symmetric kernels")
@click.option("--no-store-near", is_flag=True,
              help="evaluate near-field blocks on the fly (lower memory)")
@click.option("--label", default="", help="experiment label in the CSV")
@click.option("--plot", is_flag=True,
              help="render a figure next to the CSV output")
@click.option("--out", default="results.csv", show_default=True,
              help="CSV output path")
def bench(task, variants, kernel, dim, Ns, nmax, eps, eps_far, eps_ver, dist,
          seed, trials, gmres_tol, symmetric, no_store_near, label, plot, out):
    """Run one benchmark task and write its CSV (and optional figure)."""
    spec = ExperimentSpec(task=task, kernel=kernel, dim=dim, Ns=tuple(Ns),
                          variants=tuple(variants), n_max=nmax, dist=dist,
                          eps=eps, eps_far=eps_far, eps_ver=eps_ver, seed=seed,
                          trials=trials, gmres_tol=gmres_tol, label=label,
                          symmetric=symmetric, store_near=not no_store_near)
    try:
        _validate(spec)
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(1)
    try:
        rows = run_experiment(spec)
    except (NumericalFailure, SingularCrossMatrix, FloatingPointError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(2)
    except ValueError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(1)
    write_csv(rows, out)
    click.echo(f"wrote {len(rows)} rows to {out}")
    if plot:
        fig_path = os.path.splitext(out)[0] + ".png"
        render_figure(rows, spec, fig_path)
        click.echo(f"wrote figure to {fig_path}")


if __name__ == "__main__":
    main()
