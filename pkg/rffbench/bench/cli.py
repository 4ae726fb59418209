# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

"""
Command line tool for running experiment plans and looking at their
results.

    rffbench run --plan plan.json --out-dir results/
    rffbench fit --input results/cells.csv --y excess_zero_one
    rffbench compare --input results/cells.csv
    rffbench spectrum --dataset data.csv --lambda 0.01
"""

import functools
import sys

import click
import ujson as json

from rffbench.apps import configure
from rffbench.bench.analysis import compare_schemes, fit_rate, json_safe
from rffbench.bench.plans import load_plan
from rffbench.bench.runner import OK, read_cells_csv, run
from rffbench.diagnostics.spectrum import gram_spectrum, write_eigenvalues_csv
from rffbench.erm.solvers import ConvergenceFailure
from rffbench.kernels.core import FAMILIES, GAUSSIAN, KernelSpec, gram_matrix
from rffbench.kernels.leverage import effective_dimension
from rffbench.synthdata.generators import read_dataset_csv


# Every rejected-input error in the package is a ValueError. These end a
# command with exit status 1 and a JSON error document on stderr.
HANDLED_ERRORS = (ValueError, OSError, ConvergenceFailure)


def echo_json(data):
    click.echo(json.dumps(data, indent=2))


def handle_errors(function):
    @functools.wraps(function)
    def inner(*args, **kwargs):
        try:
            return function(*args, **kwargs)
        except HANDLED_ERRORS as exception:
            error = {"error": str(exception), "type": exception.__class__.__name__}
            click.echo(json.dumps(error), err=True)
            sys.exit(1)

    return inner


@click.group()
@click.option(
    "--show-metrics", is_flag=True, help="Echo markus timings to stderr."
)
@click.pass_context
def cli(ctx, show_metrics):
    """Random Fourier feature classification experiments."""
    extra = []
    if show_metrics:
        extra.append({"class": "rffbench.markus_extra.EchoMetrics"})
    configure(extra_backends=extra)


@cli.command("run")
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Overrides the plan's seed.")
@click.option("--workers", type=int, default=None, help="Concurrent (n, trial) jobs.")
@click.option("--out-dir", default=None, help="Where cells.csv and summary.json go.")
@handle_errors
def run_command(plan_path, seed, workers, out_dir):
    """Run every cell of an experiment plan."""
    plan = load_plan(plan_path).with_overrides(seed=seed, out_dir=out_dir)
    results = run(plan, workers=workers)
    failures = sum(cell.status != OK for cell in results)
    message = click.style(f"{len(results)} cells", fg="green")
    if failures:
        message += click.style(f", {failures} convergence failures", fg="yellow")
    click.echo(message)


@cli.command("fit")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--x", "x_column", default="n")
@click.option("--y", "y_column", default="excess_zero_one")
@click.option("--scheme", default=None, help="Only fit the cells of this scheme.")
@handle_errors
def fit_command(input_path, x_column, y_column, scheme):
    """Fit log(median y) against log(x)."""
    frame = read_cells_csv(input_path)
    if scheme is not None:
        frame = frame[frame["scheme"] == scheme]
    fit = fit_rate(frame, x=x_column, y=y_column)
    echo_json({key: json_safe(value) for key, value in fit._asdict().items()})


@cli.command("compare")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--y", "y_column", default="excess_zero_one")
@handle_errors
def compare_command(input_path, y_column):
    """Weighted over plain median ratio per (n, s), with bootstrap interval."""
    frame = read_cells_csv(input_path)
    comparisons = compare_schemes(frame, y=y_column)
    echo_json(
        [
            {key: json_safe(value) for key, value in comparison._asdict().items()}
            for comparison in comparisons
        ]
    )


@cli.command("spectrum")
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--lambda", "lam", required=True, type=float)
@click.option("--kernel", type=click.Choice(FAMILIES), default=GAUSSIAN)
@click.option("--bandwidth", type=float, default=1.0)
@click.option(
    "--csv",
    "csv_path",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="Also write the eigenvalues to this CSV file.",
)
@handle_errors
def spectrum_command(dataset, lam, kernel, bandwidth, csv_path):
    """Gram spectrum, decay class, r* and d(lambda) of a CSV dataset."""
    X, _, _ = read_dataset_csv(dataset)
    spec = KernelSpec(kernel, bandwidth=bandwidth, input_dim=X.shape[1])
    K = gram_matrix(spec, X)
    report = gram_spectrum(K)
    data = report.to_dict()
    data["lambda"] = lam
    data["d_hat"] = effective_dimension(K, lam)
    data["decay_param"] = json_safe(data["decay_param"])
    if csv_path:
        write_eigenvalues_csv(csv_path, report)
        data["eigenvalues_csv"] = csv_path
    echo_json(data)


def main():
    cli(prog_name="rffbench")


if __name__ == "__main__":
    main()
