# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

"""
Run an experiment plan: every (n, trial) draws a training and a holdout
set from the plan's reference sample, trains the exact kernel baseline
once and one random feature model per sampling scheme, and measures
excess risks against the known Bayes risks.
"""

import logging
import math
import os
import time
from dataclasses import asdict, dataclass

import markus
import numpy as np
import pandas as pd
import ujson as json

from rffbench.base.utils import get_executor
from rffbench.bench.analysis import (
    InsufficientData,
    compare_schemes,
    json_safe,
    fit_rate,
    rate_points,
    results_frame,
)
from rffbench.diagnostics.operators import excess_risk
from rffbench.diagnostics.spectrum import feature_fixed_point, gram_fixed_point
from rffbench.erm.solvers import (
    ConvergenceFailure,
    SolverOptions,
    train_kernel,
    train_rff,
)
from rffbench.kernels.core import gram_matrix
from rffbench.kernels.leverage import build_profile, effective_dimension, risk_bound
from rffbench.kernels.sampler import (
    PLAIN,
    WEIGHTED,
    build_plain,
    build_weighted,
    default_pool_size,
    feature_matrix,
)
from rffbench.settings import settings
from rffbench.synthdata.generators import (
    DEFAULT_ATOMS,
    NoiseModel,
    bayes_surrogate_risk,
    label,
    make_source_problem,
    make_spectrum_regime,
)


logger = logging.getLogger("rffbench")
metrics = markus.get_metrics("rffbench")

OK = "ok"
CONVERGENCE_FAILURE = "convergence_failure"

# Column order of cells.csv. Changing it breaks downstream scripts.
CELL_COLUMNS = (
    "n",
    "scheme",
    "trial",
    "seed",
    "s",
    "lambda",
    "d_hat",
    "r_star",
    "r_star_exact",
    "excess_zero_one",
    "excess_surrogate",
    "kernel_baseline_excess",
    "wall_time",
    "status",
)

CELLS_FILENAME = "cells.csv"
SUMMARY_FILENAME = "summary.json"
RATES_DATA_FILENAME = "rates.dat"
RATES_SCRIPT_FILENAME = "rates.gp"


@dataclass(frozen=True)
class CellResult:
    n: int
    s: int
    lam: float
    scheme: str
    trial: int
    seed: int
    excess_zero_one: float
    excess_surrogate: float
    kernel_baseline_excess: float
    wall_time: float
    r_star: float
    d_hat: float
    r_star_exact: float = math.nan
    status: str = OK

    @property
    def key(self):
        return (self.n, self.scheme, self.trial)

    def as_row(self):
        row = asdict(self)
        row["lambda"] = row.pop("lam")
        return {column: row[column] for column in CELL_COLUMNS}


def build_reference(plan):
    """The plan's reference sample and source target. Built once per plan
    from target_seed so every cell shares the same f_H."""
    regime = plan.regime
    spec, X = make_spectrum_regime(
        regime["kind"],
        plan.effective_reference_size,
        d=regime.get("input_dim"),
        seed=plan.target_seed,
        gamma=regime.get("gamma", 2.0),
        atoms=regime.get("atoms", DEFAULT_ATOMS),
    )
    return make_source_problem(
        spec, X.shape[0], plan.source_r, plan.source_R, plan.target_seed, X=X
    )


def trial_seeds(plan, n, trial):
    """(data, labels, features) seeds for one (n, trial)."""
    sequence = np.random.SeedSequence([plan.seed, n, trial])
    return [int(child.generate_state(1)[0]) for child in sequence.spawn(3)]


def _train(trainer, A, y, plan, lam, options):
    try:
        return trainer(A, y, plan.loss, lam, options), OK
    except ConvergenceFailure as exception:
        logger.info("Keeping the best iterate: %s", exception)
        return exception.model, CONVERGENCE_FAILURE


def _feature_map(spec, scheme, s, X_train, lam, seed):
    if scheme == PLAIN:
        return build_plain(spec, s, seed)
    profile = build_profile(spec, X_train, lam, default_pool_size(s), seed, workers=1)
    return build_weighted(spec, s, profile, seed + 1)


def run_trial(plan, target, n, trial):
    """CellResults of every scheme for one (n, trial), in plan order."""
    data_seed, label_seed, feature_seed = trial_seeds(plan, n, trial)
    noise = NoiseModel(plan.margin)
    bayes_zero_one = noise.bayes_risk
    bayes_surrogate = bayes_surrogate_risk(plan.loss, noise)
    options = SolverOptions(tol=plan.solver_tol, max_iters=plan.solver_max_iters)

    rng = np.random.default_rng(data_seed)
    indices = rng.choice(target.N, size=n + plan.holdout, replace=False)
    y_all = label(target, noise, indices, label_seed)
    X_all = target.reference_X[indices]
    X_train, y_train = X_all[:n], y_all[:n]
    X_hold, y_hold = X_all[n:], y_all[n:]

    spec = target.kernel
    lam = plan.lam(n)
    K = gram_matrix(spec, X_train)
    d_hat = effective_dimension(K, lam)
    r_star_exact, _ = gram_fixed_point(K)

    kernel_excess = math.nan
    if plan.kernel_baseline:
        model, _ = _train(train_kernel, K, y_train, plan, lam, options)
        kernel_excess = excess_risk(
            model, gram_matrix(spec, X_hold, X_train), y_hold, bayes_zero_one
        )

    cells = []
    for scheme in plan.schemes:
        start = time.monotonic()
        s = plan.s_rule.resolve(
            n, scheme=scheme, lam=lam, d_hat=d_hat, kappa=spec.kappa
        )
        feature_map = _feature_map(spec, scheme, s, X_train, lam, feature_seed)
        Phi = feature_matrix(feature_map, X_train)
        model, status = _train(train_rff, Phi, y_train, plan, lam, options)
        Phi_hold = feature_matrix(feature_map, X_hold)
        r_star, _ = feature_fixed_point(Phi)
        cells.append(
            CellResult(
                n=n,
                s=s,
                lam=lam,
                scheme=scheme,
                trial=trial,
                seed=data_seed,
                excess_zero_one=excess_risk(model, Phi_hold, y_hold, bayes_zero_one),
                excess_surrogate=excess_risk(
                    model, Phi_hold, y_hold, bayes_surrogate, loss=plan.loss
                ),
                kernel_baseline_excess=kernel_excess,
                wall_time=time.monotonic() - start,
                r_star=r_star,
                d_hat=d_hat,
                r_star_exact=r_star_exact,
                status=status,
            )
        )
        if status != OK:
            metrics.incr("cell_convergence_failure", tags=[f"scheme:{scheme}"])
        logger.debug(
            "n=%d trial=%d %s s=%d excess=%.4f",
            n,
            trial,
            scheme,
            s,
            cells[-1].excess_zero_one,
        )
    return cells


@metrics.timer_decorator("run")
def run(plan, out_dir=None, workers=None):
    """Run every (n, trial) of the plan and write cells.csv, summary.json
    and, if the plan asks for it, gnuplot files into out_dir."""
    out_dir = out_dir or plan.out_dir or settings.OUT_DIR
    os.makedirs(out_dir, exist_ok=True)
    logger.info(
        "Running plan %r: n=%s schemes=%s trials=%d",
        plan.name,
        list(plan.n_grid),
        list(plan.schemes),
        plan.trials,
    )
    target = build_reference(plan)
    jobs = [(n, trial) for n in plan.n_grid for trial in range(plan.trials)]
    with get_executor(workers) as executor:
        futures = [
            executor.submit(run_trial, plan, target, n, trial) for n, trial in jobs
        ]
        results = [cell for future in futures for cell in future.result()]
    results.sort(key=lambda cell: cell.key)

    write_cells_csv(os.path.join(out_dir, CELLS_FILENAME), results)
    summary = summarize(plan, results)
    with open(os.path.join(out_dir, SUMMARY_FILENAME), "w") as f:
        f.write(json.dumps(summary, indent=2))
    if plan.gnuplot:
        write_gnuplot(out_dir, results, plan.schemes)
    failures = sum(cell.status != OK for cell in results)
    logger.info(
        "Plan %r done: %d cells, %d failures", plan.name, len(results), failures
    )
    return results


def write_cells_csv(path, results):
    frame = results_frame(results)
    frame = frame.reindex(columns=list(CELL_COLUMNS))
    frame.to_csv(path, index=False)


def read_cells_csv(path):
    return pd.read_csv(path)


MEDIAN_COLUMNS = (
    "excess_zero_one",
    "excess_surrogate",
    "kernel_baseline_excess",
    "r_star",
    "r_star_exact",
    "d_hat",
)


def _safe_dict(record):
    return {key: json_safe(value) for key, value in record._asdict().items()}


def summarize(plan, results):
    frame = results_frame(results)
    cells = []
    for (n, scheme), group in frame.groupby(["n", "scheme"], sort=True):
        cell = {
            "n": json_safe(n),
            "scheme": scheme,
            "s": sorted(json_safe(s) for s in group["s"].unique()),
            "lambda": json_safe(group["lambda"].iloc[0]),
            "trials": len(group),
            "failures": int((group["status"] != OK).sum()),
        }
        for column in MEDIAN_COLUMNS:
            values = group[column].dropna()
            median = json_safe(values.median()) if len(values) else None
            cell[f"median_{column}"] = median
        cells.append(cell)

    rates = {}
    for scheme in plan.schemes:
        try:
            rates[scheme] = _safe_dict(fit_rate(frame[frame["scheme"] == scheme]))
        except InsufficientData as exception:
            rates[scheme] = {"error": str(exception)}

    comparisons = []
    if PLAIN in plan.schemes and WEIGHTED in plan.schemes:
        comparisons = [_safe_dict(comparison) for comparison in compare_schemes(frame)]

    bounds = {
        str(n): json_safe(risk_bound(n, plan.lam(n), plan.source_r, plan.source_R))
        for n in plan.n_grid
    }
    return {
        "plan": plan.to_dict(),
        "cells": cells,
        "rates": rates,
        "comparisons": comparisons,
        "risk_bounds": bounds,
    }


def write_gnuplot(out_dir, results, schemes):
    """rates.dat holds the median zero-one excess risk per n, one column
    per scheme; rates.gp plots it on log-log axes."""
    columns = {}
    for scheme in schemes:
        subset = results_frame(results)
        subset = subset[subset["scheme"] == scheme]
        xs, medians, _ = rate_points(subset)
        columns[scheme] = dict(zip(xs, medians))
    all_n = sorted(set().union(*(column.keys() for column in columns.values())))
    with open(os.path.join(out_dir, RATES_DATA_FILENAME), "w") as f:
        f.write("# n " + " ".join(schemes) + "\n")
        for n in all_n:
            values = [
                repr(float(columns[scheme].get(n, math.nan))) for scheme in schemes
            ]
            f.write(f"{int(n)} " + " ".join(values) + "\n")
    plots = ", ".join(
        f"'{RATES_DATA_FILENAME}' using 1:{i + 2} with linespoints title '{scheme}'"
        for i, scheme in enumerate(schemes)
    )
    with open(os.path.join(out_dir, RATES_SCRIPT_FILENAME), "w") as f:
        f.write("set logscale xy\n")
        f.write("set xlabel 'n'\n")
        f.write("set ylabel 'median zero-one excess risk'\n")
        f.write(f"plot {plots}\n")
