# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

import logging
from typing import NamedTuple

import markus
import numpy as np
import pandas as pd
from scipy import stats

from rffbench.kernels.sampler import PLAIN, WEIGHTED
from rffbench.settings import settings


logger = logging.getLogger("rffbench")
metrics = markus.get_metrics("rffbench")


class InsufficientData(ValueError):
    """Happens when there aren't enough usable points to fit a rate."""


class RateFit(NamedTuple):
    slope: float
    intercept: float
    r2: float
    # x values left out because their median wasn't positive
    excluded: tuple = ()


class SchemeComparison(NamedTuple):
    n: int
    s: int
    ratio: float
    low: float
    high: float
    trials: int


def json_safe(value):
    """JSON friendly scalars. NaN and inf become null."""
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def results_frame(results):
    """Cell results as a DataFrame, whether they come as CellResult
    objects or were read back from a cells CSV."""
    if isinstance(results, pd.DataFrame):
        return results
    return pd.DataFrame([result.as_row() for result in results])


def rate_points(results, x="n", y="excess_zero_one"):
    """Median of y per distinct x. Returns (xs, medians, excluded) where
    excluded are the x values whose median isn't positive."""
    frame = results_frame(results)
    for column in (x, y):
        if column not in frame.columns:
            raise InsufficientData(f"results have no {column!r} column")
    medians = frame.groupby(x, sort=True)[y].median()
    usable = medians[medians > 0]
    excluded = [value for value in medians.index if value not in usable.index]
    if excluded:
        logger.warning(
            "Excluding %s=%s from the rate fit, median %s isn't positive",
            x,
            excluded,
            y,
        )
    return usable.index.to_numpy(dtype=float), usable.to_numpy(dtype=float), excluded


def fit_rate(results, x="n", y="excess_zero_one"):
    """Least-squares fit of log(median y) on log(x). The x values whose
    median isn't positive are left out and listed in `excluded`."""
    xs, medians, excluded = rate_points(results, x=x, y=y)
    excluded = tuple(json_safe(value) for value in excluded)
    if len(xs) < 3:
        raise InsufficientData(
            f"need at least 3 distinct {x} values with a positive median {y}, "
            f"got {len(xs)}, excluded {list(excluded)}"
        )
    fit = stats.linregress(np.log(xs), np.log(medians))
    return RateFit(
        float(fit.slope),
        float(fit.intercept),
        float(fit.rvalue ** 2),
        excluded=excluded,
    )


def _median_ratio(weighted, plain):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.median(weighted) / np.median(plain)


def compare_schemes(results, y="excess_zero_one", resamples=None, seed=None):
    """Median y of the weighted scheme over the median of the plain scheme,
    per (n, s), with a paired bootstrap 90% interval over trials."""
    frame = results_frame(results)
    resamples = settings.BOOTSTRAP_RESAMPLES if resamples is None else resamples
    seed = settings.BOOTSTRAP_SEED if seed is None else seed
    rng = np.random.default_rng(seed)

    plain = frame[frame["scheme"] == PLAIN]
    weighted = frame[frame["scheme"] == WEIGHTED]
    comparisons = []
    keys = sorted(set(zip(frame["n"], frame["s"])))
    for n, s in keys:
        left = weighted[(weighted["n"] == n) & (weighted["s"] == s)]
        right = plain[(plain["n"] == n) & (plain["s"] == s)]
        paired = pd.merge(
            left[["trial", y]], right[["trial", y]], on="trial", suffixes=("_w", "_p")
        ).sort_values("trial")
        if paired.empty:
            logger.warning("No matched plain/weighted trials at n=%s s=%s", n, s)
            metrics.incr("compare_skipped")
            continue
        w = paired[f"{y}_w"].to_numpy(dtype=float)
        p = paired[f"{y}_p"].to_numpy(dtype=float)
        picks = rng.integers(len(w), size=(resamples, len(w)))
        boot = np.array([_median_ratio(w[pick], p[pick]) for pick in picks])
        if np.all(np.isnan(boot)):
            low = high = np.nan
        else:
            low, high = np.nanpercentile(boot, [5, 95])
        comparisons.append(
            SchemeComparison(
                n=int(n),
                s=int(s),
                ratio=float(_median_ratio(w, p)),
                low=float(low),
                high=float(high),
                trials=len(w),
            )
        )
    return comparisons
