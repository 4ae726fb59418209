# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

"""
Spectrum of the normalized Gram matrix K/n: how fast it decays and the
local Rademacher fixed point

    r* = min over h in {0..n} of  h/n + sqrt((1/n) sum_{i>h} mu_i)

that controls the fast-rate term of the excess-risk bound.
"""

import logging
from dataclasses import dataclass

import markus
import numpy as np
import pandas as pd
from scipy import stats

from rffbench.base.utils import check_symmetric, clamped_eigvalsh
from rffbench.settings import settings


logger = logging.getLogger("rffbench")
metrics = markus.get_metrics("rffbench")

FINITE_RANK = "finite_rank"
EXPONENTIAL = "exponential"
POLYNOMIAL = "polynomial"
UNCLASSIFIED = "unclassified"

DECAY_CLASSES = (FINITE_RANK, EXPONENTIAL, POLYNOMIAL, UNCLASSIFIED)

NEGATIVE_TOLERANCE = 1e-10

# A drop by this factor right at the numerical rank counts as the end of
# a finite spectrum.
RANK_GAP = 1e4

# A spectrum whose retained eigenvalues are all within this factor of
# the largest has no decay to fit.
FLAT_RATIO = 0.5


class NegativeEigenvalue(ValueError):
    """Happens when an eigenvalue list has a value below -1e-10."""


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    decay_class: str
    decay_param: float
    r_star: float
    h_star: int
    fit_r2: float = None

    @property
    def n(self):
        return self.eigenvalues.shape[0]

    def to_dict(self):
        return {
            "n": self.n,
            "eigenvalues": self.eigenvalues.tolist(),
            "decay_class": self.decay_class,
            "decay_param": self.decay_param,
            "fit_r2": self.fit_r2,
            "r_star": self.r_star,
            "h_star": self.h_star,
        }


def _check_eigenvalues(mu):
    mu = np.asarray(mu, dtype=float).ravel()
    if np.any(mu < -NEGATIVE_TOLERANCE):
        raise NegativeEigenvalue(f"eigenvalue {mu.min()} is negative")
    return np.sort(np.clip(mu, 0.0, None))[::-1]


def local_rademacher_fixed_point(mu, n):
    """Brute force over every h. Ties go to the smallest h.

    Returns (r_star, h_star). Eigenvalue lists shorter than n are padded
    with zeros.
    """
    mu = _check_eigenvalues(mu)
    if mu.shape[0] > n:
        raise ValueError(f"{mu.shape[0]} eigenvalues for n={n}")
    mu = np.concatenate([mu, np.zeros(n - mu.shape[0])])
    values = np.empty(n + 1)
    for h in range(n + 1):
        values[h] = h / n + np.sqrt(np.sum(mu[h:]) / n)
    h_star = int(np.argmin(values))
    return float(values[h_star]), h_star


def _loglinear_fit(x, y):
    fit = stats.linregress(x, y)
    return fit.slope, fit.rvalue ** 2


def classify_decay(mu):
    """Returns (decay_class, decay_param, fit_r2) for eigenvalues sorted
    in descending order.

    decay_param is the numerical rank, the exponential rate (mu_i ~
    exp(-rate * i)) or the polynomial exponent (mu_i ~ i^-gamma). The
    exponential fit only uses the eigenvalues above the noise floor
    DECAY_FIT_FLOOR * mu_1 / n; below it an empirical spectrum bends
    away from the operator's.
    """
    n = mu.shape[0]
    if n == 0 or mu[0] <= 0:
        return FINITE_RANK, 0.0, None
    rank = int(np.sum(mu > settings.DECAY_RANK_CUTOFF * mu[0]))
    if rank < n:
        following = mu[rank]
        if following <= 0 or mu[rank - 1] / following >= RANK_GAP:
            return FINITE_RANK, float(rank), None
    if mu[rank - 1] >= FLAT_RATIO * mu[0]:
        return FINITE_RANK, float(rank), None

    window = min(rank, max(3, n // 4))
    if window < 3:
        return UNCLASSIFIED, float("nan"), None
    floor = settings.DECAY_FIT_FLOOR * mu[0] / n
    exp_window = min(window, int(np.sum(mu >= floor)))
    index = np.arange(1, window + 1, dtype=float)
    log_mu = np.log(mu[:window])
    poly_slope, poly_r2 = _loglinear_fit(np.log(index), log_mu)
    exp_slope, exp_r2 = -np.inf, -np.inf
    if exp_window >= 3:
        exp_slope, exp_r2 = _loglinear_fit(index[:exp_window], log_mu[:exp_window])
    logger.debug(
        "Decay fits: exponential over %d eigenvalues R2=%.4f, "
        "polynomial over %d R2=%.4f",
        exp_window,
        exp_r2,
        window,
        poly_r2,
    )
    if exp_r2 >= poly_r2:
        decay_class, param, r2 = EXPONENTIAL, -exp_slope, exp_r2
    else:
        decay_class, param, r2 = POLYNOMIAL, -poly_slope, poly_r2
    if r2 < settings.DECAY_FIT_MIN_R2:
        return UNCLASSIFIED, float(param), float(r2)
    return decay_class, float(param), float(r2)


@metrics.timer_decorator("gram_spectrum")
def gram_spectrum(K):
    K = check_symmetric(K)
    n = K.shape[0]
    mu = clamped_eigvalsh(K / n)
    decay_class, decay_param, fit_r2 = classify_decay(mu)
    r_star, h_star = local_rademacher_fixed_point(mu, n)
    return SpectrumReport(
        eigenvalues=mu,
        decay_class=decay_class,
        decay_param=decay_param,
        r_star=r_star,
        h_star=h_star,
        fit_r2=fit_r2,
    )


def gram_fixed_point(K):
    """(r*, h*) of the normalized Gram matrix K/n."""
    K = check_symmetric(K)
    n = K.shape[0]
    return local_rademacher_fixed_point(clamped_eigvalsh(K / n), n)


def feature_fixed_point(Phi):
    """(r*, h*) of Phi Phi' / n, read off the s x s matrix Phi' Phi / n,
    which has the same nonzero eigenvalues."""
    Phi = np.asarray(Phi, dtype=float)
    n = Phi.shape[0]
    mu = clamped_eigvalsh(Phi.T @ Phi / n)[:n]
    return local_rademacher_fixed_point(mu, n)


def fixed_point_report(K, K_approx):
    """r* and its argmin for both the exact Gram matrix and its random
    feature approximation."""
    report = {}
    for key, matrix in (("exact", K), ("approximate", K_approx)):
        r_star, h_star = gram_fixed_point(matrix)
        report[key] = {"r_star": r_star, "h_star": h_star}
    return report


def write_eigenvalues_csv(path, report):
    frame = pd.DataFrame(
        {
            "index": np.arange(1, report.n + 1),
            "eigenvalue": report.eigenvalues,
        }
    )
    frame.to_csv(path, index=False)
