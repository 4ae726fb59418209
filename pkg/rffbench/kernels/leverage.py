# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

"""
Empirical ridge leverage scores of random Fourier frequencies, the
effective degrees of freedom d(lambda) and the feature budgets they
imply.

The population operator is replaced by the empirical one, K/n acting
on L2 of the sample, so for a frequency v with feature column
z_v = (psi(v, x_1), ..., psi(v, x_n))

    tau(v) = p(v) * (1/n) * z_v' (K/n + lambda I)^-1 z_v

and the mean of tau/p over frequencies drawn from p estimates
d(lambda) = Tr[(K/n) (K/n + lambda I)^-1].
"""

import logging
import math
from dataclasses import dataclass

import markus
import numpy as np
from scipy import linalg

from rffbench.base.utils import (
    as_matrix,
    check_symmetric,
    chunked,
    clamped_eigvalsh,
    get_executor,
    ridge_factor,
)
from rffbench.kernels.core import (
    Frequency,
    KernelSpec,
    feature_values,
    gram_matrix,
    spectral_density,
    spectral_density_batch,
    spectral_sample_arrays,
)
from rffbench.kernels.sampler import PLAIN, SCHEMES
from rffbench.settings import settings


logger = logging.getLogger("rffbench")
metrics = markus.get_metrics("rffbench")

COROLLARY = "corollary"
THEOREM = "theorem"

BUDGET_MODES = (COROLLARY, THEOREM)


class InvalidBudgetRequest(ValueError):
    """Happens when a feature budget is asked for with a bad delta,
    d_hat, scheme or mode."""


@dataclass(frozen=True, eq=False)
class LeverageProfile:
    kernel: KernelSpec
    omegas: np.ndarray
    phases: np.ndarray
    density: np.ndarray
    ratios: np.ndarray
    lam: float
    d_hat: float
    d_tau: float

    @property
    def m(self):
        return self.ratios.shape[0]

    @property
    def pool(self):
        return [
            Frequency(tuple(omega), float(phase))
            for omega, phase in zip(self.omegas, self.phases)
        ]

    @property
    def tau(self):
        """Leverage score p(v) * ratio per pool atom."""
        return self.density * self.ratios

    def to_dict(self):
        return {
            "kernel": self.kernel.to_dict(),
            "lambda": self.lam,
            "d_hat": self.d_hat,
            "d_tau": self.d_tau,
            "frequencies": self.omegas.tolist(),
            "phases": self.phases.tolist(),
            "density": self.density.tolist(),
            "ratios": self.ratios.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            kernel=KernelSpec.from_dict(data["kernel"]),
            omegas=np.asarray(data["frequencies"], dtype=float),
            phases=np.asarray(data["phases"], dtype=float),
            density=np.asarray(data["density"], dtype=float),
            ratios=np.asarray(data["ratios"], dtype=float),
            lam=float(data["lambda"]),
            d_hat=float(data["d_hat"]),
            d_tau=float(data["d_tau"]),
        )


def _check_lambda(lam):
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, not {lam}")


def _leverage_ratios(factor, Z):
    """(1/n) z' (K/n + lambda I)^-1 z for each column z of Z."""
    n = Z.shape[0]
    solved = linalg.cho_solve(factor, Z, check_finite=False)
    return np.clip(np.einsum("ij,ij->j", Z, solved) / n, 0.0, None)


def empirical_leverage(spec, X, lam, f):
    _check_lambda(lam)
    X = as_matrix(X)
    factor = ridge_factor(gram_matrix(spec, X), lam)
    omegas = f.omega_array[np.newaxis, :]
    Z = feature_values(spec, omegas, np.array([f.phase]), X)
    return spectral_density(spec, f) * float(_leverage_ratios(factor, Z)[0])


def effective_dimension(K, lam):
    """d(lambda) = sum_i mu_i / (mu_i + lambda) over the eigenvalues
    mu_i of K/n."""
    _check_lambda(lam)
    K = check_symmetric(K)
    mu = clamped_eigvalsh(K / K.shape[0])
    return float(np.sum(mu / (mu + lam)))


def effective_dimension_trace(K, lam):
    """d(lambda) = Tr[(K/n) (K/n + lambda I)^-1], by solving."""
    _check_lambda(lam)
    K = check_symmetric(K)
    n = K.shape[0]
    factor = ridge_factor(K, lam)
    return float(np.trace(linalg.cho_solve(factor, K / n, check_finite=False)))


@metrics.timer_decorator("build_profile")
def build_profile(spec, X, lam, pool_size, seed, workers=None):
    """Draw a pool of frequencies from the spectral density and score
    every atom with its empirical leverage.

    The ridge operator is factorized once; pool chunks are then scored
    concurrently against that shared factor.
    """
    _check_lambda(lam)
    if pool_size < 1:
        raise ValueError(f"pool_size must be >= 1, not {pool_size}")
    X = as_matrix(X)
    omegas, phases = spectral_sample_arrays(spec, pool_size, seed)
    K = gram_matrix(spec, X)
    factor = ridge_factor(K, lam)

    def score(bounds):
        start, stop = bounds
        Z = feature_values(spec, omegas[start:stop], phases[start:stop], X)
        return _leverage_ratios(factor, Z)

    chunks = list(chunked(pool_size, settings.LEVERAGE_CHUNK_SIZE))
    with get_executor(workers) as executor:
        ratios = np.concatenate(list(executor.map(score, chunks)))

    density = spectral_density_batch(spec, omegas)
    d_hat = effective_dimension(K, lam)
    logger.debug(
        "Leverage profile: m=%d lambda=%g d_hat=%.4f pool mean=%.4f",
        pool_size,
        lam,
        d_hat,
        ratios.mean(),
    )
    return LeverageProfile(
        kernel=spec,
        omegas=omegas,
        phases=phases,
        density=density,
        ratios=ratios,
        lam=lam,
        d_hat=d_hat,
        d_tau=float(ratios.mean()),
    )


def feature_budget(scheme, lam, d_hat, kappa, delta, mode=COROLLARY):
    """Number of features that suffices for the excess-risk bound.

    Corollary mode:
        plain     ceil(5 kappa^2/lambda * ln(16 d/delta))
        weighted  ceil(5 d * ln(16 d/delta))
    Theorem mode:
        ceil(12 d_tau * ln(d/delta)) with d_tau = kappa^2/lambda (plain)
        or d (weighted).

    Logs are natural logs. Never less than 1.
    """
    if not 0 < delta < 1:
        raise InvalidBudgetRequest(f"delta must be in (0, 1), not {delta}")
    if not d_hat > 0:
        raise InvalidBudgetRequest(f"d_hat must be > 0, not {d_hat}")
    _check_lambda(lam)
    if scheme not in SCHEMES:
        raise InvalidBudgetRequest(f"Unknown sampling scheme {scheme!r}")
    if mode not in BUDGET_MODES:
        raise InvalidBudgetRequest(f"Unknown budget mode {mode!r}")

    d_tau = kappa ** 2 / lam if scheme == PLAIN else d_hat
    if mode == COROLLARY:
        budget = 5 * d_tau * math.log(16 * d_hat / delta)
    else:
        budget = 12 * d_tau * math.log(d_hat / delta)
    return max(1, math.ceil(budget))


# How the feature count has to grow with n for the O(1/sqrt(n)) and
# fast rates, by sampling scheme and spectrum.
SCALING_RULES = {
    "constant": lambda n, r, gamma: 1.0,
    "loglog": lambda n, r, gamma: math.log(n) * math.log(max(math.log(n), math.e)),
    "n_half_r": lambda n, r, gamma: n ** (1 / (2 * r)),
    "n_half_r_loglog": lambda n, r, gamma: (
        n ** (1 / (2 * r)) * math.log(max(math.log(n), math.e))
    ),
    "n_half_r_log": lambda n, r, gamma: n ** (1 / (2 * r)) * math.log(n),
    "n_inv_r": lambda n, r, gamma: n ** (1 / r),
    "sqrt_n_log": lambda n, r, gamma: math.sqrt(n) * math.log(n),
    "n_quarter_gamma_r_log": lambda n, r, gamma: (
        n ** (1 / (4 * gamma * r)) * math.log(n)
    ),
}


def feature_scaling(rule, n, r=1.0, gamma=1.0, c=1.0):
    """ceil(c * rule(n)) for one of the SCALING_RULES, at least 1."""
    try:
        growth = SCALING_RULES[rule]
    except KeyError:
        raise InvalidBudgetRequest(f"Unknown scaling rule {rule!r}")
    return max(1, math.ceil(c * growth(n, r, gamma)))


def risk_bound(n, lam, r, R, M=1.0, r_star=None, delta=None):
    """Constant-free excess-risk bound.

    Without r_star: 2 M R lambda^r + 1/sqrt(n).
    With r_star (and delta): 2 M R lambda^r + r_star + ln(1/delta)/n.
    """
    approximation = 2 * M * R * lam ** r
    if r_star is None:
        return approximation + 1 / math.sqrt(n)
    if delta is None or not 0 < delta < 1:
        raise InvalidBudgetRequest(f"delta must be in (0, 1), not {delta}")
    return approximation + r_star + math.log(1 / delta) / n


