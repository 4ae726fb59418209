# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

import logging

import numpy as np
from scipy import linalg

from rffbench.base.utils import as_matrix, check_symmetric, clamped_eigh, get_executor
from rffbench.erm.solvers import empirical_risk, zero_one_risk
from rffbench.kernels.core import DimensionMismatch, gram_matrix
from rffbench.kernels.leverage import build_profile
from rffbench.kernels.sampler import (
    PLAIN,
    build_plain,
    build_weighted,
    default_pool_size,
    feature_matrix,
)


logger = logging.getLogger("rffbench")


class EmptyHoldout(ValueError):
    """Happens when there is no holdout data to measure a risk on."""


def operator_approx_error(K, K_approx, lam):
    """Spectral norm of (K/n + lam I)^-1/2 ((K_approx - K)/n) (K/n + lam I)^-1/2."""
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, not {lam}")
    K = check_symmetric(K)
    K_approx = check_symmetric(K_approx, name="K_approx")
    if K.shape != K_approx.shape:
        raise DimensionMismatch(f"K is {K.shape} but K_approx is {K_approx.shape}")
    n = K.shape[0]
    w, U = clamped_eigh(K / n)
    inv_sqrt = (U / np.sqrt(w + lam)) @ U.T
    middle = inv_sqrt @ ((K_approx - K) / n) @ inv_sqrt
    eigenvalues = linalg.eigvalsh((middle + middle.T) / 2)
    return float(np.max(np.abs(eigenvalues)))


def approximate_target(Phi, f_vals, lam):
    """Best approximation of f in the span of the random features:

        min_beta (1/n) |Phi beta - f|^2 + lam |beta|^2

    Returns (beta, l2_error) with l2_error = sqrt((1/n) |Phi beta - f|^2).
    """
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, not {lam}")
    Phi = as_matrix(Phi, name="Phi")
    f_vals = np.asarray(f_vals, dtype=float).ravel()
    n, s = Phi.shape
    if f_vals.shape[0] != n:
        raise DimensionMismatch(f"{f_vals.shape[0]} target values for {n} rows")
    A = Phi.T @ Phi / n
    A[np.diag_indices(s)] += lam
    beta = linalg.solve(A, Phi.T @ f_vals / n, assume_a="pos")
    residual = Phi @ beta - f_vals
    return beta, float(np.sqrt(residual @ residual / n))


def excess_risk(model, inputs, y, baseline_risk, loss=None):
    """Holdout risk of the model minus the baseline. Zero-one risk by
    default, the surrogate risk of `loss` otherwise. Not clamped at 0."""
    y = np.asarray(y)
    if y.size == 0:
        raise EmptyHoldout("excess risk needs at least one holdout point")
    if loss is None:
        risk = zero_one_risk(model, inputs, y)
    else:
        risk = empirical_risk(model, inputs, y, loss=loss)
    return risk - baseline_risk


def operator_error_trials(spec, X, lam, s, trials, seed, scheme=PLAIN, workers=None):
    """operator_approx_error for `trials` independently seeded feature
    maps of size s. Values come back in trial order."""
    X = as_matrix(X)
    K = gram_matrix(spec, X)
    trial_seeds = [
        int(child.generate_state(1)[0])
        for child in np.random.SeedSequence(seed).spawn(trials)
    ]
    profile = None
    if scheme != PLAIN:
        profile = build_profile(spec, X, lam, default_pool_size(s), seed)

    def trial(trial_seed):
        if profile is None:
            feature_map = build_plain(spec, s, trial_seed)
        else:
            feature_map = build_weighted(spec, s, profile, trial_seed)
        Phi = feature_matrix(feature_map, X)
        return operator_approx_error(K, Phi @ Phi.T, lam)

    with get_executor(workers) as executor:
        errors = np.array(list(executor.map(trial, trial_seeds)))
    logger.debug(
        "%d operator error trials at s=%d: median %.4f max %.4f",
        trials,
        s,
        np.median(errors),
        errors.max(),
    )
    return errors
