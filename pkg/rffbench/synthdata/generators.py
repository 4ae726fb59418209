# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

"""
Synthetic classification problems with a known best-in-class target.

A large reference sample stands in for the input distribution. Its
normalized Gram matrix K/N = U M U' plays the integral operator, and a
target that meets the source condition with exponent r is built as

    f_H = U M^r U' g,   (1/N) |g|^2 = R^2.

Training and holdout sets are subsampled from the reference sample so
f_H, and with it the Bayes risk under Massart noise, is exactly known.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from rffbench.base.utils import as_matrix, clamped_eigh, sign
from rffbench.erm.losses import HINGE, get_loss
from rffbench.kernels.core import (
    GAUSSIAN,
    LAPLACIAN,
    LINEAR_FINITE_RANK,
    RADIAL_LAPLACIAN,
    KernelSpec,
    gram_matrix,
)
from rffbench.settings import settings


logger = logging.getLogger("rffbench")

MASSART = "massart"

FINITE_RANK = "finite_rank"
FINITE_SUPPORT = "finite_support"
EXPONENTIAL = "exponential"
POLYNOMIAL = "polynomial"

REGIMES = (FINITE_RANK, FINITE_SUPPORT, EXPONENTIAL, POLYNOMIAL)

GAUSSIAN_INPUTS = "gaussian"
SPHERE_INPUTS = "sphere"
UNIFORM_INPUTS = "uniform"
ATOM_INPUTS = "atoms"

INPUT_DISTRIBUTIONS = (GAUSSIAN_INPUTS, SPHERE_INPUTS, UNIFORM_INPUTS, ATOM_INPUTS)

DEFAULT_ATOMS = 5

# Log-log slope -> laplacian kernel on uniform inputs in [-1, 1]^d whose
# Gram spectrum decays like i^-gamma. The radial laplacian in d
# dimensions decays like i^-((d + 1) / d).
POLYNOMIAL_TUNING = {
    2.0: {"family": LAPLACIAN, "input_dim": 1, "bandwidth": 1.0},
    1.5: {"family": RADIAL_LAPLACIAN, "input_dim": 2, "bandwidth": 1.0},
    4 / 3: {"family": RADIAL_LAPLACIAN, "input_dim": 3, "bandwidth": 1.0},
}


class InvalidSourceCondition(ValueError):
    """Happens when r is outside [1/2, 1], R isn't positive or the
    reference sample is too small."""


class InvalidNoiseModel(ValueError):
    """Happens when the Massart margin isn't in (0, 1]."""


class UnsupportedRegime(ValueError):
    """Happens when a spectrum regime or input distribution is unknown."""


@dataclass(frozen=True)
class NoiseModel:
    margin: float
    kind: str = MASSART
    G: float = None

    def __post_init__(self):
        if self.kind != MASSART:
            raise InvalidNoiseModel(f"Unknown noise model {self.kind!r}")
        if not 0 < self.margin <= 1:
            raise InvalidNoiseModel(f"margin must be in (0, 1], not {self.margin}")

    @property
    def flip_probability(self):
        return (1 - self.margin) / 2

    @property
    def bayes_risk(self):
        """Zero-one risk of sign(f_H) under this noise."""
        return self.flip_probability


@dataclass(frozen=True, eq=False)
class SourceTarget:
    kernel: KernelSpec
    r: float
    R: float
    g_vals: np.ndarray
    f_vals: np.ndarray
    reference_X: np.ndarray

    @property
    def N(self):
        return self.reference_X.shape[0]


def sample_inputs(
    N, d, seed, distribution=GAUSSIAN_INPUTS, radius=None, atoms=DEFAULT_ATOMS
):
    """N points in R^d.

    gaussian  standard normal truncated at `radius` (rejection sampling)
    sphere    uniform on the unit sphere
    uniform   uniform on [-1, 1]^d
    atoms     uniform over `atoms` fixed standard normal points
    """
    if N < 1 or d < 1:
        raise ValueError(f"need N >= 1 and d >= 1, got N={N} d={d}")
    rng = np.random.default_rng(seed)
    if distribution == GAUSSIAN_INPUTS:
        radius = settings.INPUT_RADIUS if radius is None else radius
        X = rng.standard_normal((N, d))
        outside = np.linalg.norm(X, axis=1) > radius
        while outside.any():
            X[outside] = rng.standard_normal((int(outside.sum()), d))
            outside = np.linalg.norm(X, axis=1) > radius
        return X
    if distribution == SPHERE_INPUTS:
        X = rng.standard_normal((N, d))
        return X / np.linalg.norm(X, axis=1, keepdims=True)
    if distribution == UNIFORM_INPUTS:
        return rng.uniform(-1.0, 1.0, size=(N, d))
    if distribution == ATOM_INPUTS:
        if atoms < 1:
            raise ValueError(f"atoms must be >= 1, not {atoms}")
        support = rng.standard_normal((atoms, d))
        return support[rng.integers(atoms, size=N)]
    raise UnsupportedRegime(f"Unknown input distribution {distribution!r}")


def make_source_problem(spec, N, r, R, seed, X=None):
    """Build a target f_H = U M^r U' g on a reference sample of N points.

    Pass X to reuse a reference sample; otherwise standard gaussian
    inputs (truncated) are drawn.
    """
    if not 0.5 <= r <= 1:
        raise InvalidSourceCondition(f"r must be in [1/2, 1], not {r}")
    if not R > 0:
        raise InvalidSourceCondition(f"R must be > 0, not {R}")
    inputs_seed, g_seed = np.random.SeedSequence(seed).spawn(2)
    if X is None:
        if N < 2:
            raise InvalidSourceCondition(f"N must be >= 2, not {N}")
        X = sample_inputs(N, spec.input_dim, inputs_seed)
    else:
        X = as_matrix(X)
        N = X.shape[0]
        if N < 2:
            raise InvalidSourceCondition(f"N must be >= 2, not {N}")

    w, U = clamped_eigh(gram_matrix(spec, X) / N)
    rng = np.random.default_rng(g_seed)
    g = rng.standard_normal(N)
    g *= R / np.sqrt(np.mean(g ** 2))
    f = U @ (w ** r * (U.T @ g))
    logger.debug("Source target on N=%d, r=%g, R=%g", N, r, R)
    return SourceTarget(kernel=spec, r=r, R=R, g_vals=g, f_vals=f, reference_X=X)


def label(target, noise, indices, seed):
    """sign(f_H) at the given reference points, each flipped
    independently with probability (1 - margin) / 2."""
    indices = np.asarray(indices, dtype=int)
    if indices.size and (indices.min() < 0 or indices.max() >= target.N):
        raise IndexError(f"indices must be within the {target.N} reference points")
    rng = np.random.default_rng(seed)
    y = sign(target.f_vals[indices])
    flips = rng.random(indices.shape[0]) < noise.flip_probability
    y[flips] *= -1
    return y


def polynomial_tuning(gamma):
    """The POLYNOMIAL_TUNING entry for gamma, matched to 3 decimals so
    4/3 can be written as 1.333."""
    for slope, tuning in POLYNOMIAL_TUNING.items():
        if math.isclose(slope, float(gamma), abs_tol=5e-4):
            return tuning
    choices = ", ".join(f"{slope:.4g}" for slope in sorted(POLYNOMIAL_TUNING))
    raise UnsupportedRegime(
        f"No polynomial regime for gamma={gamma}, choose one of {choices}"
    )


def make_spectrum_regime(regime, N, d=None, seed=0, gamma=2.0, atoms=DEFAULT_ATOMS):
    """A (kernel, inputs) pair whose Gram spectrum falls in `regime`.

    finite_rank     linear kernel on the unit sphere of R^d, rank d
    finite_support  gaussian kernel on `atoms` points, rank `atoms`
    exponential     gaussian kernel on truncated gaussian inputs (d=1)
    polynomial      laplacian kernel on uniform inputs, slope -gamma
                    (see POLYNOMIAL_TUNING)
    """
    if regime == FINITE_RANK:
        d = settings.INPUT_DIM if d is None else d
        spec = KernelSpec(LINEAR_FINITE_RANK, input_dim=d)
        return spec, sample_inputs(N, d, seed, distribution=SPHERE_INPUTS)
    if regime == FINITE_SUPPORT:
        d = settings.INPUT_DIM if d is None else d
        spec = KernelSpec(GAUSSIAN, bandwidth=1.0, input_dim=d)
        return spec, sample_inputs(N, d, seed, distribution=ATOM_INPUTS, atoms=atoms)
    if regime == EXPONENTIAL:
        d = 1 if d is None else d
        spec = KernelSpec(GAUSSIAN, bandwidth=1.0, input_dim=d)
        return spec, sample_inputs(N, d, seed, distribution=GAUSSIAN_INPUTS)
    if regime == POLYNOMIAL:
        spec = KernelSpec(**polynomial_tuning(gamma))
        return spec, sample_inputs(
            N, spec.input_dim, seed, distribution=UNIFORM_INPUTS
        )
    raise UnsupportedRegime(f"Unknown spectrum regime {regime!r}")


def bayes_surrogate_risk(loss, noise):
    """Smallest achievable surrogate risk when P(Y = sign f_H | x) =
    (1 + margin) / 2 everywhere."""
    loss = get_loss(loss)
    if loss.kind == HINGE:
        return 1 - noise.margin
    p = (1 + noise.margin) / 2
    if p >= 1:
        return 0.0
    return -(p * math.log(p) + (1 - p) * math.log(1 - p))


def write_dataset_csv(path, X, y, f_vals=None):
    X = as_matrix(X)
    frame = pd.DataFrame(X, columns=[f"x{i}" for i in range(X.shape[1])])
    frame["label"] = np.asarray(y, dtype=int)
    if f_vals is not None:
        frame["f_H"] = np.asarray(f_vals, dtype=float)
    frame.to_csv(path, index=False, float_format="%.17g")


def read_dataset_csv(path):
    """Read (X, y, f_vals) from a CSV with a `label` column. Every other
    column except `f_H` is a feature. f_vals is None without `f_H`."""
    frame = pd.read_csv(path)
    if "label" not in frame.columns:
        raise ValueError(f"{path} has no 'label' column")
    f_vals = frame["f_H"].to_numpy(dtype=float) if "f_H" in frame.columns else None
    features = frame.drop(columns=[c for c in ("label", "f_H") if c in frame.columns])
    return features.to_numpy(dtype=float), frame["label"].to_numpy(dtype=int), f_vals
