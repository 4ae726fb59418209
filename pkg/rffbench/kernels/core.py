# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

"""
Shift-invariant kernels, their spectral densities and the bounded
random cosine feature

    psi(v, x) = sqrt(2) * cos(omega . x + b)

with v = (omega, b), omega drawn from the kernel's spectral density and
b uniform on [0, 2*pi). Averaging psi(v, x) * psi(v, y) over v gives
back k(x, y).
"""

import logging
import math
from dataclasses import dataclass

import markus
import numpy as np
from scipy import stats
from scipy.spatial.distance import cdist

from rffbench.base.utils import as_matrix, as_vector


logger = logging.getLogger("rffbench")
metrics = markus.get_metrics("rffbench")

GAUSSIAN = "gaussian"
LAPLACIAN = "laplacian"
RADIAL_LAPLACIAN = "radial-laplacian"
LINEAR_FINITE_RANK = "linear-finite-rank"

FAMILIES = (GAUSSIAN, LAPLACIAN, RADIAL_LAPLACIAN, LINEAR_FINITE_RANK)

# Families with a spectral density, i.e. with random Fourier features.
SPECTRAL_FAMILIES = (GAUSSIAN, LAPLACIAN, RADIAL_LAPLACIAN)

COSINE_KAPPA = math.sqrt(2)

TWO_PI = 2 * math.pi


class InvalidKernelSpec(ValueError):
    """Happens when a kernel has an unknown family or bad parameters."""


class UnsupportedKernelFamily(ValueError):
    """Happens when an operation needs a spectral density the kernel
    family doesn't have."""


class DimensionMismatch(ValueError):
    """Happens when inputs don't have the kernel's input dimension."""


@dataclass(frozen=True)
class KernelSpec:
    family: str
    bandwidth: float = 1.0
    input_dim: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidKernelSpec(f"Unknown kernel family {self.family!r}")
        if not self.bandwidth > 0:
            raise InvalidKernelSpec(f"bandwidth must be > 0, not {self.bandwidth}")
        if int(self.input_dim) != self.input_dim or self.input_dim < 1:
            raise InvalidKernelSpec(f"input_dim must be >= 1, not {self.input_dim}")

    @property
    def kappa(self):
        """Uniform bound on |psi(v, x)|."""
        if self.family == LINEAR_FINITE_RANK:
            return 1.0
        return COSINE_KAPPA

    @property
    def has_spectral_density(self):
        return self.family in SPECTRAL_FAMILIES

    def require_spectral(self):
        if not self.has_spectral_density:
            raise UnsupportedKernelFamily(
                f"The {self.family} kernel has no spectral density"
            )

    def to_dict(self):
        return {
            "family": self.family,
            "bandwidth": self.bandwidth,
            "input_dim": self.input_dim,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            family=data["family"],
            bandwidth=float(data["bandwidth"]),
            input_dim=int(data["input_dim"]),
        )


@dataclass(frozen=True)
class Frequency:
    omega: tuple
    phase: float

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))
        if not 0 <= self.phase < TWO_PI:
            raise InvalidKernelSpec(f"phase {self.phase} is outside [0, 2pi)")

    @property
    def omega_array(self):
        return np.array(self.omega, dtype=float)


def _check_point(spec, x, name):
    x = as_vector(x, name=name)
    if x.shape[0] != spec.input_dim:
        raise DimensionMismatch(
            f"{name} has dimension {x.shape[0]}, the kernel expects {spec.input_dim}"
        )
    return x


def _check_points(spec, X, name="X"):
    X = as_matrix(X, name=name)
    if X.shape[1] != spec.input_dim:
        raise DimensionMismatch(
            f"{name} has dimension {X.shape[1]}, the kernel expects {spec.input_dim}"
        )
    return X


def kernel_eval(spec, x, y):
    x = _check_point(spec, x, "x")
    y = _check_point(spec, y, "y")
    if spec.family == GAUSSIAN:
        return math.exp(-np.sum((x - y) ** 2) / (2 * spec.bandwidth ** 2))
    if spec.family == LAPLACIAN:
        return math.exp(-np.sum(np.abs(x - y)) / spec.bandwidth)
    if spec.family == RADIAL_LAPLACIAN:
        return math.exp(-float(np.linalg.norm(x - y)) / spec.bandwidth)
    return float(np.dot(x, y)) / spec.input_dim


@metrics.timer_decorator("gram_matrix")
def gram_matrix(spec, X, Y=None):
    """Exact kernel matrix between the rows of X (and Y, if given; the
    cross matrix is what prediction with a kernel model needs)."""
    X = _check_points(spec, X)
    Y = X if Y is None else _check_points(spec, Y, name="Y")
    if spec.family == GAUSSIAN:
        K = np.exp(-cdist(X, Y, "sqeuclidean") / (2 * spec.bandwidth ** 2))
    elif spec.family == LAPLACIAN:
        K = np.exp(-cdist(X, Y, "cityblock") / spec.bandwidth)
    elif spec.family == RADIAL_LAPLACIAN:
        K = np.exp(-cdist(X, Y, "euclidean") / spec.bandwidth)
    else:
        K = X @ Y.T / spec.input_dim
    if Y is X:
        K = (K + K.T) / 2
    return K


def feature_values(spec, omegas, phases, X):
    """psi(v_j, x_i) for every point and every atom, as an n x m array."""
    spec.require_spectral()
    X = _check_points(spec, X)
    return COSINE_KAPPA * np.cos(X @ np.asarray(omegas).T + np.asarray(phases))


def feature_eval(spec, f, x):
    spec.require_spectral()
    x = _check_point(spec, x, "x")
    if len(f.omega) != spec.input_dim:
        raise DimensionMismatch(
            f"frequency has dimension {len(f.omega)}, "
            f"the kernel expects {spec.input_dim}"
        )
    return COSINE_KAPPA * math.cos(float(np.dot(f.omega_array, x)) + f.phase)


def spectral_sample_arrays(spec, count, seed):
    """Draw `count` frequencies as (omegas, phases) arrays of shape
    (count, d) and (count,)."""
    spec.require_spectral()
    if count < 1:
        raise ValueError(f"count must be >= 1, not {count}")
    rng = np.random.default_rng(seed)
    scale = 1.0 / spec.bandwidth
    shape = (count, spec.input_dim)
    if spec.family == GAUSSIAN:
        omegas = rng.normal(0.0, scale, size=shape)
    elif spec.family == RADIAL_LAPLACIAN:
        # Multivariate Cauchy: a gaussian over one shared |gaussian|
        shared = np.abs(rng.standard_normal(size=(count, 1)))
        omegas = scale * rng.standard_normal(size=shape) / shared
    else:
        omegas = scale * rng.standard_cauchy(size=shape)
    phases = rng.uniform(0.0, TWO_PI, size=count)
    # uniform() can round up to the open end of the interval
    phases[phases >= TWO_PI] = 0.0
    return omegas, phases


def spectral_sample(spec, count, seed):
    omegas, phases = spectral_sample_arrays(spec, count, seed)
    return [
        Frequency(tuple(omega), float(phase)) for omega, phase in zip(omegas, phases)
    ]


def spectral_density_batch(spec, omegas):
    """p(omega) for each row of `omegas`. The uniform phase factor
    1/(2pi) is left out, it cancels in every ratio p/q."""
    spec.require_spectral()
    omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
    if omegas.shape[1] != spec.input_dim:
        raise DimensionMismatch(
            f"omegas have dimension {omegas.shape[1]}, "
            f"the kernel expects {spec.input_dim}"
        )
    scale = 1.0 / spec.bandwidth
    if spec.family == RADIAL_LAPLACIAN:
        d = spec.input_dim
        cauchy = stats.multivariate_t(np.zeros(d), np.eye(d) * scale ** 2, df=1)
        return np.atleast_1d(cauchy.pdf(omegas))
    if spec.family == GAUSSIAN:
        densities = stats.norm.pdf(omegas, loc=0.0, scale=scale)
    else:
        densities = stats.cauchy.pdf(omegas, loc=0.0, scale=scale)
    return np.prod(densities, axis=1)


def spectral_density(spec, f):
    return float(spectral_density_batch(spec, f.omega_array[np.newaxis, :])[0])
