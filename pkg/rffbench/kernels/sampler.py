# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

import logging
from dataclasses import dataclass

import numpy as np
import ujson as json

from rffbench.base.utils import as_matrix, as_vector
from rffbench.kernels.core import (
    COSINE_KAPPA,
    DimensionMismatch,
    Frequency,
    KernelSpec,
    spectral_sample_arrays,
)
from rffbench.settings import settings


logger = logging.getLogger("rffbench")

PLAIN = "plain"
WEIGHTED = "weighted"

SCHEMES = (PLAIN, WEIGHTED)


class InvalidFeatureMap(ValueError):
    """Happens when a feature map's arrays don't line up or its weights
    aren't finite and positive."""


class DegenerateProfile(ValueError):
    """Happens when a leverage profile has nothing to sample from."""


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class RandomFeatureMap:
    """The map x -> (1/sqrt(s)) [w_1 psi(v_1, x), ..., w_s psi(v_s, x)].

    Immutable; the arrays are flagged read-only.
    """

    kernel: KernelSpec
    omegas: np.ndarray
    phases: np.ndarray
    weights: np.ndarray
    scheme: str = PLAIN
    seed: int = None

    def __post_init__(self):
        self.kernel.require_spectral()
        omegas = _frozen(np.atleast_2d(self.omegas))
        phases = _frozen(np.ravel(self.phases))
        weights = _frozen(np.ravel(self.weights))
        s = omegas.shape[0]
        if s < 1 or phases.shape[0] != s or weights.shape[0] != s:
            raise InvalidFeatureMap(
                f"{s} frequencies, {phases.shape[0]} phases and "
                f"{weights.shape[0]} weights don't line up"
            )
        if omegas.shape[1] != self.kernel.input_dim:
            raise InvalidFeatureMap(
                f"frequencies have dimension {omegas.shape[1]}, "
                f"the kernel expects {self.kernel.input_dim}"
            )
        if self.scheme not in SCHEMES:
            raise InvalidFeatureMap(f"Unknown sampling scheme {self.scheme!r}")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise InvalidFeatureMap("weights must be finite and > 0")
        if self.scheme == PLAIN and np.any(weights != 1.0):
            raise InvalidFeatureMap("a plain feature map has unit weights")
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "weights", weights)

    @property
    def s(self):
        return self.omegas.shape[0]

    @property
    def frequencies(self):
        return [
            Frequency(tuple(omega), float(phase))
            for omega, phase in zip(self.omegas, self.phases)
        ]

    def to_dict(self):
        return {
            "kernel": self.kernel.to_dict(),
            "s": self.s,
            "scheme": self.scheme,
            "frequencies": self.omegas.tolist(),
            "phases": self.phases.tolist(),
            "weights": self.weights.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        feature_map = cls(
            kernel=KernelSpec.from_dict(data["kernel"]),
            omegas=data["frequencies"],
            phases=data["phases"],
            weights=data["weights"],
            scheme=data["scheme"],
            seed=data.get("seed"),
        )
        if feature_map.s != data["s"]:
            raise InvalidFeatureMap(f"s={data['s']} but {feature_map.s} frequencies")
        return feature_map

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def save_feature_map(feature_map, path):
    with open(path, "w") as f:
        f.write(feature_map.to_json())


def load_feature_map(path):
    with open(path) as f:
        return RandomFeatureMap.from_json(f.read())


def default_pool_size(s):
    return max(settings.POOL_OVERSAMPLING * s, settings.POOL_MIN_SIZE)


def build_plain(spec, s, seed):
    if s < 1:
        raise ValueError(f"s must be >= 1, not {s}")
    omegas, phases = spectral_sample_arrays(spec, s, seed)
    return RandomFeatureMap(
        kernel=spec,
        omegas=omegas,
        phases=phases,
        weights=np.ones(s),
        scheme=PLAIN,
        seed=seed,
    )


def build_weighted(spec, s, profile, seed):
    """Resample s atoms from the profile's pool with probability
    proportional to their leverage ratio tau / p, and give each the
    importance weight sqrt(p / q_hat) = sqrt(sum(ratio) / (m * ratio_j)).

    The pool is already a draw from p, so resampling by tau / p makes the
    atoms approximately distributed as tau / d(lambda). Averaged over the
    resampling, weight^2 * psi * psi reproduces the plain estimate on the
    pool.
    """
    if s < 1:
        raise ValueError(f"s must be >= 1, not {s}")
    ratios = np.asarray(profile.ratios, dtype=float)
    m = ratios.shape[0]
    total = float(ratios.sum()) if m else 0.0
    if m == 0 or not total > 0:
        raise DegenerateProfile("The leverage profile has no positive mass")
    rng = np.random.default_rng(seed)
    picked = rng.choice(m, size=s, replace=True, p=ratios / total)
    weights = np.sqrt(total / (m * ratios[picked]))
    logger.debug(
        "Resampled %d of %d pool atoms (%d distinct)", s, m, len(np.unique(picked))
    )
    return RandomFeatureMap(
        kernel=spec,
        omegas=profile.omegas[picked],
        phases=profile.phases[picked],
        weights=weights,
        scheme=WEIGHTED,
        seed=seed,
    )


def feature_matrix(feature_map, X):
    """The n x s matrix whose i-th row is phi(x_i)."""
    X = as_matrix(X)
    if X.shape[1] != feature_map.kernel.input_dim:
        raise DimensionMismatch(
            f"X has dimension {X.shape[1]}, "
            f"the feature map expects {feature_map.kernel.input_dim}"
        )
    projections = X @ feature_map.omegas.T + feature_map.phases
    scale = feature_map.weights * (COSINE_KAPPA / np.sqrt(feature_map.s))
    return np.cos(projections) * scale


def approx_kernel(feature_map, x, y):
    d = feature_map.kernel.input_dim
    x = as_vector(x, name="x")
    y = as_vector(y, name="y")
    if x.shape[0] != d or y.shape[0] != d:
        raise DimensionMismatch(f"x and y must both have dimension {d}")
    phi = feature_matrix(feature_map, np.vstack([x, y]))
    return float((phi @ phi.T)[0, 1])
