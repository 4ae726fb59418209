# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

import math

import numpy as np
import pytest

from rffbench.base.utils import sign
from rffbench.diagnostics.spectrum import (
    EXPONENTIAL,
    FINITE_RANK,
    POLYNOMIAL,
    gram_spectrum,
)
from rffbench.erm.losses import HINGE, LOGISTIC
from rffbench.kernels.core import (
    GAUSSIAN,
    LAPLACIAN,
    LINEAR_FINITE_RANK,
    RADIAL_LAPLACIAN,
    KernelSpec,
    gram_matrix,
)
from rffbench.synthdata import generators
from rffbench.synthdata.generators import (
    InvalidNoiseModel,
    InvalidSourceCondition,
    NoiseModel,
    UnsupportedRegime,
    bayes_surrogate_risk,
    label,
    make_source_problem,
    make_spectrum_regime,
    polynomial_tuning,
    read_dataset_csv,
    sample_inputs,
    write_dataset_csv,
)


SPEC = KernelSpec(GAUSSIAN, bandwidth=1.0, input_dim=3)


def test_sample_inputs_distributions(settings):
    settings.INPUT_RADIUS = 1.5
    X = sample_inputs(500, 3, 0)
    assert X.shape == (500, 3)
    assert np.all(np.linalg.norm(X, axis=1) <= 1.5)

    X = sample_inputs(100, 4, 1, distribution=generators.SPHERE_INPUTS)
    assert np.allclose(np.linalg.norm(X, axis=1), 1.0)

    X = sample_inputs(100, 2, 2, distribution=generators.UNIFORM_INPUTS)
    assert X.min() >= -1 and X.max() <= 1

    X = sample_inputs(100, 2, 3, distribution=generators.ATOM_INPUTS, atoms=4)
    assert len(np.unique(X, axis=0)) <= 4


def test_sample_inputs_unknown_distribution():
    with pytest.raises(UnsupportedRegime):
        sample_inputs(10, 1, 0, distribution="cauchy")


def test_source_problem_with_identity_operator():
    # The linear kernel on N * I gives K/N = I, so f_H = g for any r.
    N = 4
    spec = KernelSpec(LINEAR_FINITE_RANK, input_dim=N)
    X = N * np.eye(N)
    for r in (0.5, 0.75, 1.0):
        target = make_source_problem(spec, N, r, 2.0, 0, X=X)
        assert np.allclose(target.f_vals, target.g_vals, atol=1e-12)


def test_source_problem_normalization():
    target = make_source_problem(SPEC, 50, 0.5, 3.0, 1)
    assert np.mean(target.g_vals ** 2) == pytest.approx(9.0, abs=1e-12)
    assert target.N == 50
    assert target.reference_X.shape == (50, 3)


def test_source_problem_rkhs_norm():
    spec = KernelSpec(GAUSSIAN, bandwidth=1.0, input_dim=3)
    X = sample_inputs(20, 3, 4, distribution=generators.UNIFORM_INPUTS) * 3
    target = make_source_problem(spec, 20, 0.5, 1.5, 2, X=X)
    operator = gram_matrix(spec, X) / 20
    norm_sq = target.f_vals @ np.linalg.solve(operator, target.f_vals) / 20
    assert norm_sq == pytest.approx(1.5 ** 2, rel=1e-6)


def test_source_problem_operator_power():
    target = make_source_problem(SPEC, 40, 1.0, 1.0, 3)
    operator = gram_matrix(SPEC, target.reference_X) / 40
    assert np.allclose(target.f_vals, operator @ target.g_vals, atol=1e-8)


def test_source_problem_is_deterministic():
    first = make_source_problem(SPEC, 30, 0.75, 1.0, 9)
    second = make_source_problem(SPEC, 30, 0.75, 1.0, 9)
    assert np.array_equal(first.f_vals, second.f_vals)
    assert np.array_equal(first.reference_X, second.reference_X)


@pytest.mark.parametrize("r, R", [(0.4, 1.0), (1.1, 1.0), (0.5, 0.0)])
def test_source_problem_invalid(r, R):
    with pytest.raises(InvalidSourceCondition):
        make_source_problem(SPEC, 10, r, R, 0)


def test_noise_model():
    noise = NoiseModel(0.8)
    assert noise.flip_probability == pytest.approx(0.1)
    assert noise.bayes_risk == pytest.approx(0.1)
    with pytest.raises(InvalidNoiseModel):
        NoiseModel(0.0)
    with pytest.raises(InvalidNoiseModel):
        NoiseModel(1.2)
    with pytest.raises(InvalidNoiseModel):
        NoiseModel(0.5, kind="tsybakov")


def test_noiseless_labels_are_the_bayes_classifier():
    target = make_source_problem(SPEC, 100, 1.0, 1.0, 5)
    y = label(target, NoiseModel(1.0), np.arange(100), 0)
    assert np.array_equal(y, sign(target.f_vals))


def test_flip_rate():
    target = make_source_problem(SPEC, 10, 1.0, 1.0, 6)
    indices = np.zeros(100000, dtype=int)
    y = label(target, NoiseModel(0.6), indices, 1)
    flipped = np.mean(y != sign(target.f_vals[0]))
    assert flipped == pytest.approx(0.2, abs=0.004)


def test_bayes_risk_on_a_holdout():
    target = make_source_problem(SPEC, 1000, 1.0, 1.0, 7)
    noise = NoiseModel(0.6)
    indices = np.random.default_rng(0).integers(1000, size=100000)
    y = label(target, noise, indices, 2)
    risk = np.mean(y != sign(target.f_vals[indices]))
    assert risk == pytest.approx(noise.bayes_risk, abs=0.005)


def test_label_is_deterministic_and_checks_indices():
    target = make_source_problem(SPEC, 20, 1.0, 1.0, 8)
    noise = NoiseModel(0.5)
    assert np.array_equal(
        label(target, noise, np.arange(20), 3), label(target, noise, np.arange(20), 3)
    )
    with pytest.raises(IndexError):
        label(target, noise, [20], 3)


def test_finite_rank_regime():
    spec, X = make_spectrum_regime("finite_rank", 200, d=5, seed=0)
    assert spec.family == LINEAR_FINITE_RANK
    report = gram_spectrum(gram_matrix(spec, X))
    assert report.decay_class == FINITE_RANK
    assert report.decay_param == 5


def test_finite_support_regime():
    spec, X = make_spectrum_regime("finite_support", 300, d=3, seed=1, atoms=5)
    assert spec.family == GAUSSIAN
    report = gram_spectrum(gram_matrix(spec, X))
    assert report.decay_class == FINITE_RANK
    assert report.decay_param == 5


def test_exponential_regime():
    spec, X = make_spectrum_regime("exponential", 400, seed=2)
    report = gram_spectrum(gram_matrix(spec, X))
    assert report.decay_class == EXPONENTIAL
    assert report.fit_r2 >= 0.98


def test_polynomial_regime():
    spec, X = make_spectrum_regime("polynomial", 400, seed=3, gamma=2.0)
    assert spec.family == LAPLACIAN
    report = gram_spectrum(gram_matrix(spec, X))
    assert report.decay_class == POLYNOMIAL
    assert report.decay_param == pytest.approx(2.0, rel=0.2)


@pytest.mark.parametrize(
    "gamma, family, input_dim",
    [(2.0, LAPLACIAN, 1), (1.5, RADIAL_LAPLACIAN, 2), (1.333, RADIAL_LAPLACIAN, 3)],
)
def test_polynomial_regime_tuning(gamma, family, input_dim):
    spec, X = make_spectrum_regime("polynomial", 50, seed=0, gamma=gamma)
    assert spec.family == family
    assert spec.input_dim == input_dim
    assert X.shape == (50, input_dim)
    assert np.all(np.abs(X) <= 1)
    assert polynomial_tuning(4 / 3) == polynomial_tuning(1.3333)


@pytest.mark.slow
@pytest.mark.parametrize("gamma", [1.5, 4 / 3])
def test_polynomial_regime_slope_in_higher_dimensions(gamma):
    spec, X = make_spectrum_regime("polynomial", 400, seed=5, gamma=gamma)
    report = gram_spectrum(gram_matrix(spec, X))
    assert report.decay_class == POLYNOMIAL
    assert report.decay_param == pytest.approx(gamma, rel=0.2)


def test_unsupported_regimes():
    with pytest.raises(UnsupportedRegime):
        make_spectrum_regime("polynomial", 10, gamma=3.5)
    with pytest.raises(UnsupportedRegime):
        make_spectrum_regime("logarithmic", 10)


@pytest.mark.slow
@pytest.mark.parametrize(
    "regime, expected",
    [("exponential", EXPONENTIAL), ("polynomial", POLYNOMIAL)],
)
def test_regimes_are_reproducible_across_seeds(regime, expected):
    matches = 0
    for seed in range(20):
        spec, X = make_spectrum_regime(regime, 400, seed=seed)
        matches += gram_spectrum(gram_matrix(spec, X)).decay_class == expected
    assert matches >= 18


def test_bayes_surrogate_risk():
    assert bayes_surrogate_risk(HINGE, NoiseModel(0.6)) == pytest.approx(0.4)
    assert bayes_surrogate_risk(LOGISTIC, NoiseModel(1.0)) == 0.0
    expected = -(0.8 * math.log(0.8) + 0.2 * math.log(0.2))
    assert bayes_surrogate_risk(LOGISTIC, NoiseModel(0.6)) == pytest.approx(expected)


def test_dataset_csv(tmpdir):
    X = np.array([[0.1, -2.0], [1.0 / 3, 4.5]])
    path = str(tmpdir.join("data.csv"))
    write_dataset_csv(path, X, [1, -1], f_vals=[0.25, -0.5])
    X_read, y, f_vals = read_dataset_csv(path)
    assert np.array_equal(X_read, X)
    assert list(y) == [1, -1]
    assert list(f_vals) == [0.25, -0.5]

    write_dataset_csv(path, X, [1, -1])
    assert read_dataset_csv(path)[2] is None


def test_dataset_csv_needs_labels(tmpdir):
    path = tmpdir.join("data.csv")
    path.write("x0,x1\n1,2\n")
    with pytest.raises(ValueError):
        read_dataset_csv(str(path))
