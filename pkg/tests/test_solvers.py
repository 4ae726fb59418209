# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st
from markus import TIMING

from rffbench.erm.losses import HINGE, LOGISTIC, Loss
from rffbench.erm.solvers import (
    FEATURE,
    GAP_CHECK_EVERY,
    KERNEL,
    ConvergenceFailure,
    InvalidLabels,
    NonFiniteFeatures,
    SolverOptions,
    TrainedModel,
    classify,
    empirical_risk,
    predict,
    regularized_objective,
    train_kernel,
    train_rff,
    _Problem,
    zero_one_risk,
)
from rffbench.kernels.core import GAUSSIAN, DimensionMismatch, KernelSpec
from rffbench.kernels.sampler import build_plain, feature_matrix


def random_problem(seed, n=20, s=30, d=2):
    rng = np.random.default_rng(seed)
    spec = KernelSpec(GAUSSIAN, input_dim=d)
    X = rng.normal(size=(n, d))
    Phi = feature_matrix(build_plain(spec, s, seed), X)
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=n) >= 0, 1.0, -1.0)
    return Phi, y


def feature_model(beta, loss=HINGE):
    return TrainedModel(
        coefficients=np.asarray(beta, dtype=float),
        lam=1.0,
        loss=Loss(loss),
        representation=FEATURE,
        objective_value=0.0,
    )


def test_train_rff_example():
    model = train_rff([[1.0], [1.0]], [1, 1], HINGE, 1.0)
    assert model.coefficients[0] == pytest.approx(0.5, abs=1e-6)
    assert model.objective_value == pytest.approx(0.75, abs=1e-6)
    assert model.representation == FEATURE
    assert model.certificate <= 1e-6


def test_train_rff_huge_lambda():
    Phi, y = random_problem(1)
    for loss in (HINGE, LOGISTIC):
        model = train_rff(Phi, y, loss, 1e9)
        assert np.all(np.abs(model.coefficients) <= 1e-6)


def test_train_rff_logistic_separable_direction():
    Phi = np.array([[1.0], [2.0], [0.5]])
    model = train_rff(Phi, [1, 1, 1], LOGISTIC, 0.1)
    assert model.coefficients[0] > 0


def test_train_kernel_single_point():
    model = train_kernel([[1.0]], [1], HINGE, 1.0)
    assert model.representation == KERNEL
    assert model.coefficients[0] == pytest.approx(0.5, abs=1e-6)


def test_train_kernel_decoupled():
    # K = 2I: every point is its own problem, with alpha_i = y_i / 2
    y = np.array([1.0, -1.0, -1.0, 1.0])
    model = train_kernel(2 * np.eye(4), y, HINGE, 0.1)
    assert np.allclose(model.coefficients, y / 2, atol=1e-6)


@pytest.mark.parametrize("loss", [HINGE, LOGISTIC])
def test_feature_and_kernel_representations_agree(loss):
    Phi, y = random_problem(2)
    K = Phi @ Phi.T
    options = SolverOptions(tol=1e-10 if loss == HINGE else None)
    feature = train_rff(Phi, y, loss, 0.1, options)
    kernel = train_kernel(K, y, loss, 0.1, options)
    assert np.allclose(Phi @ feature.coefficients, K @ kernel.coefficients, atol=1e-4)
    assert feature.objective_value == pytest.approx(kernel.objective_value, abs=1e-5)


@pytest.mark.parametrize("loss", [HINGE, LOGISTIC])
def test_train_is_deterministic(loss):
    Phi, y = random_problem(3)
    first = train_rff(Phi, y, loss, 0.05)
    second = train_rff(Phi, y, loss, 0.05)
    assert np.array_equal(first.coefficients, second.coefficients)


@pytest.mark.parametrize("loss", [HINGE, LOGISTIC])
def test_grid_search_oracle_one_feature(loss):
    grid = np.linspace(-3, 3, 60001)
    for seed in range(10):
        Phi, y = random_problem(seed, n=10, s=1)
        lam = 0.5
        model = train_rff(Phi, y, loss, lam)
        values = Loss(loss).value(y[:, np.newaxis], np.outer(Phi[:, 0], grid))
        objectives = values.mean(axis=0) + lam * grid ** 2
        assert model.objective_value <= objectives.min() + 1e-6
        assert objectives.min() - model.objective_value <= 1e-3


@pytest.mark.parametrize("loss", [HINGE, LOGISTIC])
def test_grid_search_oracle_two_features(loss):
    axis = np.linspace(-2, 2, 801)
    b1, b2 = np.meshgrid(axis, axis)
    grid = np.column_stack([b1.ravel(), b2.ravel()])
    for seed in range(10):
        Phi, y = random_problem(100 + seed, n=10, s=2)
        lam = 0.5
        model = train_rff(Phi, y, loss, lam)
        margins = grid @ Phi.T
        values = Loss(loss).value(y, margins).mean(axis=1)
        objectives = values + lam * np.sum(grid ** 2, axis=1)
        assert model.objective_value <= objectives.min() + 1e-6
        assert objectives.min() - model.objective_value <= 1e-3


@hypothesis_settings(max_examples=20, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=10000),
    loss=st.sampled_from([HINGE, LOGISTIC]),
)
def test_small_perturbations_dont_improve_the_objective(seed, loss):
    Phi, y = random_problem(seed, n=10, s=3)
    lam = 0.2
    tol = 1e-10 if loss == HINGE else 1e-7
    model = train_rff(Phi, y, loss, lam, SolverOptions(tol=tol, max_iters=200000))
    rng = np.random.default_rng(seed)
    best = regularized_objective(Phi, y, loss, lam, model.coefficients)
    for _ in range(20):
        direction = rng.normal(size=3)
        direction *= 1e-3 / np.linalg.norm(direction)
        moved = regularized_objective(Phi, y, loss, lam, model.coefficients + direction)
        assert moved >= best - 1e-9


@pytest.mark.parametrize("loss", [HINGE, LOGISTIC])
def test_norm_constraint(loss):
    Phi, y = random_problem(5)
    free = train_rff(Phi, y, loss, 0.01)
    free_norm = free.coefficients @ free.coefficients
    radius_sq = free_norm / 4
    constrained = train_rff(
        Phi, y, loss, 0.01, SolverOptions(norm_constraint=radius_sq)
    )
    assert constrained.coefficients @ constrained.coefficients <= radius_sq + 1e-9
    assert constrained.objective_value >= free.objective_value - 1e-6
    assert constrained.norm_constraint == radius_sq


def test_inactive_norm_constraint():
    Phi, y = random_problem(6)
    free = train_rff(Phi, y, HINGE, 0.1)
    loose = train_rff(Phi, y, HINGE, 0.1, SolverOptions(norm_constraint=1e6))
    assert np.array_equal(free.coefficients, loose.coefficients)


def test_kernel_norm_constraint():
    Phi, y = random_problem(7)
    K = Phi @ Phi.T
    model = train_kernel(K, y, HINGE, 0.01, SolverOptions(norm_constraint=0.1))
    alpha = model.coefficients
    assert alpha @ K @ alpha <= 0.1 + 1e-9


def test_convergence_failure(metricsmock):
    Phi, y = random_problem(8)
    with pytest.raises(ConvergenceFailure) as exception:
        train_rff(Phi, y, HINGE, 0.01, SolverOptions(tol=1e-14, max_iters=1))
    model = exception.value.model
    assert isinstance(model, TrainedModel)
    assert model.iterations == 1
    assert model.certificate > 1e-14
    metricsmock.assert_incr(
        "rffbench.solver_convergence_failure",
        tags=["loss:hinge", "representation:feature"],
    )


def test_reference_mode(settings):
    settings.SOLVER_TOL = 1e-6
    settings.SOLVER_MAX_ITERS = 100
    assert SolverOptions(reference=True).resolved() == pytest.approx((1e-8, 1000))
    assert SolverOptions(tol=1e-3).resolved() == (1e-3, 100)


def test_train_rff_timed(metricsmock):
    train_rff([[1.0]], [1], LOGISTIC, 1.0)
    assert metricsmock.filter_records(TIMING, stat="rffbench.train_rff")


def test_invalid_labels():
    with pytest.raises(InvalidLabels):
        train_rff([[1.0], [0.5]], [1, 0], HINGE, 1.0)
    with pytest.raises(DimensionMismatch):
        train_rff([[1.0], [0.5]], [1], HINGE, 1.0)


def test_non_finite_features():
    with pytest.raises(NonFiniteFeatures):
        train_rff([[np.inf], [0.5]], [1, -1], HINGE, 1.0)
    with pytest.raises(NonFiniteFeatures):
        train_kernel([[np.nan]], [1], HINGE, 1.0)


def test_bad_lambda():
    with pytest.raises(ValueError):
        train_rff([[1.0]], [1], HINGE, 0.0)


def test_predict_and_classify():
    model = feature_model([0.0])
    assert predict(model, [[5.0]])[0] == 0.0
    assert classify(model, [[5.0]])[0] == 1
    model = feature_model([2.0])
    assert classify(model, [[-0.5]])[0] == -1
    with pytest.raises(DimensionMismatch):
        predict(model, [[1.0, 2.0]])


def test_empirical_risk_example():
    model = feature_model([1.0])
    inputs = [[2.0], [0.5], [-1.0]]
    assert empirical_risk(model, inputs, [1, 1, 1]) == pytest.approx(
        (0 + 0.5 + 2) / 3, abs=1e-12
    )


def test_zero_one_risk():
    model = feature_model([1.0])
    inputs = [[1.0], [2.0], [-3.0]]
    assert zero_one_risk(model, inputs, [-1, -1, 1]) == 1.0
    assert zero_one_risk(model, inputs, [1, 1, -1]) == 0.0


def test_trained_model_from_dict():
    model = train_rff([[1.0], [1.0]], [1, 1], HINGE, 1.0)
    loaded = TrainedModel.from_dict(model.to_dict())
    assert np.array_equal(loaded.coefficients, model.coefficients)
    assert loaded.loss == model.loss
    assert loaded.representation == FEATURE


@pytest.mark.parametrize("loss", [HINGE, LOGISTIC])
def test_train_kernel_huge_lambda(loss):
    Phi, y = random_problem(1)
    model = train_kernel(Phi @ Phi.T, y, loss, 1e9)
    assert np.all(np.abs(model.coefficients) <= 1e-6)
    assert model.certificate <= 1e-6


@pytest.mark.parametrize("lam", [1e3, 1e6, 1e9, 1e12])
def test_logistic_converges_for_any_large_lambda(lam):
    Phi, y = random_problem(9, n=20, s=3)
    model = train_rff(Phi, y, LOGISTIC, lam)
    assert model.certificate <= 1e-6
    assert np.all(np.abs(model.coefficients) <= 1.0 / lam)


def test_loss_curvature():
    Phi, y = random_problem(10, n=20, s=30)
    wide = _Problem(Phi, y, Loss(LOGISTIC), FEATURE)
    assert wide.loss_curvature == pytest.approx(
        np.linalg.norm(Phi, 2) ** 2 / 80, rel=1e-8
    )
    tall = _Problem(Phi[:, :5], y, Loss(LOGISTIC), FEATURE)
    assert tall.loss_curvature == pytest.approx(
        np.linalg.norm(Phi[:, :5], 2) ** 2 / 80, rel=1e-8
    )
    K = Phi @ Phi.T
    kernel = _Problem(K, y, Loss(LOGISTIC), KERNEL)
    assert kernel.loss_curvature == pytest.approx(wide.loss_curvature, rel=1e-8)


def test_hinge_gap_checked_on_schedule():
    Phi, y = random_problem(11)
    model = train_rff(Phi, y, HINGE, 0.01, SolverOptions(tol=1e-8))
    assert model.iterations % GAP_CHECK_EVERY == 0
    assert model.certificate <= 1e-8
    with pytest.raises(ConvergenceFailure) as exception:
        train_rff(Phi, y, HINGE, 0.001, SolverOptions(tol=1e-14, max_iters=13))
    assert exception.value.model.iterations == 13
    assert exception.value.model.certificate > 1e-14
