# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

"""
Regularized empirical risk minimization with a Lipschitz margin loss.

Two representations of the same problem:

    feature   min_beta  (1/n) sum l(y_i, phi_i' beta) + lambda |beta|^2
    kernel    min_alpha (1/n) sum l(y_i, (K alpha)_i) + lambda alpha' K alpha

Both solvers are deterministic and stop on a certificate:

* hinge: dual coordinate ascent, stopping once the duality gap
  (an upper bound on suboptimality) is below tol.
* logistic: accelerated gradient descent with the fixed step 1/L from
  the curvature bound of the loss, stopping once the gradient norm is
  below tol. In the kernel representation the gradient is taken in
  the RKHS, so the problem stays well conditioned when K is singular.

An optional norm constraint |beta|^2 <= R2 (alpha' K alpha <= R2) is
handled exactly: when the penalized optimum is outside the ball the
constrained optimum is the penalized optimum at lambda + nu, with the
multiplier nu found by bisection.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import markus
import numpy as np

from rffbench.base.utils import check_symmetric, sign, top_eigenvalue
from rffbench.erm.losses import HINGE, Loss, get_loss
from rffbench.kernels.core import DimensionMismatch
from rffbench.settings import settings


logger = logging.getLogger("rffbench")
metrics = markus.get_metrics("rffbench")

FEATURE = "feature"
KERNEL = "kernel"

REPRESENTATIONS = (FEATURE, KERNEL)

# The reference mode runs this many times more iterations with a tighter
# tolerance. Only tests use it, as an optimum oracle.
REFERENCE_ITERS_FACTOR = 10
REFERENCE_TOL_FACTOR = 1e-2

BISECTION_STEPS = 60

GAP_CHECK_EVERY = 10
SWEEP_ORDER_SEED = 0


class InvalidLabels(ValueError):
    """Happens when labels aren't all -1 or +1."""


class NonFiniteFeatures(ValueError):
    """Happens when the feature or kernel matrix has NaN or inf in it."""


class ConvergenceFailure(Exception):
    """Happens when the certificate doesn't get below tol within
    max_iters. The best iterate is on the `model` attribute."""

    def __init__(self, message, model):
        super().__init__(message)
        self.model = model


@dataclass(frozen=True, eq=False)
class TrainedModel:
    coefficients: np.ndarray
    lam: float
    loss: Loss
    representation: str
    objective_value: float
    norm_constraint: float = None
    certificate: float = None
    iterations: int = 0

    def to_dict(self):
        return {
            "coefficients": np.asarray(self.coefficients).tolist(),
            "lambda": self.lam,
            "loss": self.loss.to_dict(),
            "representation": self.representation,
            "objective_value": self.objective_value,
            "norm_constraint": self.norm_constraint,
            "certificate": self.certificate,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            coefficients=np.asarray(data["coefficients"], dtype=float),
            lam=float(data["lambda"]),
            loss=Loss.from_dict(data["loss"]),
            representation=data["representation"],
            objective_value=float(data["objective_value"]),
            norm_constraint=data.get("norm_constraint"),
            certificate=data.get("certificate"),
            iterations=int(data.get("iterations", 0)),
        )


@dataclass(frozen=True)
class SolverOptions:
    tol: float = None
    max_iters: int = None
    norm_constraint: float = None
    reference: bool = False

    def resolved(self):
        tol = settings.SOLVER_TOL if self.tol is None else self.tol
        max_iters = self.max_iters
        if max_iters is None:
            max_iters = settings.SOLVER_MAX_ITERS
        if self.reference:
            tol *= REFERENCE_TOL_FACTOR
            max_iters *= REFERENCE_ITERS_FACTOR
        return tol, max_iters


def _check_labels(y, n):
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != n:
        raise DimensionMismatch(f"{y.shape[0]} labels for {n} training points")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidLabels("labels must be -1 or +1")
    return y


def _check_finite(A, name):
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NonFiniteFeatures(f"{name} contains non-finite values")
    return A


def regularized_objective(A, y, loss, lam, coefficients, representation=FEATURE):
    """Evaluate the training objective from scratch. A is the feature
    matrix or the kernel matrix, depending on the representation."""
    loss = get_loss(loss)
    coefficients = np.asarray(coefficients, dtype=float)
    margins = A @ coefficients
    if representation == FEATURE:
        penalty = coefficients @ coefficients
    else:
        penalty = coefficients @ margins
    return float(np.mean(loss.value(y, margins)) + lam * penalty)


class _Problem:
    """One instance of the training problem in either representation."""

    def __init__(self, A, y, loss, representation):
        self.A = A
        self.y = y
        self.loss = loss
        self.representation = representation
        self.n = A.shape[0]
        if representation == FEATURE:
            self.sq_norms = np.einsum("ij,ij->i", A, A)
        else:
            self.sq_norms = np.diag(A).copy()

    def norm_sq(self, coefficients):
        if self.representation == FEATURE:
            return float(coefficients @ coefficients)
        return float(coefficients @ (self.A @ coefficients))

    def objective(self, coefficients, lam):
        return regularized_objective(
            self.A, self.y, self.loss, lam, coefficients, self.representation
        )

    @cached_property
    def loss_curvature(self):
        """Bound on the curvature of the averaged logistic loss, 1/4 times
        the top eigenvalue of Phi'Phi / n (of K / n, measured in the RKHS,
        for the kernel representation)."""
        A = self.A
        if self.representation == FEATURE:
            A = A.T @ A if A.shape[1] <= A.shape[0] else A @ A.T
        return top_eigenvalue(A) / (4.0 * self.n)

    def zero(self):
        size = self.A.shape[1] if self.representation == FEATURE else self.n
        return np.zeros(size)


def _hinge_dual_ascent(problem, lam, tol, max_iters, warm=None):
    """Dual coordinate ascent for the hinge loss, visiting the coordinates
    in a fresh permutation every sweep from a fixed seed.

    Dual variables a_i live in [0, 1]; the primal point is
    beta = sum_i a_i y_i phi_i / (2 lambda n) (alpha = a * y / (2 lambda n)
    for the kernel representation). The duality gap is checked every
    GAP_CHECK_EVERY sweeps and after the last one. Returns (coefficients,
    gap, sweeps, dual variables).
    """
    n, y, A = problem.n, problem.y, problem.A
    scale = 2.0 * lam * n
    a = np.zeros(n) if warm is None else warm.copy()
    feature = problem.representation == FEATURE
    if feature:
        beta = A.T @ (a * y) / scale
    else:
        margins = A @ (a * y) / scale
    order = np.random.default_rng(SWEEP_ORDER_SEED)
    coefficients = beta.copy() if feature else a * y / scale

    gap = np.inf
    sweeps = 0
    while sweeps < max_iters:
        sweeps += 1
        for i in order.permutation(n):
            margin_i = A[i] @ beta if feature else margins[i]
            q = problem.sq_norms[i]
            if q > 0:
                new = a[i] + (1.0 - y[i] * margin_i) * scale / q
                new = min(1.0, max(0.0, new))
            else:
                # A zero row always has margin 0, so the hinge is 1.
                new = 1.0
            delta = new - a[i]
            if delta != 0.0:
                a[i] = new
                if feature:
                    beta += (delta * y[i] / scale) * A[i]
                else:
                    # K is symmetric, so row i is column i.
                    margins += (delta * y[i] / scale) * A[i]

        if sweeps % GAP_CHECK_EVERY and sweeps < max_iters:
            continue
        if feature:
            coefficients = beta.copy()
            current = A @ coefficients
            norm_sq = float(coefficients @ coefficients)
        else:
            coefficients = a * y / scale
            margins = A @ coefficients
            current = margins
            norm_sq = float(coefficients @ margins)
        primal = float(np.mean(problem.loss.value(y, current))) + lam * norm_sq
        dual = np.mean(a) - lam * norm_sq
        gap = max(0.0, primal - dual)
        if gap <= tol:
            break
    return coefficients, gap, sweeps, a


def _logistic_descent(problem, lam, tol, max_iters, warm=None):
    """Accelerated gradient descent with the fixed step 1/L, where
    L = curvature of the loss term + 2 lambda and the momentum is set by
    the strong convexity 2 lambda. Returns (coefficients, gradient norm,
    iterations, coefficients)."""
    coefficients = problem.zero() if warm is None else warm.copy()
    feature = problem.representation == FEATURE
    A, y, loss, n = problem.A, problem.y, problem.loss, problem.n
    curvature = problem.loss_curvature + 2.0 * lam
    step = 1.0 / curvature
    ratio = np.sqrt(2.0 * lam / curvature)
    momentum = (1.0 - ratio) / (1.0 + ratio)

    previous = coefficients
    margins = A @ coefficients
    previous_margins = margins
    iterations = 0
    while True:
        derivative = loss.derivative(y, margins) / n
        if feature:
            direction = A.T @ derivative + 2 * lam * coefficients
            moved = A @ direction
            grad_sq = float(direction @ direction)
        else:
            direction = derivative + 2 * lam * coefficients
            moved = A @ direction
            grad_sq = float(direction @ moved)
        grad_norm = np.sqrt(max(grad_sq, 0.0))
        if grad_norm <= tol or iterations >= max_iters:
            break
        iterations += 1
        landed = coefficients - step * direction
        landed_margins = margins - step * moved
        coefficients = landed + momentum * (landed - previous)
        margins = landed_margins + momentum * (landed_margins - previous_margins)
        previous, previous_margins = landed, landed_margins
    return coefficients, grad_norm, iterations, coefficients


def _solve_penalized(problem, lam, tol, max_iters, warm=None):
    if problem.loss.kind == HINGE:
        return _hinge_dual_ascent(problem, lam, tol, max_iters, warm=warm)
    return _logistic_descent(problem, lam, tol, max_iters, warm=warm)


def _solve(problem, lam, options):
    tol, max_iters = options.resolved()
    coefficients, certificate, iterations, warm = _solve_penalized(
        problem, lam, tol, max_iters
    )
    radius_sq = options.norm_constraint
    if radius_sq is not None and problem.norm_sq(coefficients) > radius_sq:
        coefficients, certificate, iterations = _solve_constrained(
            problem, lam, radius_sq, tol, max_iters, warm
        )

    model = TrainedModel(
        coefficients=coefficients,
        lam=lam,
        loss=problem.loss,
        representation=problem.representation,
        objective_value=problem.objective(coefficients, lam),
        norm_constraint=radius_sq,
        certificate=float(certificate),
        iterations=iterations,
    )
    if not certificate <= tol:
        metrics.incr(
            "solver_convergence_failure",
            tags=[
                f"loss:{problem.loss.kind}",
                f"representation:{problem.representation}",
            ],
        )
        raise ConvergenceFailure(
            f"{problem.loss.kind} solver stopped at certificate {certificate:.3g} "
            f"> tol {tol:.3g} after {iterations} iterations",
            model,
        )
    return model


def _solve_constrained(problem, lam, radius_sq, tol, max_iters, warm):
    """Find nu >= 0 with |solution(lam + nu)|^2 = radius_sq by bisection.
    The returned point is always feasible."""
    low, high = 0.0, max(lam, 1e-12)
    while True:
        coefficients, certificate, iterations, warm = _solve_penalized(
            problem, lam + high, tol, max_iters, warm=warm
        )
        if problem.norm_sq(coefficients) <= radius_sq:
            break
        low, high = high, high * 2
    best = (coefficients, certificate, iterations)
    for _ in range(BISECTION_STEPS):
        middle = (low + high) / 2
        coefficients, certificate, iterations, warm = _solve_penalized(
            problem, lam + middle, tol, max_iters, warm=warm
        )
        norm_sq = problem.norm_sq(coefficients)
        if norm_sq <= radius_sq:
            high = middle
            best = (coefficients, certificate, iterations)
            if radius_sq - norm_sq <= 1e-10 * max(1.0, radius_sq):
                break
        else:
            low = middle
    logger.debug("Norm constraint active, multiplier %.3g", high)
    return best


@metrics.timer_decorator("train_rff")
def train_rff(Phi, y, loss, lam, options=None):
    """Train beta over the random features in Phi (n x s)."""
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, not {lam}")
    Phi = _check_finite(Phi, "Phi")
    if Phi.ndim != 2 or Phi.shape[0] < 1 or Phi.shape[1] < 1:
        raise DimensionMismatch(f"Phi must be a nonempty n x s matrix, got {Phi.shape}")
    y = _check_labels(y, Phi.shape[0])
    problem = _Problem(Phi, y, get_loss(loss), FEATURE)
    return _solve(problem, lam, options or SolverOptions())


@metrics.timer_decorator("train_kernel")
def train_kernel(K, y, loss, lam, options=None):
    """Train alpha over the n training points, with f = K alpha."""
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, not {lam}")
    K = check_symmetric(_check_finite(K, "K"))
    y = _check_labels(y, K.shape[0])
    problem = _Problem(K, y, get_loss(loss), KERNEL)
    return _solve(problem, lam, options or SolverOptions())


def predict(model, inputs):
    """Margins. `inputs` are feature rows phi(x) for a feature model, or
    kernel rows (k(x_1, x), ..., k(x_n, x)) for a kernel model."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[np.newaxis, :]
    if inputs.shape[1] != model.coefficients.shape[0]:
        raise DimensionMismatch(
            f"inputs have {inputs.shape[1]} columns, the "
            f"{model.representation} model has {model.coefficients.shape[0]} "
            "coefficients"
        )
    return inputs @ model.coefficients


def classify(model, inputs):
    return sign(predict(model, inputs))


def empirical_risk(model, inputs, y, loss=None):
    loss = model.loss if loss is None else get_loss(loss)
    margins = predict(model, inputs)
    return float(np.mean(loss.value(np.asarray(y, dtype=float), margins)))


def zero_one_risk(model, inputs, y):
    return float(np.mean(classify(model, inputs) != np.asarray(y)))
