# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import jsonschema
import ujson as json

from rffbench.erm.losses import HINGE
from rffbench.kernels.leverage import COROLLARY, feature_budget, feature_scaling
from rffbench.kernels.sampler import PLAIN
from rffbench.settings import settings
from rffbench.synthdata.generators import (
    FINITE_RANK,
    POLYNOMIAL,
    UnsupportedRegime,
    polynomial_tuning,
)


EXPLICIT = "explicit"
POWER_LOG = "power_log"
POWER = "power"
LOGLOG = "loglog"
BUDGET = "budget"

SCALING_RULE_OF_KIND = {
    POWER_LOG: "n_half_r_log",
    POWER: "n_half_r",
    LOGLOG: "loglog",
}


class InvalidPlan(ValueError):
    """Happens when an experiment plan doesn't validate against the
    plan schema or can't be run as written."""


@lru_cache(maxsize=1)
def get_plan_schema():
    with open(settings.PLAN_SCHEMA) as f:
        schema = json.load(f)
    jsonschema.Draft7Validator.check_schema(schema)
    return schema


@dataclass(frozen=True)
class SRule:
    kind: str
    values: dict = None
    c: float = 1.0
    p: float = 0.5
    mode: str = COROLLARY
    delta: float = None

    def resolve(self, n, scheme=PLAIN, lam=None, d_hat=None, kappa=None):
        """Number of features for n training points. The budget rule also
        needs lam, d_hat and kappa."""
        if self.kind == EXPLICIT:
            return self.values[n]
        if self.kind in SCALING_RULE_OF_KIND:
            # n^p is the n^(1/(2r)) of the scaling rules
            r = 1 / (2 * self.p) if self.p > 0 else math.inf
            return feature_scaling(SCALING_RULE_OF_KIND[self.kind], n, r=r, c=self.c)
        return feature_budget(scheme, lam, d_hat, kappa, self.delta, mode=self.mode)

    def to_dict(self):
        data = {"kind": self.kind}
        if self.kind == EXPLICIT:
            data["values"] = {str(n): s for n, s in sorted(self.values.items())}
        elif self.kind in (POWER_LOG, POWER):
            data.update(c=self.c, p=self.p)
        elif self.kind == LOGLOG:
            data["c"] = self.c
        else:
            data.update(mode=self.mode, delta=self.delta)
        return data


@dataclass(frozen=True)
class ExperimentPlan:
    regime: dict
    loss: str
    schemes: tuple
    n_grid: tuple
    s_rule: SRule
    lambda_c: float
    lambda_r: float
    margin: float
    source_r: float = 1.0
    source_R: float = 1.0
    trials: int = 1
    seed: int = 0
    target_seed: int = 0
    holdout: int = 1000
    reference_size: int = None
    kernel_baseline: bool = True
    solver_tol: float = None
    solver_max_iters: int = None
    out_dir: str = None
    gnuplot: bool = False
    name: str = "experiment"
    raw: dict = field(default=None, compare=False, repr=False)

    def lam(self, n):
        """lambda = c * n^(-1/(2r))"""
        return self.lambda_c * n ** (-1 / (2 * self.lambda_r))

    @property
    def effective_reference_size(self):
        needed = max(self.n_grid) + self.holdout
        if self.reference_size is None:
            return max(settings.REFERENCE_SAMPLE_SIZE, needed)
        return self.reference_size

    def with_overrides(self, seed=None, out_dir=None):
        changes = {}
        if seed is not None:
            changes["seed"] = seed
        if out_dir is not None:
            changes["out_dir"] = out_dir
        return replace(self, **changes) if changes else self

    def to_dict(self):
        return {
            "name": self.name,
            "regime": dict(self.regime),
            "loss": self.loss,
            "schemes": list(self.schemes),
            "n_grid": list(self.n_grid),
            "s_rule": self.s_rule.to_dict(),
            "lambda_rule": {"c": self.lambda_c, "r": self.lambda_r},
            "source": {"r": self.source_r, "R": self.source_R},
            "noise": {"margin": self.margin},
            "trials": self.trials,
            "seed": self.seed,
            "target_seed": self.target_seed,
            "holdout": self.holdout,
            "reference_size": self.effective_reference_size,
            "kernel_baseline": self.kernel_baseline,
        }


def parse_plan(data):
    """Validate a plan document and turn it into an ExperimentPlan."""
    try:
        jsonschema.validate(data, get_plan_schema())
    except jsonschema.exceptions.ValidationError as exception:
        path = "/".join(str(part) for part in exception.absolute_path)
        raise InvalidPlan(f"{path or 'plan'}: {exception.message}")

    n_grid = tuple(data["n_grid"])
    if list(n_grid) != sorted(n_grid):
        raise InvalidPlan("n_grid must be ascending")

    rule = data["s_rule"]
    if rule["kind"] == EXPLICIT:
        values = {int(n): s for n, s in rule["values"].items()}
        missing = [n for n in n_grid if n not in values]
        if missing:
            raise InvalidPlan(f"s_rule has no value for n in {missing}")
        s_rule = SRule(kind=EXPLICIT, values=values)
    else:
        s_rule = SRule(
            kind=rule["kind"],
            c=rule.get("c", 1.0),
            p=rule.get("p", 0.5),
            mode=rule.get("mode", COROLLARY),
            delta=rule.get("delta"),
        )

    if data["regime"]["kind"] == FINITE_RANK:
        raise InvalidPlan(
            "the finite_rank regime uses the linear kernel, which has no random "
            "features; use finite_support instead"
        )
    if data["regime"]["kind"] == POLYNOMIAL:
        try:
            polynomial_tuning(data["regime"].get("gamma", 2.0))
        except UnsupportedRegime as exception:
            raise InvalidPlan(str(exception))

    source = data.get("source", {})
    solver = data.get("solver", {})
    output = data.get("output", {})
    plan = ExperimentPlan(
        name=data.get("name", "experiment"),
        regime=dict(data["regime"]),
        loss=data.get("loss", HINGE),
        schemes=tuple(data["schemes"]),
        n_grid=n_grid,
        s_rule=s_rule,
        lambda_c=float(data["lambda_rule"]["c"]),
        lambda_r=float(data["lambda_rule"]["r"]),
        margin=float(data["noise"]["margin"]),
        source_r=float(source.get("r", data["lambda_rule"]["r"])),
        source_R=float(source.get("R", 1.0)),
        trials=data.get("trials", 1),
        seed=data.get("seed", 0),
        target_seed=data.get("target_seed", 0),
        holdout=data.get("holdout", 1000),
        reference_size=data.get("reference_size"),
        kernel_baseline=data.get("kernel_baseline", True),
        solver_tol=solver.get("tol"),
        solver_max_iters=solver.get("max_iters"),
        out_dir=output.get("dir"),
        gnuplot=output.get("gnuplot", False),
        raw=data,
    )
    needed = max(n_grid) + plan.holdout
    if plan.effective_reference_size < needed:
        raise InvalidPlan(
            f"reference_size {plan.effective_reference_size} is smaller than the "
            f"largest n plus the holdout ({needed})"
        )
    return plan


def load_plan(path):
    with open(path) as f:
        try:
            data = json.load(f)
        except ValueError as exception:
            raise InvalidPlan(f"{path} is not valid JSON ({exception})")
    return parse_plan(data)
