# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

"""
Settings for the rffbench library and experiment runner.

Every value that may change per environment is read from an environment
variable prefixed with ``RFFBENCH_``. For example ``RFFBENCH_WORKERS=4``.
The active configuration class is picked with ``RFFBENCH_CONFIGURATION``.
"""

import os

from configurations import values


ENVIRON_PREFIX = "RFFBENCH"


def _env(value_class, default, name):
    return value_class(default, environ_name=name, environ_prefix=ENVIRON_PREFIX)


class Numerics:
    "Tolerances and sizes used by the numerical operations"

    # The optimizers stop once their certificate (duality gap for hinge,
    # gradient norm for logistic) drops below this.
    SOLVER_TOL = _env(values.FloatValue, 1e-6, "SOLVER_TOL")
    SOLVER_MAX_ITERS = _env(values.IntegerValue, 20000, "SOLVER_MAX_ITERS")

    # Leverage-weighted sampling draws a pool of candidate frequencies
    # from the spectral density first. The pool has
    # max(POOL_OVERSAMPLING * s, POOL_MIN_SIZE) atoms.
    POOL_OVERSAMPLING = _env(values.IntegerValue, 20, "POOL_OVERSAMPLING")
    POOL_MIN_SIZE = _env(values.IntegerValue, 2000, "POOL_MIN_SIZE")

    # Pool atoms are scored in chunks so the n x chunk matrix of feature
    # values stays small.
    LEVERAGE_CHUNK_SIZE = _env(values.IntegerValue, 4096, "LEVERAGE_CHUNK_SIZE")

    # Eigenvalues below DECAY_RANK_CUTOFF * largest count as zero when
    # classifying a spectrum, and a decay fit needs at least this R^2.
    DECAY_RANK_CUTOFF = _env(values.FloatValue, 1e-10, "DECAY_RANK_CUTOFF")
    DECAY_FIT_MIN_R2 = _env(values.FloatValue, 0.98, "DECAY_FIT_MIN_R2")
    # Eigenvalues of K/n below DECAY_FIT_FLOOR * largest / n are estimated
    # too poorly from n points to take part in the exponential fit.
    DECAY_FIT_FLOOR = _env(values.FloatValue, 1.0, "DECAY_FIT_FLOOR")


class Synthetic:
    "Defaults for the synthetic problem generators"

    REFERENCE_SAMPLE_SIZE = _env(values.IntegerValue, 4096, "REFERENCE_SAMPLE_SIZE")
    INPUT_DIM = _env(values.IntegerValue, 3, "INPUT_DIM")
    # Standard gaussian inputs are truncated at this radius.
    INPUT_RADIUS = _env(values.FloatValue, 4.0, "INPUT_RADIUS")


class Core(Numerics, Synthetic):
    """Settings that will never change per-environment."""

    THIS_DIR = os.path.dirname(os.path.abspath(__file__))
    BASE_DIR = os.path.dirname(THIS_DIR)

    SCHEMAS_DIR = os.path.join(BASE_DIR, "schemas")
    PLAN_SCHEMA = os.path.join(SCHEMAS_DIR, "experiment_plan.json")

    BOOTSTRAP_RESAMPLES = 200
    BOOTSTRAP_SEED = 0


class Base(Core):
    """Settings that may change per-environment, some with defaults."""

    # How many cells, pool chunks or trials to run at the same time.
    # 0 means let concurrent.futures decide.
    WORKERS = _env(values.IntegerValue, 0, "WORKERS")

    # Only really meant to be overridden by the 'Test' class.
    SYNCHRONOUS_EXECUTOR = _env(values.BooleanValue, False, "SYNCHRONOUS_EXECUTOR")

    OUT_DIR = _env(values.Value, "results", "OUT_DIR")

    LOGGING_USE_JSON = _env(values.BooleanValue, False, "LOGGING_USE_JSON")
    LOGGING_DEFAULT_LEVEL = _env(values.Value, "INFO", "LOGGING_DEFAULT_LEVEL")

    # Send every metric to the 'markus' logger as well.
    METRICS_LOGGING = _env(values.BooleanValue, False, "METRICS_LOGGING")

    @classmethod
    def MARKUS_BACKENDS(cls):
        if cls.METRICS_LOGGING:
            return [{"class": "markus.backends.logging.LoggingMetrics"}]
        return []

    @classmethod
    def LOGGING(cls):
        return {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {
                "json": {
                    "()": "dockerflow.logging.JsonLogFormatter",
                    "logger_name": "rffbench",
                },
                "verbose": {"format": "%(levelname)s %(asctime)s %(name)s %(message)s"},
            },
            "handlers": {
                "console": {
                    "level": cls.LOGGING_DEFAULT_LEVEL,
                    "class": "logging.StreamHandler",
                    "formatter": ("json" if cls.LOGGING_USE_JSON else "verbose"),
                },
                "null": {"class": "logging.NullHandler"},
            },
            "root": {"level": "WARNING", "handlers": ["console"]},
            "loggers": {
                "rffbench": {
                    "level": "DEBUG",
                    "handlers": ["console"],
                    "propagate": False,
                },
                "markus": {
                    "level": "INFO",
                    "handlers": ["console"],
                    "propagate": False,
                },
            },
        }


class Test(Base):
    """Configuration to be used during testing"""

    # Swap the ThreadPoolExecutor for an executor that is entirely
    # synchronous.
    SYNCHRONOUS_EXECUTOR = True

    OUT_DIR = "test-results"

    LOGGING_DEFAULT_LEVEL = "WARNING"

    @classmethod
    def MARKUS_BACKENDS(cls):
        return []


CONFIGURATIONS = {"Base": Base, "Test": Test}

settings = CONFIGURATIONS[os.environ.get("RFFBENCH_CONFIGURATION", "Base")]
