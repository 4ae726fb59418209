# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

import logging
import os

# Has to happen before anything imports rffbench.settings
os.environ.setdefault("RFFBENCH_CONFIGURATION", "Test")

import markus  # noqa: E402
import numpy as np  # noqa: E402
import pytest  # noqa: E402
import ujson as json  # noqa: E402
from markus.testing import MetricsMock  # noqa: E402

from rffbench.kernels.core import GAUSSIAN, KernelSpec  # noqa: E402
from rffbench.settings import settings as active_settings  # noqa: E402


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="Also run the slow, experiment sized tests.",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def metricsmock():
    """Returns a MetricsMock context to record metrics records

    Usage::

        def test_something(metricsmock):
            # do test stuff...

            mm.print_records()  # debugging tests

            mm.assert_incr("rffbench.compare_skipped")

    """
    with MetricsMock() as mm:
        yield mm


class _SettingsOverride:
    def __init__(self, monkeypatch):
        object.__setattr__(self, "_monkeypatch", monkeypatch)

    def __getattr__(self, key):
        return getattr(active_settings, key)

    def __setattr__(self, key, value):
        self._monkeypatch.setattr(active_settings, key, value)


@pytest.fixture
def settings(monkeypatch):
    """Assign to attributes of this to change a setting for one test.

    Usage::

        def test_something(settings):
            settings.SOLVER_TOL = 1e-9

    """
    return _SettingsOverride(monkeypatch)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def gaussian_kernel():
    return KernelSpec(GAUSSIAN, bandwidth=1.0, input_dim=3)


@pytest.fixture
def plan_data():
    """A plan small enough to run in a couple of seconds."""
    return {
        "name": "tiny",
        "regime": {"kind": "exponential", "input_dim": 1},
        "loss": "hinge",
        "schemes": ["plain"],
        "n_grid": [40],
        "s_rule": {"kind": "explicit", "values": {"40": 20}},
        "lambda_rule": {"c": 0.5, "r": 1},
        "noise": {"margin": 0.8},
        "trials": 1,
        "seed": 7,
        "target_seed": 3,
        "holdout": 50,
        "reference_size": 200,
    }


@pytest.fixture
def plan_file(tmpdir, plan_data):
    def inner(**changes):
        data = dict(plan_data, **changes)
        path = tmpdir.join("plan.json")
        path.write(json.dumps(data))
        return str(path)

    return inner


@pytest.fixture
def isolated_logging(monkeypatch):
    """Let a test run rffbench.apps.configure() without leaving its
    logging config behind for the tests that use caplog."""
    from rffbench import apps

    monkeypatch.setattr(apps, "_configured", False)
    saved = {}
    for name in (None, "rffbench", "markus"):
        logger = logging.getLogger(name)
        saved[name] = (list(logger.handlers), logger.level, logger.propagate)
    yield
    for name, (handlers, level, propagate) in saved.items():
        logger = logging.getLogger(name)
        for handler in list(logger.handlers):
            if handler not in handlers:
                logger.removeHandler(handler)
        logger.setLevel(level)
        logger.propagate = propagate
    markus.configure([])
