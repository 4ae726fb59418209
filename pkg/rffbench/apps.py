# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

import logging
import logging.config

import markus

from rffbench.settings import settings


logger = logging.getLogger("rffbench")

_configured = False


def configure(extra_backends=None):
    """Set up logging and metrics for a process. Only the first call
    does anything, the rest are no-ops. The library itself never calls
    this, only entry points (the CLI, scripts) do."""
    global _configured
    if _configured:
        return
    _configure_logging()
    _configure_markus(extra_backends or [])
    _configured = True


def _configure_logging():
    logging.config.dictConfig(settings.LOGGING())


def _configure_markus(extra_backends):
    """Must be done once and only once."""
    backends = settings.MARKUS_BACKENDS() + list(extra_backends)
    markus.configure(backends)
    logger.debug("Configured markus with %d backend(s)", len(backends))
