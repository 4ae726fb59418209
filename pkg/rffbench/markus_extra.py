# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

import click
from markus import TIMING
from markus.backends import BackendBase


class EchoMetrics(BackendBase):
    """A markus backend that echoes timing records to stderr so you can
    watch where a long experiment run spends its time.

    Enabled by the ``--show-metrics`` flag of the command line tool.
    Counters are ignored unless ``include_counters`` is set in the options.
    """

    def __init__(self, options=None, filters=None):
        super().__init__(options=options, filters=filters)
        self.include_counters = self.options.get("include_counters", False)

    def emit(self, record):
        if record.stat_type != TIMING and not self.include_counters:
            return
        value = record.value
        if record.stat_type == TIMING:
            value = f"{value:.1f}ms"
        tags = " ".join(record.tags or [])
        click.echo(f"{record.stat_type} {record.key} {value} {tags}".rstrip(), err=True)
