#!/usr/bin/env python
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

# Run experiment plans without installing the package.

# Usage: ./bin/rffbench.py run --plan plan.json

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from rffbench.bench.cli import main  # noqa

if __name__ == "__main__":
    main()
