# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, you can obtain one at http://mozilla.org/MPL/2.0/.

import sys
from pathlib import Path

BASEDIR = Path(__file__).parent.parent
sys.path.insert(0, str(BASEDIR))


extensions = ["sphinx.ext.autodoc"]

# Don't import numpy and friends just to build the docs.
autodoc_mock_imports = [
    "numpy",
    "scipy",
    "pandas",
    "configurations",
    "dockerflow",
    "markus",
    "ujson",
    "jsonschema",
    "encore",
    "click",
]

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "rffbench"
copyright = "2024, the rffbench developers"
author = "the rffbench developers"
version = "0.1"
release = "0.1.0"

exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]
pygments_style = "sphinx"

html_theme = "sphinx_rtd_theme"
html_static_path = []
htmlhelp_basename = "rffbenchdoc"

man_pages = [(master_doc, "rffbench", "rffbench Documentation", [author], 1)]
