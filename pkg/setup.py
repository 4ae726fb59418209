# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

from setuptools import find_packages, setup

setup(
    name="rffbench",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests/*"]),
    description="Random Fourier feature classification and learning-rate experiments",
    license="MPL 2.0",
    python_requires=">=3.9",
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "Django",
        "django-configurations",
        "dockerflow",
        "markus",
        "ujson",
        "jsonschema",
        "click",
        "encore",
    ],
    entry_points={"console_scripts": ["rffbench=rffbench.bench.cli:main"]},
    data_files=[("schemas", ["schemas/experiment_plan.json"])],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Mozilla Public License 2.0 (MPL 2.0)",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    zip_safe=False,
)
