#!/usr/bin/env python
# Copyright (c) Meta Platforms, Inc. and affiliates.
#
# This source code is licensed under the MIT license found in the
# LICENSE file in the root directory of this source tree.

from pathlib import Path

import setuptools


def parse_requirements_file(path):
    with open(path) as f:
        reqs = []
        for line in f:
            line = line.strip()
            if line:
                reqs.append(line)
    return reqs


reqs_main = parse_requirements_file("requirements/main.txt")
reqs_dev = parse_requirements_file("requirements/dev.txt")

with open(Path("attest") / "__init__.py", "r") as f:
    for line in f:
        if "__version__" in line:
            version = line.split("__version__ = ")[1].rstrip().strip('"')

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="attest-so3",
    version=version,
    author="Meta Research",
    description="Deterministic attitude estimation on SO(3) with ellipsoidal bounds.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    keywords="attitude estimation, rotation group, variational integrator, "
    "ellipsoidal bounds, set-membership estimation",
    packages=setuptools.find_packages(exclude=("tests", "tests.*")),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering",
    ],
    python_requires=">=3.8",
    install_requires=reqs_main,
    extras_require={"dev": reqs_main + reqs_dev},
    entry_points={"console_scripts": ["estimate = attest.sim.cli:main"]},
)
