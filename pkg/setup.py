import pathlib

from setuptools import find_packages, setup

CONFIGDIR = pathlib.Path.home() / ".config" / "lpsgd"
CONFIGDIR.mkdir(parents=True, exist_ok=True)
with open("lpsgd/__init__.py", "r") as f:
    for line in f:
        if line.startswith("__version__"):
            version = line.strip().split("=")[1].strip(" '\"")
            break

    else:
        version = "0.0.1"
with open("README.md", "rb") as f:
    readme = f.read().decode("utf-8")
REQUIRES = [
    "addict",
    "cached_property",
    "fire>=0.4.0",
    "kick>=1.1.0",
    "numpy>=1.17",
    "pandas>=1.5",
    "toml",
    "ujson",
]
setup(
    name="lpsgd",
    version=version,
    description="Simulate SGD in emulated low-precision floating point and check its convergence bounds",
    long_description=readme,
    long_description_content_type="text/markdown",
    license="MIT/Apache-2.0",
    keywords=["sgd", "low-precision", "bfloat16", "quasi-convex", "convergence"],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "License :: OSI Approved :: Apache Software License",
        "Natural Language :: English",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: Implementation :: CPython",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.8",
    install_requires=REQUIRES,
    tests_require=["pytest", "hypothesis"],
    extras_require={"test": ["pytest", "hypothesis"]},
    packages=find_packages(exclude=["tests"]),
    package_data={"lpsgd": ["config/*.toml"]},
    data_files=[(str(CONFIGDIR), ["lpsgd/config/config.toml"])],
    entry_points={"console_scripts": ["lpsgd = lpsgd.wrapper:main"]},
)
