import textwrap

import numpy as np
import pytest

from lpsgd.data import synthetic_blobs
from lpsgd.lowfloat import FloatFormat
from lpsgd.problems import LogisticRegressionProblem, PowerNormFunction

FORMATS = ["e8m7", "e5m10", "e8m23", "e4m3", "e5m2fz", "e8m15"]


@pytest.fixture
def bfloat16():
    return FloatFormat.parse("e8m7")


@pytest.fixture
def working():
    return FloatFormat.parse("e11m52")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


@pytest.fixture
def power_norm():
    return PowerNormFunction(L=3.0, p=0.2, dimension=2)


@pytest.fixture
def blobs():
    return synthetic_blobs(3, 20, 2, 3.0, seed=7)


@pytest.fixture
def logreg(blobs):
    return LogisticRegressionProblem(blobs.features, blobs.labels, blobs.num_classes, regularization=1e-3)


@pytest.fixture
def out(tmp_path, monkeypatch):
    directory = tmp_path / "out"
    monkeypatch.setenv("LPSGD_OUT", str(directory))
    return directory


@pytest.fixture
def write_config(tmp_path):
    def write(text, name="experiment.toml"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text))
        return path

    return write
