import numpy as np
import pytest

from qcertbench.randomness import SeededRng
from qcertbench.stabilizer import StabilizerGroup
from qcertbench.stats import ConfidenceSpec

GHZ3_LABELS = ["+XXX", "+ZZI", "+IZZ"]
BELL_LABELS = ["+XX", "+ZZ"]


@pytest.fixture
def rng(request):
    # one independent stream per test, stable across runs
    return SeededRng(1234, ("tests", request.node.name)).generator()


@pytest.fixture
def ghz3():
    return StabilizerGroup.from_labels(GHZ3_LABELS)


@pytest.fixture
def bell():
    return StabilizerGroup.from_labels(BELL_LABELS)


@pytest.fixture
def spec():
    return ConfidenceSpec(0.05, 0.1)


@pytest.fixture(params=[2, 3, 4, 8])
def dimension(request):
    return request.param


def ghz_vector(n):
    vec = np.zeros(2**n, dtype=complex)
    vec[0] = vec[-1] = 1 / np.sqrt(2)
    return vec
