import numpy as np
import pytest

from ghawkes import GammaKernel, HawkesModel, LinkSpec
from ghawkes._backend import available_backends


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


def linear_1d(mu=1.0, a=0.5, gamma=2.0):
    return HawkesModel([mu], LinkSpec("linear"), {(0, 0): GammaKernel(a, gamma)})


def poisson_model(rate=3.0, p=1, link="linear"):
    return HawkesModel([rate] * p, LinkSpec(link), {})


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

