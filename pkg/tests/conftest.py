from pathlib import Path

import numpy as np
import pytest

from protestlens.tensor import Tensor

DATA = Path(__file__).parent / "data"


def param64(rng, *shape, scale=1.0):
    """A float64 leaf that requires grad, for finite-difference checks."""
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def data_dir():
    return DATA


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
