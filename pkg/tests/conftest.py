import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from semimarkov import load_bundled  # noqa: E402
from semimarkov.model import BUNDLED_MODELS  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20190423)


@pytest.fixture(params=BUNDLED_MODELS)
def bundled(request):
    model, obs = load_bundled(request.param)
    return request.param, model, obs


@pytest.fixture
def mixed3():
    return load_bundled("mixed3")


@pytest.fixture
def geometric2():
    return load_bundled("geometric2")


@pytest.fixture
def deterministic3():
    return load_bundled("deterministic3")


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
