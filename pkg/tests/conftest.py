import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stefanlab import make_piecewise
from stefanlab.densities import PeriodicOscillatoryDensity


@pytest.fixture(scope="session")
def pw_std():
    """The standard band density used throughout: levels 1/2 and 21/20, p = q = 1/2."""
    return make_piecewise("1/2", "21/20", "1/2", "1/2")


@pytest.fixture(scope="session")
def sine_density():
    return PeriodicOscillatoryDensity(1.0, "sin")
