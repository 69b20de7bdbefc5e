import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240801)


def assert_within_se(estimate, target, se, k=3.0, label=""):
    """Assert |estimate - target| <= k standard errors (with a tiny floor)."""
    gap = abs(estimate - target)
    bound = k * max(se, 1e-12)
    assert gap <= bound, (
        f"{label}: |{estimate:.6g} - {target:.6g}| = {gap:.3g} exceeds "
        f"{k:.0f} se = {bound:.3g}"
    )
