import numpy as np
import pytest


@pytest.fixture
def rng():
    from tiltedlines.rng import RngStream
    return RngStream(20240801)


@pytest.fixture
def tilt12():
    from tiltedlines.model import TiltParams
    return TiltParams(1.0, 2.0)


def assert_close(a, b, tol, msg=""):
    assert abs(a - b) <= tol, f"{msg}: {a} vs {b} (tol {tol})"
