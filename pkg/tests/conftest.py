import math

import pytest

from kepler_billiard.kepler import OrbitalElements, Params, cartesian_from_elements


@pytest.fixture
def params():
    return Params(alpha=1.0, g=0.0, h=1.0)


@pytest.fixture
def reference_elements():
    """Generic bound ellipse of the conservation reference (A = -1/2)."""
    return OrbitalElements(A=-0.5, a=math.sqrt(0.32), theta0=1.2, alpha=1.0)


@pytest.fixture
def reference_state(reference_elements, params):
    """Start at the perihelion (below the wall)."""
    return cartesian_from_elements(reference_elements, 0.0, params)
