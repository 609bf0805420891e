import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from pendctl.dynamics import PhysicalParams  # noqa: E402
from pendctl.presets import paper_matched_params  # noqa: E402


@pytest.fixture
def default_params():
    return PhysicalParams()


@pytest.fixture
def paper_params():
    return paper_matched_params()


@st.composite
def physical_params(draw, min_friction=0.0):
    """Random but physically sensible plants."""
    M = draw(st.floats(0.1, 3.0))
    m = draw(st.floats(0.02, 1.0))
    l = draw(st.floats(0.1, 1.5))
    inertia = draw(st.floats(0.0, 0.5)) * m * l * l
    b = draw(st.floats(min_friction, 2.0))
    return PhysicalParams(cart_mass=M, bob_mass=m, arm_length=l, pendulum_inertia=inertia, viscous_friction=b)
