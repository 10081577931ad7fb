import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("warpcones", max_examples=60, deadline=None, derandomize=True)
settings.load_profile("warpcones")

from warpcones.algebra import (
    GeneratorSet,
    circle_rotation_generators,
    finite_rotation_generators,
    lps_sphere_generators,
)
from warpcones.manifolds import parse_model
from warpcones.nets import Net, build_net
from warpcones.warped import ActionSpec


@pytest.fixture(scope="session")
def sphere2():
    return parse_model("sphere:3")


@pytest.fixture(scope="session")
def circle():
    return parse_model("sphere:2")


@pytest.fixture(scope="session")
def so3():
    return parse_model("so3")


@pytest.fixture(scope="session")
def lps_gens():
    return lps_sphere_generators()


@pytest.fixture(scope="session")
def lps_action(sphere2, lps_gens):
    return ActionSpec(sphere2, lps_gens)


@pytest.fixture(scope="session")
def circle_rotation_action(circle):
    return ActionSpec(circle, circle_rotation_generators())


@pytest.fixture(scope="session")
def quarter_turn_action(circle):
    return ActionSpec(circle, finite_rotation_generators())


@pytest.fixture(scope="session")
def trivial_sphere_action(sphere2):
    return ActionSpec(sphere2, GeneratorSet((), {}))


@pytest.fixture(scope="session")
def net_s2_eighth(sphere2):
    return build_net(sphere2, 1.0 / 8.0, 2034)


@pytest.fixture(scope="session")
def net_s2_32(sphere2):
    # the finest sphere net in the suite (~8k points, about a minute);
    # shared between the coarse probes and the acceptance run
    return build_net(sphere2, 1.0 / 32.0, 2058)


@pytest.fixture(scope="session")
def exact_quarter_net(circle):
    pts = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    return Net(circle, pts, math.pi / 2, math.pi / 2, seed=0, pool_size=0)
