import numpy as np
import pytest

from groupoidal import (
    BundleAction,
    identity_fiber_maps,
    trivial_line_bundle,
)
from groupoidal.instances import (
    cyclic_group,
    symmetric_z2z2_actions,
    symmetric_z2z2_bundle,
    trivial_group,
)


@pytest.fixture(scope="session")
def z2():
    return cyclic_group(2)


@pytest.fixture(scope="session")
def z3():
    return cyclic_group(3)


@pytest.fixture(scope="session")
def triv():
    return trivial_group()


@pytest.fixture(scope="session")
def z2z2_actions():
    return symmetric_z2z2_actions()


@pytest.fixture(scope="session")
def z2z2_bundle():
    return symmetric_z2z2_bundle()


def line_bundle_action(action):
    bundle = trivial_line_bundle(action.target)
    return bundle, BundleAction(action.group, bundle, action,
                                identity_fiber_maps(bundle, action), action.side)


def assert_close(a, b, tol=1e-9):
    assert np.max(np.abs(np.asarray(a) - np.asarray(b))) <= tol
