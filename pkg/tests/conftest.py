import numpy as np
import pytest

from softgrip.geometry.finger import FingerParams, build_gripper_mesh


@pytest.fixture(scope="session")
def gripper():
    return build_gripper_mesh()


@pytest.fixture(scope="session")
def finger_params():
    return FingerParams()


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
