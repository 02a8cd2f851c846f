import numpy as np
import pytest

from gazeboard.config import load_app_config
from gazeboard.geometry import CameraIntrinsics, CameraPose, default_board_layout


@pytest.fixture(scope="session")
def board():
    return default_board_layout()


@pytest.fixture(scope="session")
def app_config():
    return load_app_config()


@pytest.fixture(scope="session")
def entries(app_config):
    return app_config.dictionary_entries


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(fx=900.0, fy=900.0, cx=640.0, cy=360.0,
                            image_w=1280, image_h=720)


@pytest.fixture
def frontal_pose():
    return CameraPose(np.eye(3), [0.0, 0.0, 600.0])
