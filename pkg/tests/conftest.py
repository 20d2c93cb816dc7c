import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from rearrange_bench.demo import demo_database, demo_templates
from rearrange_bench.geometry import BoundingBox, Pose
from rearrange_bench.model import ObjectModel, SceneConfiguration, Task


def box_model(model_id="cube", l=3.0, w=3.0, h=3.0, category=None):
    return ObjectModel(model_id, category or model_id, BoundingBox(l, w, h))


def make_task(objects, initial, target, task_id="t0"):
    """objects: list of (instance_id, (l, w, h)); poses: dicts of instance_id -> Pose."""
    insts = [box_model(f"m_{iid}", *dims).instance(iid) for iid, dims in objects]
    return Task(task_id, insts, SceneConfiguration(initial), SceneConfiguration(target))


def random_pose(rng, scale=50.0):
    rot = Rotation.random(random_state=rng).as_matrix()
    return Pose(rot, rng.uniform(-scale, scale, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(20200501)


@pytest.fixture(scope="session")
def db():
    return demo_database()


@pytest.fixture(scope="session")
def templates():
    return demo_templates()
