import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geocontact import Mesh, SkinBinding, Skeleton, save_mesh, shapes


@pytest.fixture(scope="session")
def square():
    return shapes.unit_square()


@pytest.fixture(scope="session")
def grid():
    return shapes.plane_grid(8, 8, 1.0, 1.0)


@pytest.fixture(scope="session")
def big_grid():
    return shapes.plane_grid(20, 20, 2.0, 2.0)


@pytest.fixture(scope="session")
def cyl():
    return shapes.cylinder(64, 32, radius=1.0, height=2.0)


@pytest.fixture(scope="session")
def box():
    return shapes.cube()


@pytest.fixture(scope="session")
def sphere():
    return shapes.uv_sphere(24, 16)


@pytest.fixture(scope="session")
def hand():
    return shapes.mitt()


def _demo_skeleton():
    return Skeleton(
        names=["root", "shoulder", "elbow"],
        parents=[-1, 0, 1],
        rotations=[[1.0, 0.0, 0.0, 0.0]] * 3,
        translations=[[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
    )


@pytest.fixture()
def demo_dir(tmp_path):
    """Scene directory holding a two-link arm, a flat floor, rig, and binding.

    The arm mesh is a single triangle whose tip sits at the end of the
    second link; every arm vertex is bound rigidly to the elbow joint.
    """
    tri = Mesh(
        [[2.0, 0.0, 0.0], [1.9, 0.05, 0.0], [1.9, -0.05, 0.0]],
        [[0, 1, 2]],
    )
    save_mesh(tmp_path / "arm.obj", tri)
    save_mesh(tmp_path / "floor.obj", shapes.plane_grid(20, 20, 2.0, 2.0))

    skel = _demo_skeleton()
    binding = SkinBinding.for_skeleton(skel, [[(2, 1.0)]] * 3)
    for name, payload in [
        ("rig.json", skel.to_dict()),
        ("binding.json", binding.to_dict()),
        (
            "scene.json",
            {
                "format": 1,
                "meshes": {"manipulator": "arm.obj", "object": "floor.obj"},
                "rig": "rig.json",
                "binding": "binding.json",
                "patches": {},
                "links": {},
                "contacts": [],
            },
        ),
    ]:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        (tmp_path / name).write_text(text)
    return tmp_path
