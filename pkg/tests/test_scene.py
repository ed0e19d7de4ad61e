"""Scene container: file round trips, reference checking, contact resolution."""

import json

import numpy as np
import pytest

from geocontact import (
    Contact,
    GeoContactError,
    Scene,
    SceneError,
    SurfacePoint,
    load_scene,
    save_scene,
    surface_normal,
)
from geocontact import shapes
from geocontact.scene import scene_text
from geocontact.skeleton import forward_kinematics, skin_mesh


def rewrite(path, mutate):
    """Load scene JSON, apply an in-place mutation, and write it back."""
    data = json.loads(path.read_text())
    mutate(data)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def add_floor_patch(scene, pid, vertices, axis):
    sess = scene.session("object")
    sess.add_patch(
        pid,
        [SurfacePoint.vertex(v) for v in vertices],
        axis_points=[SurfacePoint.vertex(v) for v in axis],
    )
    scene.absorb(sess)


class TestRoundTrip:
    def test_save_load_bytes_identical(self, demo_dir):
        scene = load_scene(demo_dir / "scene.json")
        add_floor_patch(scene, "pad", [100, 101, 102], [100, 102])
        scene.contacts.append(
            Contact("pad", "pad", weight=0.5)
        )
        scene.config = {"lambda_p": 2.0}
        first = demo_dir / "a.json"
        save_scene(first, scene)
        second = demo_dir / "b.json"
        save_scene(second, load_scene(first))
        assert first.read_bytes() == second.read_bytes()

    def test_text_is_sorted_json_with_newline(self, demo_dir):
        scene = load_scene(demo_dir / "scene.json")
        text = scene_text(scene)
        assert text.endswith("\n")
        assert json.loads(text)["format"] == 1

    def test_pose_survives_round_trip(self, demo_dir):
        scene = load_scene(demo_dir / "scene.json")
        scene.pose = np.linspace(0.0, 1.0, scene.skeleton.n_dofs)
        out = demo_dir / "posed.json"
        save_scene(out, scene)
        again = load_scene(out)
        np.testing.assert_array_equal(again.pose, scene.pose)


class TestValidationErrors:
    def test_missing_mesh_file(self, demo_dir):
        rewrite(
            demo_dir / "scene.json",
            lambda d: d["meshes"].update({"object": "nope.obj"}),
        )
        with pytest.raises(SceneError, match="nope.obj"):
            load_scene(demo_dir / "scene.json")

    def test_unknown_format(self, demo_dir):
        rewrite(demo_dir / "scene.json", lambda d: d.update({"format": 2}))
        with pytest.raises(SceneError, match="format"):
            load_scene(demo_dir / "scene.json")

    def test_binding_requires_rig(self, demo_dir):
        rewrite(demo_dir / "scene.json", lambda d: d.pop("rig"))
        with pytest.raises(SceneError, match="rig"):
            load_scene(demo_dir / "scene.json")

    def test_unknown_config_key(self, demo_dir):
        rewrite(
            demo_dir / "scene.json",
            lambda d: d.update({"config": {"lambda_q": 1.0}}),
        )
        with pytest.raises(SceneError, match="lambda_q"):
            load_scene(demo_dir / "scene.json")

    def test_bad_config_value(self, demo_dir):
        rewrite(
            demo_dir / "scene.json",
            lambda d: d.update({"config": {"lambda_d": -1.0}}),
        )
        with pytest.raises(GeoContactError):
            load_scene(demo_dir / "scene.json")

    def test_link_to_unknown_patch(self, demo_dir):
        rewrite(
            demo_dir / "scene.json",
            lambda d: d.update(
                {
                    "links": {
                        "ghost": {
                            "format": 1,
                            "parent": "ghost",
                            "anchor": 0,
                            "length": 1.0,
                            "departure": {"re": 1.0, "im": 0.0},
                            "start_dir": {"re": 1.0, "im": 0.0},
                        }
                    }
                }
            ),
        )
        with pytest.raises(SceneError, match="ghost"):
            load_scene(demo_dir / "scene.json")

    def test_contact_names_unknown_patch(self, demo_dir):
        rewrite(
            demo_dir / "scene.json",
            lambda d: d.update(
                {"contacts": [{"source": "a", "target": "b", "weight": 1.0}]}
            ),
        )
        with pytest.raises(SceneError):
            load_scene(demo_dir / "scene.json")

    def test_negative_contact_weight(self, demo_dir):
        scene = load_scene(demo_dir / "scene.json")
        add_floor_patch(scene, "pad", [100, 101], [100, 101])
        out = demo_dir / "weighted.json"
        save_scene(out, scene)
        rewrite(
            out,
            lambda d: d.update(
                {"contacts": [{"source": "pad", "target": "pad", "weight": -1.0}]}
            ),
        )
        with pytest.raises(SceneError, match="weight"):
            load_scene(out)

    def test_pose_length_mismatch(self, demo_dir):
        rewrite(demo_dir / "scene.json", lambda d: d.update({"pose": [0.0, 1.0]}))
        with pytest.raises(SceneError, match="pose"):
            load_scene(demo_dir / "scene.json")

    def test_unknown_patch_lookup(self, demo_dir):
        scene = load_scene(demo_dir / "scene.json")
        with pytest.raises(SceneError, match="ghost"):
            scene.get_patch("ghost")
        with pytest.raises(SceneError, match="shadow"):
            scene.get_mesh("shadow")

    def test_assemble_needs_rig_and_binding(self, demo_dir):
        rewrite(
            demo_dir / "scene.json",
            lambda d: (d.pop("rig"), d.pop("binding")),
        )
        scene = load_scene(demo_dir / "scene.json")
        with pytest.raises(SceneError, match="rig"):
            scene.assemble()


class TestContactPairs:
    def make_pair(self, demo_dir):
        scene = load_scene(demo_dir / "scene.json")
        add_floor_patch(scene, "src", [100, 101, 102], [100, 102])
        add_floor_patch(scene, "dst", [150, 151, 152], [150, 152])
        return scene

    def test_targets_and_normals_from_target_mesh(self, demo_dir):
        scene = self.make_pair(demo_dir)
        scene.contacts.append(
            Contact("src", "dst", weight=0.7)
        )
        [pair] = scene.contact_pairs()
        assert len(pair.points) == 3
        floor = scene.get_mesh("object")
        dst = scene.get_patch("dst")
        for got, q in zip(pair.targets, dst.points):
            np.testing.assert_allclose(got, floor.position(q), atol=1e-12)
        for n in pair.normals:
            np.testing.assert_allclose(n, [0.0, 0.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(pair.weights, [0.7, 0.7, 0.7])

    def test_none_points_are_skipped(self, demo_dir):
        scene = self.make_pair(demo_dir)
        scene.get_patch("src").points[1] = None
        scene.contacts.append(Contact("src", "dst"))
        [pair] = scene.contact_pairs()
        assert len(pair.points) == 2

    def test_size_mismatch_rejected(self, demo_dir):
        scene = self.make_pair(demo_dir)
        add_floor_patch(scene, "short", [200, 201], [200, 201])
        scene.contacts.append(Contact("src", "short"))
        with pytest.raises(SceneError, match="sizes"):
            scene.contact_pairs()

    def test_all_dead_pairs_rejected(self, demo_dir):
        scene = self.make_pair(demo_dir)
        src = scene.get_patch("src")
        src.points[:] = [None, None, None]
        scene.contacts.append(Contact("src", "dst"))
        with pytest.raises(SceneError, match="live"):
            scene.contact_pairs()


class TestSurfaceNormal:
    def test_flat_grid_everywhere_up(self, grid):
        for point in [
            SurfacePoint.vertex(40),
            SurfacePoint.edge(10, 0.25),
            SurfacePoint.face(12, (0.2, 0.3, 0.5)),
        ]:
            np.testing.assert_allclose(
                surface_normal(grid, point), [0.0, 0.0, 1.0], atol=1e-12
            )

    def test_sphere_normal_points_outward(self, sphere):
        point = SurfacePoint.vertex(100)
        n = surface_normal(sphere, point)
        radial = sphere.vertices[100] / np.linalg.norm(sphere.vertices[100])
        assert float(np.dot(n, radial)) > 0.95


class TestSessionAbsorb:
    def test_roles_are_partitioned(self, demo_dir):
        scene = load_scene(demo_dir / "scene.json")
        add_floor_patch(scene, "pad", [100, 101, 102], [100, 102])

        sess = scene.session("manipulator")
        sess.add_patch(
            "tip",
            [SurfacePoint.vertex(0), SurfacePoint.vertex(1)],
            axis_points=[SurfacePoint.vertex(0), SurfacePoint.vertex(1)],
        )
        scene.absorb(sess)

        assert set(scene.patches) == {"pad", "tip"}
        assert scene.patches["pad"].mesh_id == "object"
        assert scene.patches["tip"].mesh_id == "manipulator"

    def test_session_sees_only_its_role(self, demo_dir):
        scene = load_scene(demo_dir / "scene.json")
        add_floor_patch(scene, "pad", [100, 101, 102], [100, 102])
        sess = scene.session("manipulator")
        assert "pad" not in sess.patches

    def test_absorb_replaces_role_patches(self, demo_dir):
        scene = load_scene(demo_dir / "scene.json")
        add_floor_patch(scene, "pad", [100, 101, 102], [100, 102])
        sess = scene.session("object")
        sess.remove_patch("pad")
        scene.absorb(sess)
        assert scene.patches == {}


class TestDemoAssets:
    def test_demo_scene_loads_and_assembles(self, tmp_path):
        path = shapes.write_demo_assets(tmp_path / "demo")
        scene = load_scene(path)

        assert set(scene.meshes) == {"manipulator", "object"}
        hand = scene.meshes["manipulator"]
        assert scene.skeleton is not None
        assert scene.binding is not None
        assert scene.binding.n_vertices == hand.n_vertices

        # Bind pose is the rest pose: skinning at rest reproduces the mesh.
        transforms = forward_kinematics(scene.skeleton, scene.skeleton.rest)
        skinned = skin_mesh(hand, scene.binding, transforms)
        np.testing.assert_allclose(skinned, hand.vertices, atol=1e-12)

        contact_scene = scene.assemble()
        assert contact_scene.skeleton.n_dofs == scene.skeleton.n_dofs

    def test_demo_scene_round_trips(self, tmp_path):
        path = shapes.write_demo_assets(tmp_path / "demo")
        scene = load_scene(path)
        save_scene(path, scene)
        assert load_scene(path).to_dict() == scene.to_dict()
