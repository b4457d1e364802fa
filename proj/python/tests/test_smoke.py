"""End-to-end smoke of the python bindings on a small scene."""

import json
import math

import numpy as np

import posegrid

SCENE = json.dumps({"point_count": 2048, "extent": 30.0, "features": {"dim": 8}})
ENGINE = json.dumps(
    {
        "schedule": {
            "iterations": 5,
            "axes": {
                "yaw": {"enabled": True, "range": 60.0, "count": 5},
                "x": {"enabled": True, "range": 2.5, "count": 5},
                "z": {"enabled": True, "range": 2.5, "count": 5},
            },
        }
    }
)
PERTURB = json.dumps({"yaw_range_deg": 40.0, "planar_radius_m": 1.5})


def test_geometry_round_trip():
    rot = posegrid.euler_to_rotation(30.0, 5.0, -2.0)
    pose = posegrid.Pose(rot, np.array([0.5, -1.0, 2.0]))
    assert np.allclose(pose.rotation @ pose.rotation.T, np.eye(3))
    rre, rte = posegrid.pose_errors(pose, pose)
    assert rre == 0.0 and rte == 0.0


def test_scene_and_projection():
    scene = posegrid.generate_scene(SCENE, seed=7)
    assert scene.cloud.shape == (2048, 3)
    hits = sum(
        posegrid.project(p, scene.gt_pose, scene.intrinsics) is not None
        for p in scene.cloud[:200]
    )
    assert hits >= 40  # the generator aims well above a 20% frustum share


def test_registration_recovers_pose():
    scene = posegrid.generate_scene(SCENE, seed=7)
    initial = posegrid.perturb_problem(scene, PERTURB, seed=3)
    rre0, rte0 = posegrid.pose_errors(initial, scene.gt_pose)
    result = posegrid.run_registration(scene, initial, ENGINE)
    rre, rte = posegrid.pose_errors(result.final_pose, scene.gt_pose)
    assert result.iterations_run == 5
    assert rre < rre0 and rre < 10.0
    assert rte < 5.0
    trace = json.loads(result.to_json())
    assert len(trace["trace"]) == 5


def test_scene_files_round_trip(tmp_path):
    scene = posegrid.generate_scene(SCENE, seed=11)
    path = posegrid.write_scene_files(scene, str(tmp_path), "scene")
    loaded, has_gt = posegrid.load_scene_file(path)
    assert has_gt
    assert np.allclose(loaded.cloud, scene.cloud)
    rre, rte = posegrid.pose_errors(loaded.gt_pose, scene.gt_pose)
    assert math.isclose(rre, 0.0, abs_tol=1e-6)
    assert math.isclose(rte, 0.0, abs_tol=1e-9)
