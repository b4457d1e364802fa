"""Matching-free image-to-point-cloud registration.

Thin wrapper over the C++ core: synthesize scenes, perturb them into
registration problems and run the coarse-to-fine pose search. Configs are
JSON strings with the same schema the CLI uses.
"""

from posegrid._core import (
    CameraIntrinsics,
    Pose,
    RegistrationResult,
    ScenePair,
    euler_to_rotation,
    generate_scene,
    load_scene_file,
    perturb_problem,
    pose_errors,
    project,
    run_benchmark,
    run_registration,
    write_scene_files,
)

__all__ = [
    "CameraIntrinsics",
    "Pose",
    "RegistrationResult",
    "ScenePair",
    "euler_to_rotation",
    "generate_scene",
    "load_scene_file",
    "perturb_problem",
    "pose_errors",
    "project",
    "run_benchmark",
    "run_registration",
    "write_scene_files",
]
