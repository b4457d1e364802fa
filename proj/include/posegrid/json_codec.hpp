#pragma once

#include <string>

#include <json.hpp>

#include "posegrid/engine.hpp"
#include "posegrid/harness.hpp"
#include "posegrid/scene.hpp"
#include "posegrid/scoring.hpp"

namespace posegrid {

/// Rounds to the given number of significant digits. Report numerics pass
/// through this before serialization; poses do not, because their rotations
/// must survive a round trip within the orthonormality tolerance.
double round_sig(double value, int digits = 9);

nlohmann::json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j);

nlohmann::json intrinsics_to_json(const CameraIntrinsics& intrinsics);
CameraIntrinsics intrinsics_from_json(const nlohmann::json& j);

nlohmann::json registration_result_to_json(const RegistrationResult& result);
nlohmann::json scene_record_to_json(const SceneRecord& record);
nlohmann::json report_to_json(const BenchmarkReport& report);

/// Config parsers. Missing fields keep the documented defaults; values are
/// validated before returning.
SceneGenConfig scene_gen_from_json(const nlohmann::json& j);
PerturbConfig perturb_from_json(const nlohmann::json& j);
Schedule schedule_from_json(const nlohmann::json& j);
BenchmarkThresholds thresholds_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// base_dir resolves the conv scorer's params path.
EngineConfig engine_config_from_json(const nlohmann::json& j,
                                     const std::string& base_dir);
SuiteConfig suite_config_from_json(const nlohmann::json& j,
                                   const std::string& base_dir);

struct SceneFilePaths {
  std::string json;
  std::string cloud;
  std::string map2d;
  std::string set3d;
  std::string conf2d;
  std::string conf3d;
};

/// Writes basename.json plus the cloud (.xyz) and the four feature tensors
/// next to it; the JSON references them by basename, so the directory moves
/// as a unit.
SceneFilePaths write_scene_files(const ScenePair& scene,
                                 const std::string& dir,
                                 const std::string& basename);

/// Loads a scene written by write_scene_files (or hand-assembled to the same
/// schema). *has_gt reports whether the file carried a ground-truth pose;
/// without one, gt_pose is identity and must not be used as truth.
ScenePair load_scene_file(const std::string& path, bool* has_gt = nullptr);

}  // namespace posegrid
