#include "posegrid/json_codec.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "posegrid/tensor_io.hpp"

namespace posegrid {

namespace {

using nlohmann::json;

json stats_to_json(const Stats& stats) {
  if (!stats.valid) {
    return nullptr;
  }
  return json{{"mean", round_sig(stats.mean)},
              {"stddev", round_sig(stats.stddev)}};
}

AxisSampling axis_from_json(const json& j, const AxisSampling& base) {
  AxisSampling axis = base;
  axis.enabled = j.value("enabled", axis.enabled);
  axis.range = j.value("range", axis.range);
  axis.count = j.value("count", axis.count);
  return axis;
}

Tensor map2d_to_tensor(const FeatureMap2D& map) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(map.height),
            static_cast<std::uint32_t>(map.width),
            static_cast<std::uint32_t>(map.dim())};
  t.data.reserve(static_cast<std::size_t>(map.values.size()));
  for (Eigen::Index idx = 0; idx < map.values.rows(); ++idx) {
    for (Eigen::Index c = 0; c < map.values.cols(); ++c) {
      t.data.push_back(static_cast<float>(map.values(idx, c)));
    }
  }
  return t;
}

Tensor set3d_to_tensor(const FeatureSet3D& set) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(set.values.rows()),
            static_cast<std::uint32_t>(set.values.cols())};
  t.data.reserve(static_cast<std::size_t>(set.values.size()));
  for (Eigen::Index idx = 0; idx < set.values.rows(); ++idx) {
    for (Eigen::Index c = 0; c < set.values.cols(); ++c) {
      t.data.push_back(static_cast<float>(set.values(idx, c)));
    }
  }
  return t;
}

Tensor conf2d_to_tensor(const ConfidenceMap2D& conf) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(conf.height),
            static_cast<std::uint32_t>(conf.width)};
  t.data.reserve(static_cast<std::size_t>(conf.values.size()));
  for (Eigen::Index idx = 0; idx < conf.values.size(); ++idx) {
    t.data.push_back(static_cast<float>(conf.values[idx]));
  }
  return t;
}

Tensor conf3d_to_tensor(const ConfidenceSet3D& conf) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(conf.values.size())};
  t.data.reserve(static_cast<std::size_t>(conf.values.size()));
  for (Eigen::Index idx = 0; idx < conf.values.size(); ++idx) {
    t.data.push_back(static_cast<float>(conf.values[idx]));
  }
  return t;
}

}  // namespace

double round_sig(double value, int digits) {
  if (!std::isfinite(value) || value == 0.0) {
    return value;
  }
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*g", digits, value);
  return std::strtod(buffer, nullptr);
}

json pose_to_json(const Pose& pose) {
  json rotation = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      rotation.push_back(pose.rotation()(r, c));
    }
  }
  json translation = json::array();
  for (int i = 0; i < 3; ++i) {
    translation.push_back(pose.translation()[i]);
  }
  return json{{"rotation", rotation}, {"translation", translation}};
}

Pose pose_from_json(const json& j) {
  const auto& rotation = j.at("rotation");
  const auto& translation = j.at("translation");
  if (rotation.size() != 9 || translation.size() != 3) {
    throw std::invalid_argument("pose: expected 9 rotation + 3 translation");
  }
  Mat3 r;
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) {
      r(row, col) = rotation.at(static_cast<std::size_t>(row * 3 + col))
                        .get<double>();
    }
  }
  Vec3 t;
  for (int i = 0; i < 3; ++i) {
    t[i] = translation.at(static_cast<std::size_t>(i)).get<double>();
  }
  return Pose(r, t);
}

json intrinsics_to_json(const CameraIntrinsics& intrinsics) {
  return json{{"fx", intrinsics.fx},         {"fy", intrinsics.fy},
              {"cx", intrinsics.cx},         {"cy", intrinsics.cy},
              {"width", intrinsics.width},   {"height", intrinsics.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics intrinsics;
  intrinsics.fx = j.at("fx").get<double>();
  intrinsics.fy = j.at("fy").get<double>();
  intrinsics.cx = j.at("cx").get<double>();
  intrinsics.cy = j.at("cy").get<double>();
  intrinsics.width = j.at("width").get<int>();
  intrinsics.height = j.at("height").get<int>();
  intrinsics.validate();
  return intrinsics;
}

json registration_result_to_json(const RegistrationResult& result) {
  json trace = json::array();
  for (const IterationRecord& record : result.trace) {
    trace.push_back(json{{"iteration", record.iteration},
                         {"best_index", record.best_index},
                         {"best_score", round_sig(record.best_score)},
                         {"rot_range", round_sig(record.rot_range)},
                         {"trans_range", round_sig(record.trans_range)},
                         {"rre_deg", round_sig(record.rre_deg)},
                         {"rte_m", round_sig(record.rte_m)}});
  }
  return json{{"final_pose", pose_to_json(result.final_pose)},
              {"iterations_run", result.iterations_run},
              {"trace", trace}};
}

json scene_record_to_json(const SceneRecord& record) {
  return json{{"scene_id", record.scene_id},
              {"seed", record.seed},
              {"success", record.success},
              {"no_overlap", record.no_overlap},
              {"initial_rre_deg", round_sig(record.initial_rre_deg)},
              {"initial_rte_m", round_sig(record.initial_rte_m)},
              {"rre_deg", round_sig(record.rre_deg)},
              {"rte_m", round_sig(record.rte_m)},
              {"iterations_run", record.iterations_run}};
}

json report_to_json(const BenchmarkReport& report) {
  json scenes = json::array();
  for (const SceneRecord& record : report.scenes) {
    scenes.push_back(scene_record_to_json(record));
  }
  return json{{"scene_count", report.scene_count},
              {"success_count", report.success_count},
              {"rr", round_sig(report.rr)},
              {"thresholds",
               json{{"tau_r_deg", round_sig(report.thresholds.tau_r_deg)},
                    {"tau_t_m", round_sig(report.thresholds.tau_t_m)}}},
              {"rte_success", stats_to_json(report.rte_success)},
              {"rre_success", stats_to_json(report.rre_success)},
              {"rte_full", stats_to_json(report.rte_full)},
              {"rre_full", stats_to_json(report.rre_full)},
              {"scenes", scenes}};
}

SceneGenConfig scene_gen_from_json(const json& j) {
  SceneGenConfig config;
  config.point_count = j.value("point_count", config.point_count);
  config.extent = j.value("extent", config.extent);
  config.primitive_count = j.value("primitive_count", config.primitive_count);
  config.ground_fraction = j.value("ground_fraction", config.ground_fraction);
  config.visible_fraction =
      j.value("visible_fraction", config.visible_fraction);
  config.visible_min_depth =
      j.value("visible_min_depth", config.visible_min_depth);
  config.band_widen = j.value("band_widen", config.band_widen);
  config.min_frustum_fraction =
      j.value("min_frustum_fraction", config.min_frustum_fraction);
  config.max_attempts = j.value("max_attempts", config.max_attempts);
  if (j.contains("intrinsics")) {
    config.intrinsics = intrinsics_from_json(j.at("intrinsics"));
  }
  if (j.contains("features")) {
    const json& f = j.at("features");
    config.features.dim = f.value("dim", config.features.dim);
    config.features.noise_sigma =
        f.value("noise_sigma", config.features.noise_sigma);
    config.features.conf_flip_prob =
        f.value("conf_flip_prob", config.features.conf_flip_prob);
    const std::string mode = f.value("outside_mode", std::string("random"));
    if (mode == "random") {
      config.features.outside_mode = OutsideMode::kRandom;
    } else if (mode == "zero") {
      config.features.outside_mode = OutsideMode::kZero;
    } else {
      throw std::invalid_argument("features.outside_mode: unknown mode " +
                                  mode);
    }
  }
  config.validate();
  return config;
}

PerturbConfig perturb_from_json(const json& j) {
  PerturbConfig config;
  config.yaw_range_deg = j.value("yaw_range_deg", config.yaw_range_deg);
  config.planar_radius_m = j.value("planar_radius_m", config.planar_radius_m);
  config.validate();
  return config;
}

Schedule schedule_from_json(const json& j) {
  Schedule schedule = Schedule::defaults();
  if (j.is_string()) {
    if (j.get<std::string>() != "default") {
      throw std::invalid_argument("schedule: unknown preset " +
                                  j.get<std::string>());
    }
    return schedule;
  }
  schedule.iterations = j.value("iterations", schedule.iterations);
  schedule.rot_shrink = j.value("rot_shrink", schedule.rot_shrink);
  schedule.trans_shrink = j.value("trans_shrink", schedule.trans_shrink);
  if (j.contains("axes")) {
    const json& axes = j.at("axes");
    static constexpr const char* kRotNames[3] = {"yaw", "pitch", "roll"};
    static constexpr const char* kTransNames[3] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
      if (axes.contains(kRotNames[a])) {
        schedule.initial_space.rotation[a] = axis_from_json(
            axes.at(kRotNames[a]), schedule.initial_space.rotation[a]);
      }
      if (axes.contains(kTransNames[a])) {
        schedule.initial_space.translation[a] = axis_from_json(
            axes.at(kTransNames[a]), schedule.initial_space.translation[a]);
      }
    }
  }
  schedule.validate();
  return schedule;
}

BenchmarkThresholds thresholds_from_json(const json& j) {
  BenchmarkThresholds thresholds;
  thresholds.tau_r_deg = j.value("tau_r_deg", thresholds.tau_r_deg);
  thresholds.tau_t_m = j.value("tau_t_m", thresholds.tau_t_m);
  return thresholds;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig config;
  config.steps = j.value("steps", config.steps);
  config.states_per_step = j.value("states_per_step", config.states_per_step);
  config.learning_rate = j.value("learning_rate", config.learning_rate);
  config.momentum = j.value("momentum", config.momentum);
  config.plateau_window = j.value("plateau_window", config.plateau_window);
  config.plateau_tolerance =
      j.value("plateau_tolerance", config.plateau_tolerance);
  config.min_learning_rate =
      j.value("min_learning_rate", config.min_learning_rate);
  config.grid_points = j.value("grid_points", config.grid_points);
  config.segment_size = j.value("segment_size", config.segment_size);
  config.zoif_threshold = j.value("zoif_threshold", config.zoif_threshold);
  if (j.contains("widths")) {
    config.widths = j.at("widths").get<std::vector<int>>();
  }
  config.seed = j.value("seed", config.seed);
  config.validate();
  return config;
}

EngineConfig engine_config_from_json(const json& j,
                                     const std::string& base_dir) {
  EngineConfig config;
  if (j.contains("schedule")) {
    config.schedule = schedule_from_json(j.at("schedule"));
  }
  const std::string scorer = j.value("scorer", std::string("baseline"));
  if (scorer == "baseline") {
    config.scorer = ScorerChoice::kBaseline;
  } else if (scorer == "conv") {
    config.scorer = ScorerChoice::kConv;
    const std::string params = j.value("params", std::string());
    if (params.empty()) {
      throw std::invalid_argument("engine: conv scorer needs a params path");
    }
    const std::filesystem::path resolved =
        std::filesystem::path(params).is_absolute()
            ? std::filesystem::path(params)
            : std::filesystem::path(base_dir) / params;
    config.scorer_params = std::make_shared<const ScorerParams>(
        load_scorer_params(resolved.string()));
  } else {
    throw std::invalid_argument("engine: unknown scorer " + scorer);
  }
  config.zoif_enabled = j.value("zoif", config.zoif_enabled);
  config.weight2d_enabled = j.value("weight2d", config.weight2d_enabled);
  config.weight3d_enabled = j.value("weight3d", config.weight3d_enabled);
  config.zoif_threshold = j.value("zoif_threshold", config.zoif_threshold);
  config.segment_size = j.value("segment_size", config.segment_size);
  config.workers = j.value("workers", config.workers);
  config.validate();
  return config;
}

SuiteConfig suite_config_from_json(const json& j,
                                   const std::string& base_dir) {
  SuiteConfig config;
  config.scene_count = j.value("scene_count", config.scene_count);
  config.seed = j.value("seed", config.seed);
  if (j.contains("scene")) {
    config.scene = scene_gen_from_json(j.at("scene"));
  }
  if (j.contains("perturb")) {
    config.perturb = perturb_from_json(j.at("perturb"));
  }
  if (j.contains("engine")) {
    config.engine = engine_config_from_json(j.at("engine"), base_dir);
  }
  if (j.contains("thresholds")) {
    config.thresholds = thresholds_from_json(j.at("thresholds"));
  }
  config.workers = j.value("workers", config.workers);
  config.validate();
  return config;
}

SceneFilePaths write_scene_files(const ScenePair& scene,
                                 const std::string& dir,
                                 const std::string& basename) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  SceneFilePaths paths;
  paths.cloud = (fs::path(dir) / (basename + ".xyz")).string();
  paths.map2d = (fs::path(dir) / (basename + ".map2d.bin")).string();
  paths.set3d = (fs::path(dir) / (basename + ".set3d.bin")).string();
  paths.conf2d = (fs::path(dir) / (basename + ".conf2d.bin")).string();
  paths.conf3d = (fs::path(dir) / (basename + ".conf3d.bin")).string();
  paths.json = (fs::path(dir) / (basename + ".json")).string();

  save_cloud(paths.cloud, scene.cloud);
  save_tensor(paths.map2d, map2d_to_tensor(scene.features.map2d));
  save_tensor(paths.set3d, set3d_to_tensor(scene.features.set3d));
  save_tensor(paths.conf2d, conf2d_to_tensor(scene.features.conf2d));
  save_tensor(paths.conf3d, conf3d_to_tensor(scene.features.conf3d));

  const json doc{{"scene_id", scene.scene_id},
                 {"seed", scene.seed},
                 {"intrinsics", intrinsics_to_json(scene.intrinsics)},
                 {"gt_pose", pose_to_json(scene.gt_pose)},
                 {"cloud", basename + ".xyz"},
                 {"features",
                  json{{"map2d", basename + ".map2d.bin"},
                       {"set3d", basename + ".set3d.bin"},
                       {"conf2d", basename + ".conf2d.bin"},
                       {"conf3d", basename + ".conf3d.bin"}}}};
  std::ofstream out(paths.json, std::ios::binary);
  if (!out) {
    throw std::runtime_error("write_scene_files: cannot open " + paths.json);
  }
  out << doc.dump(2) << "\n";
  return paths;
}

ScenePair load_scene_file(const std::string& path, bool* has_gt) {
  namespace fs = std::filesystem;
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_scene_file: cannot open " + path);
  }
  const json doc = json::parse(in);
  const fs::path base = fs::path(path).parent_path();
  const auto resolve = [&](const std::string& rel) {
    return fs::path(rel).is_absolute() ? rel : (base / rel).string();
  };

  ScenePair scene;
  scene.scene_id = doc.value("scene_id", 0);
  scene.seed = doc.value("seed", std::uint64_t{0});
  scene.intrinsics = intrinsics_from_json(doc.at("intrinsics"));
  scene.cloud = load_cloud(resolve(doc.at("cloud").get<std::string>()));

  FeatureImportPaths features;
  const json& f = doc.at("features");
  features.map2d = resolve(f.at("map2d").get<std::string>());
  features.set3d = resolve(f.at("set3d").get<std::string>());
  features.conf2d = resolve(f.at("conf2d").get<std::string>());
  features.conf3d = resolve(f.at("conf3d").get<std::string>());
  scene.features =
      load_feature_bundle(features, scene.intrinsics, scene.cloud.size());

  const bool gt_present = doc.contains("gt_pose");
  if (gt_present) {
    scene.gt_pose = pose_from_json(doc.at("gt_pose"));
    scene.validate();
  }
  if (has_gt != nullptr) {
    *has_gt = gt_present;
  }
  return scene;
}

}  // namespace posegrid
