#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "posegrid/engine.hpp"
#include "posegrid/features.hpp"
#include "posegrid/scene.hpp"

namespace posegrid {

/// Synthetic scene recipe: a ground plane plus box/wall primitives sampled as
/// surface points, viewed by a camera standing on the ground plane. The world
/// frame has +Y pointing down, so the camera Y axis is the (inverted) up axis.
/// The cloud is drawn from an oversampled pool after the camera is placed so
/// that visible_fraction of the points lie inside the ground-truth frustum
/// (a depth-capture regime) and the remainder falls in a peripheral band
/// just outside it.
struct SceneGenConfig {
  int point_count = 8192;
  double extent = 40.0;  // square scene side, meters
  int primitive_count = 12;
  double ground_fraction = 0.35;    // share of points on the ground plane
  double visible_fraction = 0.75;   // share inside the ground-truth frustum
  double visible_min_depth = 6.0;   // near clip for the visible share, meters
  double band_widen = 1.7;          // FOV factor bounding the outside band
  double min_frustum_fraction = 0.1;  // placement gate on the raw pool
  int max_attempts = 32;
  CameraIntrinsics intrinsics{24.0, 26.0, 24.0, 12.0, 48, 24};
  OracleFeatureConfig features;  // seed field is overridden per scene

  void validate() const;
};

/// Deterministic per seed. Throws std::runtime_error when no camera placement
/// can fill the visible_fraction composition within max_attempts.
ScenePair generate_scene(const SceneGenConfig& config, std::uint64_t seed,
                         int scene_id = 0);

/// Perturbation ranges for problem construction: full-circle yaw about the up
/// axis and a planar offset drawn uniformly from a disc on the ground.
struct PerturbConfig {
  double yaw_range_deg = 360.0;  // yaw drawn from [0, yaw_range)
  double planar_radius_m = 10.0;

  void validate() const;
};

/// The initial pose handed to the engine: gt_pose composed with the random
/// yaw and planar offset. Zero ranges return gt_pose itself.
Pose perturb_problem(const ScenePair& scene, const PerturbConfig& config,
                     std::uint64_t seed);

struct BenchmarkThresholds {
  double tau_r_deg = 10.0;
  double tau_t_m = 5.0;
};

struct SceneRecord {
  int scene_id = 0;
  std::uint64_t seed = 0;
  bool success = false;
  bool no_overlap = false;
  double initial_rre_deg = 0.0;
  double initial_rte_m = 0.0;
  double rre_deg = 0.0;  // NaN when no_overlap
  double rte_m = 0.0;
  int iterations_run = 0;
};

/// Mean and population standard deviation; valid is false when the sample is
/// empty (serialized as nulls).
struct Stats {
  double mean = 0.0;
  double stddev = 0.0;
  bool valid = false;
};

Stats compute_stats(const std::vector<double>& values);

struct BenchmarkReport {
  int scene_count = 0;
  int success_count = 0;
  double rr = 0.0;
  Stats rte_success;  // success rows only
  Stats rre_success;
  Stats rte_full;  // every scene with an estimate, failures included
  Stats rre_full;
  BenchmarkThresholds thresholds;
  std::vector<SceneRecord> scenes;  // ordered by scene_id
};

struct SuiteConfig {
  int scene_count = 100;
  std::uint64_t seed = 0;
  SceneGenConfig scene;
  PerturbConfig perturb;
  EngineConfig engine;
  BenchmarkThresholds thresholds;
  int workers = 1;  // scenes run in parallel; records stay ordered

  void validate() const;
};

/// Generates, perturbs and registers every scene. A NoOverlap abort on one
/// scene is recorded as a failure row instead of ending the run.
BenchmarkReport run_benchmark(const SuiteConfig& config);

/// ASCII XYZ loader options: voxel downsampling followed by a random
/// subsample, both off by default.
struct CloudLoadOptions {
  bool preprocess = false;
  double voxel_size = 0.1;
  int sample_count = 40960;
  std::uint64_t seed = 0;
};

/// One "x y z" triple per line. Malformed lines are reported with their line
/// number; non-finite values are rejected.
PointCloud load_cloud(const std::string& path,
                      const CloudLoadOptions& options = {});

void save_cloud(const std::string& path, const PointCloud& cloud);

/// First-point-per-voxel downsampling on a grid of the given size, keeping
/// first-appearance order.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size);

/// Uniform random subsample without replacement; original point order is
/// preserved. Returns the cloud unchanged when it has <= sample_count points.
PointCloud random_subsample(const PointCloud& cloud, int sample_count,
                            std::uint64_t seed);

}  // namespace posegrid
