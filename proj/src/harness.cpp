#include "posegrid/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "posegrid/parallel.hpp"
#include "posegrid/rng.hpp"

namespace posegrid {

namespace {

constexpr std::uint64_t kSceneStream = 0x5CE7E;
constexpr std::uint64_t kSceneFeatureStream = 0xFEA7;
constexpr std::uint64_t kPerturbStream = 0x9E27;
constexpr std::uint64_t kSubsampleStream = 0x5AB5A;

double draw_unit(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double draw_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * draw_unit(rng);
}

struct Primitive {
  double cx = 0.0;  // footprint center on the ground
  double cz = 0.0;
  double width = 0.0;   // x extent
  double depth = 0.0;   // z extent
  double height = 0.0;  // rises from the ground along -y
};

// Surface sample over the four side faces and the top (the bottom sits on the
// ground plane and stays invisible).
Vec3 sample_primitive_surface(const Primitive& box, std::mt19937_64& rng) {
  const double top = box.width * box.depth;
  const double side_x = box.depth * box.height;  // +x and -x faces
  const double side_z = box.width * box.height;  // +z and -z faces
  const double total = top + 2.0 * side_x + 2.0 * side_z;
  double pick = draw_unit(rng) * total;
  const double u = draw_unit(rng);
  const double v = draw_unit(rng);
  const double hw = box.width / 2.0;
  const double hd = box.depth / 2.0;
  if (pick < top) {
    return {box.cx + (u - 0.5) * box.width, -box.height,
            box.cz + (v - 0.5) * box.depth};
  }
  pick -= top;
  if (pick < 2.0 * side_x) {
    const double sign = pick < side_x ? 1.0 : -1.0;
    return {box.cx + sign * hw, -u * box.height,
            box.cz + (v - 0.5) * box.depth};
  }
  pick -= 2.0 * side_x;
  const double sign = pick < side_z ? 1.0 : -1.0;
  return {box.cx + (u - 0.5) * box.width, -v * box.height,
          box.cz + sign * hd};
}

struct VoxelHash {
  std::size_t operator()(const std::array<std::int64_t, 3>& key) const {
    std::uint64_t h = 0x9E3779B97F4A7C15ULL;
    for (const std::int64_t k : key) {
      h ^= static_cast<std::uint64_t>(k) + 0x9E3779B97F4A7C15ULL + (h << 6) +
           (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

void SceneGenConfig::validate() const {
  if (point_count < 1) {
    throw std::invalid_argument("SceneGenConfig: point_count must be >= 1");
  }
  if (!(extent > 0.0)) {
    throw std::invalid_argument("SceneGenConfig: extent must be positive");
  }
  if (primitive_count < 0 || max_attempts < 1) {
    throw std::invalid_argument("SceneGenConfig: bad counts");
  }
  if (!(ground_fraction >= 0.0 && ground_fraction <= 1.0) ||
      !(min_frustum_fraction >= 0.0 && min_frustum_fraction <= 1.0) ||
      !(visible_fraction >= 0.0 && visible_fraction <= 1.0)) {
    throw std::invalid_argument("SceneGenConfig: fractions outside [0,1]");
  }
  if (!(visible_min_depth >= 0.0)) {
    throw std::invalid_argument(
        "SceneGenConfig: visible_min_depth must be >= 0");
  }
  if (!(band_widen >= 1.0)) {
    throw std::invalid_argument("SceneGenConfig: band_widen must be >= 1");
  }
  intrinsics.validate();
  features.validate();
}

ScenePair generate_scene(const SceneGenConfig& config, std::uint64_t seed,
                         int scene_id) {
  config.validate();
  std::mt19937_64 rng(mix_seed(seed, kSceneStream));
  const double half = config.extent / 2.0;
  // Oversampled pool the final cloud is drawn from once the camera is placed.
  const int pool_count = 6 * config.point_count;

  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    PointCloud pool;
    pool.points.resize(pool_count, 3);
    const int ground_count = std::min(
        pool_count,
        static_cast<int>(std::lround(config.ground_fraction * pool_count)));
    for (int i = 0; i < ground_count; ++i) {
      pool.points.row(i) = Vec3(draw_range(rng, -half, half), 0.0,
                                draw_range(rng, -half, half));
    }

    std::vector<Primitive> primitives;
    primitives.reserve(static_cast<std::size_t>(config.primitive_count));
    for (int p = 0; p < config.primitive_count; ++p) {
      Primitive box;
      box.cx = draw_range(rng, -0.8 * half, 0.8 * half);
      box.cz = draw_range(rng, -0.8 * half, 0.8 * half);
      if (p % 3 == 2) {  // every third primitive is a thin wall
        box.width = draw_range(rng, 4.0, 12.0);
        box.depth = 0.2;
        box.height = draw_range(rng, 2.5, 6.0);
      } else {
        box.width = draw_range(rng, 1.0, 6.0);
        box.depth = draw_range(rng, 1.0, 6.0);
        box.height = draw_range(rng, 2.0, 8.0);
      }
      primitives.push_back(box);
    }
    for (int i = ground_count; i < pool_count; ++i) {
      if (primitives.empty()) {
        pool.points.row(i) = Vec3(draw_range(rng, -half, half), 0.0,
                                  draw_range(rng, -half, half));
      } else {
        const auto p = static_cast<std::size_t>(rng() % primitives.size());
        pool.points.row(i) = sample_primitive_surface(primitives[p], rng);
      }
    }

    // A level camera in a gravity-aligned scene sees vertical structure with
    // rows that match from any heading, so opposite views of a wall can
    // nearly alias each other. The downward pitch (plus a little roll) makes
    // the row pattern heading-dependent and breaks that symmetry.
    const double yaw = draw_range(rng, 0.0, 360.0);
    const double pitch = draw_range(rng, 4.0, 12.0);
    const double roll = draw_range(rng, -4.0, 4.0);
    const double height = draw_range(rng, 1.2, 2.2);
    const double place_r = 0.3 * half * std::sqrt(draw_unit(rng));
    const double place_a = draw_range(rng, 0.0, 2.0 * M_PI);
    const Vec3 center(place_r * std::cos(place_a), -height,
                      place_r * std::sin(place_a));
    const Mat3 rotation = euler_to_rotation(yaw, pitch, roll);
    const Pose gt_pose(rotation, -rotation * center);

    // The cloud is composed around the chosen view: mostly points the camera
    // actually sees (a depth-capture regime, so any candidate pose either
    // collects a dense slice of the visible volume or almost nothing), plus
    // a peripheral band just outside the frustum and in front of the depth
    // floor. Band points share pixels with visible points under poses that
    // grab only a thin sliver of the visible volume, which keeps such poses
    // from being judged on a handful of lucky pixels; poses facing away
    // entirely see no points at all. The depth floor matters because
    // close-by points subtend large angles from displaced positions and
    // would otherwise show up alone in wrong-facing views.
    const auto mask = frustum_mask(pool, gt_pose, config.intrinsics);
    CameraIntrinsics widened = config.intrinsics;
    widened.fx /= config.band_widen;
    widened.fy /= config.band_widen;
    const auto band_mask = frustum_mask(pool, gt_pose, widened);
    std::vector<int> in_idx;
    std::vector<int> out_idx;
    for (int i = 0; i < pool_count; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const double depth =
          (gt_pose.rotation() * pool.points.row(i).transpose() +
           gt_pose.translation())
              .z();
      if (mask[s] != 0 && depth >= config.visible_min_depth) {
        in_idx.push_back(i);
      } else if (band_mask[s] != 0) {
        out_idx.push_back(i);
      }
    }
    const int in_count = std::max(
        1, static_cast<int>(
               std::lround(config.visible_fraction * config.point_count)));
    const int out_count = config.point_count - in_count;
    const int min_in = static_cast<int>(
        std::ceil(config.min_frustum_fraction * pool_count));
    if (static_cast<int>(in_idx.size()) < std::max(in_count, min_in) ||
        static_cast<int>(out_idx.size()) < out_count) {
      continue;
    }

    // Selection sampling: P(take) = need/left per scanned element, unbiased
    // and independent of library internals, keeps pool order.
    std::vector<int> keep;
    keep.reserve(static_cast<std::size_t>(config.point_count));
    const auto take = [&rng, &keep](const std::vector<int>& src, int want) {
      int need = want;
      int left = static_cast<int>(src.size());
      for (const int idx : src) {
        if (need == 0) {
          break;
        }
        if (draw_unit(rng) * left < need) {
          keep.push_back(idx);
          --need;
        }
        --left;
      }
    };
    take(in_idx, in_count);
    take(out_idx, out_count);
    std::sort(keep.begin(), keep.end());

    PointCloud cloud;
    cloud.points.resize(config.point_count, 3);
    for (int i = 0; i < config.point_count; ++i) {
      cloud.points.row(i) = pool.points.row(keep[static_cast<std::size_t>(i)]);
    }

    OracleFeatureConfig features = config.features;
    features.seed = mix_seed(seed, kSceneFeatureStream);
    ScenePair scene;
    scene.cloud = std::move(cloud);
    scene.intrinsics = config.intrinsics;
    scene.gt_pose = gt_pose;
    auto [map2d, set3d] = oracle_features(scene.cloud, gt_pose,
                                          config.intrinsics, features);
    auto [conf2d, conf3d] = oracle_confidence(scene.cloud, gt_pose,
                                              config.intrinsics, features);
    scene.features = {std::move(map2d), std::move(set3d), std::move(conf2d),
                      std::move(conf3d)};
    scene.scene_id = scene_id;
    scene.seed = seed;
    scene.validate();
    return scene;
  }
  throw std::runtime_error(
      "generate_scene: frustum coverage unattainable after " +
      std::to_string(config.max_attempts) + " attempts (seed " +
      std::to_string(seed) + ")");
}

void PerturbConfig::validate() const {
  if (!(yaw_range_deg >= 0.0) || !(planar_radius_m >= 0.0)) {
    throw std::invalid_argument("PerturbConfig: ranges must be >= 0");
  }
}

Pose perturb_problem(const ScenePair& scene, const PerturbConfig& config,
                     std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(mix_seed(seed, kPerturbStream));
  const double yaw = config.yaw_range_deg * draw_unit(rng);
  const double angle = 2.0 * M_PI * draw_unit(rng);
  const double radius = config.planar_radius_m * std::sqrt(draw_unit(rng));
  const Vec3 offset(radius * std::cos(angle), 0.0, radius * std::sin(angle));
  return compose_pose(scene.gt_pose, euler_to_rotation(yaw, 0.0, 0.0),
                      offset);
}

Stats compute_stats(const std::vector<double>& values) {
  Stats stats;
  if (values.empty()) {
    return stats;
  }
  stats.valid = true;
  stats.mean = std::accumulate(values.begin(), values.end(), 0.0) /
               static_cast<double>(values.size());
  double sq = 0.0;
  for (const double v : values) {
    sq += (v - stats.mean) * (v - stats.mean);
  }
  stats.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  return stats;
}

void SuiteConfig::validate() const {
  if (scene_count < 1) {
    throw std::invalid_argument("SuiteConfig: at least one scene required");
  }
  scene.validate();
  perturb.validate();
  engine.validate();
  if (!(thresholds.tau_r_deg > 0.0) || !(thresholds.tau_t_m > 0.0)) {
    throw std::invalid_argument("SuiteConfig: thresholds must be positive");
  }
}

BenchmarkReport run_benchmark(const SuiteConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(config.scene_count);
  std::vector<SceneRecord> records(n);

  parallel_for(n, config.workers, [&](std::size_t i) {
    const std::uint64_t scene_seed = mix_seed(config.seed, i + 1);
    const ScenePair scene =
        generate_scene(config.scene, scene_seed, static_cast<int>(i));
    const Pose initial = perturb_problem(scene, config.perturb, scene_seed);

    SceneRecord record;
    record.scene_id = static_cast<int>(i);
    record.seed = scene_seed;
    const PoseErrors initial_errors = pose_errors(initial, scene.gt_pose);
    record.initial_rre_deg = initial_errors.rre_deg;
    record.initial_rte_m = initial_errors.rte_m;

    EngineConfig engine = config.engine;
    engine.initial_pose = initial;
    try {
      const RegistrationResult result = run_registration(scene, engine, true);
      const PoseErrors errors = pose_errors(result.final_pose, scene.gt_pose);
      record.rre_deg = errors.rre_deg;
      record.rte_m = errors.rte_m;
      record.iterations_run = result.iterations_run;
      record.success = errors.rre_deg < config.thresholds.tau_r_deg &&
                       errors.rte_m < config.thresholds.tau_t_m;
    } catch (const NoOverlapError&) {
      record.no_overlap = true;
      record.rre_deg = std::numeric_limits<double>::quiet_NaN();
      record.rte_m = std::numeric_limits<double>::quiet_NaN();
    }
    records[i] = record;
  });

  BenchmarkReport report;
  report.scene_count = config.scene_count;
  report.thresholds = config.thresholds;
  report.scenes = std::move(records);
  std::vector<double> rte_success, rre_success, rte_full, rre_full;
  for (const SceneRecord& record : report.scenes) {
    if (record.no_overlap) {
      continue;
    }
    rte_full.push_back(record.rte_m);
    rre_full.push_back(record.rre_deg);
    if (record.success) {
      ++report.success_count;
      rte_success.push_back(record.rte_m);
      rre_success.push_back(record.rre_deg);
    }
  }
  report.rr = static_cast<double>(report.success_count) /
              static_cast<double>(report.scene_count);
  report.rte_success = compute_stats(rte_success);
  report.rre_success = compute_stats(rre_success);
  report.rte_full = compute_stats(rte_full);
  report.rre_full = compute_stats(rre_full);
  return report;
}

PointCloud load_cloud(const std::string& path,
                      const CloudLoadOptions& options) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_cloud: cannot open " + path);
  }
  std::vector<Vec3> points;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    std::istringstream iss(line);
    double x = 0.0, y = 0.0, z = 0.0;
    if (!(iss >> x >> y >> z)) {
      throw std::runtime_error("load_cloud: " + path + ":" +
                               std::to_string(line_number) +
                               ": expected three floats");
    }
    std::string trailing;
    if (iss >> trailing) {
      throw std::runtime_error("load_cloud: " + path + ":" +
                               std::to_string(line_number) +
                               ": trailing content");
    }
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      throw std::runtime_error("load_cloud: " + path + ":" +
                               std::to_string(line_number) +
                               ": non-finite value");
    }
    points.emplace_back(x, y, z);
  }
  if (points.empty()) {
    throw std::runtime_error("load_cloud: " + path + ": no points");
  }
  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    cloud.points.row(static_cast<Eigen::Index>(i)) = points[i];
  }
  if (options.preprocess) {
    cloud = voxel_downsample(cloud, options.voxel_size);
    cloud = random_subsample(cloud, options.sample_count, options.seed);
  }
  return cloud;
}

void save_cloud(const std::string& path, const PointCloud& cloud) {
  cloud.validate();
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_cloud: cannot open " + path);
  }
  char buffer[128];
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    std::snprintf(buffer, sizeof(buffer), "%.9g %.9g %.9g\n",
                  cloud.points(i, 0), cloud.points(i, 1), cloud.points(i, 2));
    out << buffer;
  }
  if (!out) {
    throw std::runtime_error("save_cloud: write failed for " + path);
  }
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
  cloud.validate();
  if (!(voxel_size > 0.0)) {
    throw std::invalid_argument("voxel_downsample: voxel size must be > 0");
  }
  std::unordered_map<std::array<std::int64_t, 3>, char, VoxelHash> seen;
  seen.reserve(static_cast<std::size_t>(cloud.size()));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const std::array<std::int64_t, 3> key = {
        static_cast<std::int64_t>(std::floor(cloud.points(i, 0) / voxel_size)),
        static_cast<std::int64_t>(std::floor(cloud.points(i, 1) / voxel_size)),
        static_cast<std::int64_t>(
            std::floor(cloud.points(i, 2) / voxel_size))};
    if (seen.emplace(key, 1).second) {
      keep.push_back(i);
    }
  }
  PointCloud out;
  out.points.resize(static_cast<Eigen::Index>(keep.size()), 3);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.points.row(static_cast<Eigen::Index>(i)) = cloud.points.row(keep[i]);
  }
  return out;
}

PointCloud random_subsample(const PointCloud& cloud, int sample_count,
                            std::uint64_t seed) {
  cloud.validate();
  if (sample_count < 1) {
    throw std::invalid_argument("random_subsample: sample_count must be >= 1");
  }
  if (cloud.size() <= sample_count) {
    return cloud;
  }
  std::mt19937_64 rng(mix_seed(seed, kSubsampleStream));
  std::vector<Eigen::Index> indices(static_cast<std::size_t>(cloud.size()));
  std::iota(indices.begin(), indices.end(), Eigen::Index{0});
  for (int i = 0; i < sample_count; ++i) {
    const auto j =
        i + static_cast<Eigen::Index>(
                rng() % static_cast<std::uint64_t>(cloud.size() - i));
    std::swap(indices[static_cast<std::size_t>(i)],
              indices[static_cast<std::size_t>(j)]);
  }
  indices.resize(static_cast<std::size_t>(sample_count));
  std::sort(indices.begin(), indices.end());
  PointCloud out;
  out.points.resize(sample_count, 3);
  for (int i = 0; i < sample_count; ++i) {
    out.points.row(i) = cloud.points.row(indices[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace posegrid
