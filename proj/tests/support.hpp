#pragma once

#include <random>

#include "posegrid/features.hpp"
#include "posegrid/geometry.hpp"
#include "posegrid/harness.hpp"

namespace posegrid::testing {

inline CameraIntrinsics small_intrinsics(int width = 16, int height = 12) {
  CameraIntrinsics k;
  k.fx = 10.0;
  k.fy = 11.0;
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  k.width = width;
  k.height = height;
  return k;
}

/// Scene config small enough for tight test loops.
inline SceneGenConfig small_scene_config(int points = 2048, int dim = 8) {
  SceneGenConfig config;
  config.point_count = points;
  config.extent = 30.0;
  config.features.dim = dim;
  return config;
}

inline PointCloud random_cloud(int count, std::uint64_t seed,
                               double spread = 10.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-spread, spread);
  PointCloud cloud;
  cloud.points.resize(count, 3);
  for (int i = 0; i < count; ++i) {
    cloud.points(i, 0) = coord(rng);
    cloud.points(i, 1) = coord(rng);
    cloud.points(i, 2) = coord(rng) + 2.0 * spread;  // mostly in front
  }
  return cloud;
}

inline FeatureSet3D random_features(int count, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  FeatureSet3D set;
  set.values.resize(count, dim);
  for (int i = 0; i < count; ++i) {
    for (int c = 0; c < dim; ++c) {
      set.values(i, c) = gauss(rng);
    }
  }
  return set;
}

}  // namespace posegrid::testing
