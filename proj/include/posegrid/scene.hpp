#pragma once

#include <cstdint>

#include "posegrid/features.hpp"
#include "posegrid/geometry.hpp"

namespace posegrid {

/// One registration problem instance: a scene cloud, the query image's feature
/// bundle, the camera intrinsics and the ground-truth camera pose that the
/// engine is asked to recover.
struct ScenePair {
  PointCloud cloud;
  CameraIntrinsics intrinsics;
  Pose gt_pose;
  FeatureBundle features;
  int scene_id = 0;
  std::uint64_t seed = 0;

  /// Requires at least one point inside the ground-truth frustum.
  void validate() const;
};

}  // namespace posegrid
