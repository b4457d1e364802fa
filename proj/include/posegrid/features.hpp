#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "posegrid/geometry.hpp"

namespace posegrid {

using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-pixel feature map; row v*width+u holds the feature of pixel (u, v).
struct FeatureMap2D {
  int height = 0;
  int width = 0;
  RowMatrixXd values;  // (height*width) x dim

  int dim() const { return static_cast<int>(values.cols()); }
  int index(int u, int v) const { return v * width + u; }
  void validate() const;
};

/// Per-point feature set, one row per cloud point.
struct FeatureSet3D {
  RowMatrixXd values;  // N x dim

  int dim() const { return static_cast<int>(values.cols()); }
  void validate() const;
};

struct ConfidenceMap2D {
  int height = 0;
  int width = 0;
  Eigen::VectorXd values;  // height*width, in [0,1]

  int index(int u, int v) const { return v * width + u; }
  void validate() const;
};

struct ConfidenceSet3D {
  Eigen::VectorXd values;  // N, in [0,1]

  void validate() const;
};

enum class OutsideMode { kRandom, kZero };

/// Controls the synthetic feature provider that stands in for a learned
/// backbone. With noise_sigma = 0 and no flips, feature similarity coincides
/// with geometric alignment by construction. conf_flip_prob corrupts points,
/// not just labels: a flipped visible point has its feature replaced by
/// random garbage and is labeled 0, a flipped outside point keeps its
/// garbage feature but is wrongly labeled 1.
struct OracleFeatureConfig {
  int dim = 32;
  double noise_sigma = 0.0;
  OutsideMode outside_mode = OutsideMode::kRandom;
  double conf_flip_prob = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Unit-normalized sinusoidal encoding of a pixel position. Half the channels
/// encode u, half v; within each half, sin/cos pairs at geometrically spaced
/// wavelengths from 2*max(W,H) pixels down to max(W,H)/2 (floor 8) pixels,
/// so encoding distance grows smoothly with pixel displacement.
/// Requires dim >= 4.
Eigen::VectorXd positional_encoding(int u, int v, int width, int height,
                                    int dim);

/// 2D map: the positional encoding of every pixel. 3D set: for unflipped
/// points inside the ground-truth frustum, the encoding of their ground-truth
/// pixel plus Gaussian noise; flipped visible points get a random unit
/// vector; outside points get the configured outside_mode feature.
std::pair<FeatureMap2D, FeatureSet3D> oracle_features(
    const PointCloud& cloud, const Pose& gt_pose,
    const CameraIntrinsics& intrinsics, const OracleFeatureConfig& config);

/// 3D confidence: the ground-truth frustum mask, with flipped points
/// inverted (matching the feature corruption in oracle_features). 2D
/// confidence: 1 where at least one point projects under the ground-truth
/// pose into the pixel's 3x3 neighborhood (covered area, not exact hit),
/// with pixel labels independently flipped at conf_flip_prob.
std::pair<ConfidenceMap2D, ConfidenceSet3D> oracle_confidence(
    const PointCloud& cloud, const Pose& gt_pose,
    const CameraIntrinsics& intrinsics, const OracleFeatureConfig& config);

/// Rows with confidence < threshold are replaced by zeros; 2D features are
/// never zeroed. Idempotent.
FeatureSet3D zero_out_inferior(const FeatureSet3D& features,
                               const ConfidenceSet3D& confidence,
                               double threshold = 0.5);

/// All tensors one provider hands to the engine for a scene.
struct FeatureBundle {
  FeatureMap2D map2d;
  FeatureSet3D set3d;
  ConfidenceMap2D conf2d;
  ConfidenceSet3D conf3d;
};

struct FeatureImportPaths {
  std::string map2d;   // dims [H, W, f]
  std::string set3d;   // dims [N, f]
  std::string conf2d;  // dims [H, W]
  std::string conf3d;  // dims [N]
};

/// Loads externally computed features from the flat tensor container and
/// checks them against the expected image and cloud sizes.
FeatureBundle load_feature_bundle(const FeatureImportPaths& paths,
                                  const CameraIntrinsics& intrinsics,
                                  Eigen::Index point_count);

}  // namespace posegrid
