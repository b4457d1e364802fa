#pragma once

#include <functional>
#include <vector>

#include "posegrid/features.hpp"
#include "posegrid/geometry.hpp"

namespace posegrid {

/// Projection of the cloud under one candidate pose, scattered into the image
/// grid: mean-aggregated 3D features, per-pixel hit counts and sum-aggregated
/// 3D weights. Pixels nobody projects to stay all-zero.
struct AggregatedMap {
  int height = 0;
  int width = 0;
  RowMatrixXd features;       // (height*width) x f
  Eigen::VectorXi occupancy;  // height*width
  Eigen::VectorXd weights;    // height*width, sum of point weights

  int index(int u, int v) const { return v * width + u; }
  void resize(int h, int w, int f);
};

/// One unit of the pose-based cost volume. A view contract: it bundles the
/// image-feature half and the aggregated half of the 2f-channel concatenation
/// plus both weight planes without copying; referenced storage must outlive
/// the unit.
struct CostVolumeUnit {
  const FeatureMap2D* image_features = nullptr;
  const ConfidenceMap2D* image_weights = nullptr;
  const AggregatedMap* aggregated = nullptr;
  int candidate_index = 0;

  int height() const { return image_features->height; }
  int width() const { return image_features->width; }
  int feature_dim() const { return image_features->dim(); }
  int channel_count() const { return 2 * feature_dim(); }
};

/// Single-pass scatter of features, occupancy and (optionally) weights under
/// one pose, reusing the caller's buffer. Accumulation runs in double
/// precision; mean division happens once per occupied pixel at the end.
void aggregate_into(const PointCloud& cloud, const FeatureSet3D& features,
                    const ConfidenceSet3D* point_weights, const Pose& pose,
                    const CameraIntrinsics& intrinsics, AggregatedMap& out);

AggregatedMap aggregate_3d(const PointCloud& cloud,
                           const FeatureSet3D& features, const Pose& pose,
                           const CameraIntrinsics& intrinsics);

Eigen::VectorXd aggregate_weights(const PointCloud& cloud,
                                  const ConfidenceSet3D& weights,
                                  const Pose& pose,
                                  const CameraIntrinsics& intrinsics);

/// Bundles the parts into a unit after checking shape agreement.
CostVolumeUnit build_unit(const FeatureMap2D& image_features,
                          const ConfidenceMap2D& image_weights,
                          const AggregatedMap& aggregated, int index);

/// Everything needed to build one unit per candidate pose.
struct VolumeInputs {
  const PointCloud* cloud = nullptr;
  const FeatureSet3D* features = nullptr;
  const ConfidenceSet3D* point_weights = nullptr;  // may be null: all-ones
  const FeatureMap2D* image_features = nullptr;
  const ConfidenceMap2D* image_weights = nullptr;
  const CameraIntrinsics* intrinsics = nullptr;
};

using UnitVisitor = std::function<void(const CostVolumeUnit&)>;

/// Streams exactly candidates.size() units to the visitor in candidate order,
/// materializing at most segment_size aggregated maps at a time. Units within
/// a segment are built in parallel across up to `workers` threads; the visitor
/// runs sequentially. Unit contents are independent of segment_size and of the
/// worker count.
void build_volume(const std::vector<Pose>& candidates, const VolumeInputs& in,
                  int segment_size, const UnitVisitor& visit, int workers = 1);

/// Test hook counting concurrently materialized units inside build_volume.
namespace volume_instrumentation {
void reset();
int peak_live_units();
}  // namespace volume_instrumentation

}  // namespace posegrid
