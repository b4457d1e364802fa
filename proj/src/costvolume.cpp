#include "posegrid/costvolume.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "posegrid/parallel.hpp"

namespace posegrid {

namespace {

std::atomic<int> g_live_units{0};
std::atomic<int> g_peak_live_units{0};

void note_units_live(int delta) {
  if (delta > 0) {
    const int live = g_live_units.fetch_add(delta) + delta;
    int peak = g_peak_live_units.load();
    while (live > peak && !g_peak_live_units.compare_exchange_weak(peak, live)) {
    }
  } else {
    g_live_units.fetch_add(delta);
  }
}

}  // namespace

namespace volume_instrumentation {

void reset() {
  g_live_units.store(0);
  g_peak_live_units.store(0);
}

int peak_live_units() { return g_peak_live_units.load(); }

}  // namespace volume_instrumentation

void AggregatedMap::resize(int h, int w, int f) {
  height = h;
  width = w;
  features.setZero(static_cast<Eigen::Index>(h) * w, f);
  occupancy.setZero(static_cast<Eigen::Index>(h) * w);
  weights.setZero(static_cast<Eigen::Index>(h) * w);
}

void aggregate_into(const PointCloud& cloud, const FeatureSet3D& features,
                    const ConfidenceSet3D* point_weights, const Pose& pose,
                    const CameraIntrinsics& intrinsics, AggregatedMap& out) {
  const Eigen::Index n = cloud.size();
  if (features.values.rows() != n) {
    throw std::invalid_argument("aggregate: feature count does not match cloud");
  }
  if (point_weights != nullptr && point_weights->values.size() != n) {
    throw std::invalid_argument("aggregate: weight count does not match cloud");
  }
  out.resize(intrinsics.height, intrinsics.width,
             static_cast<int>(features.values.cols()));

  const Mat3& rot = pose.rotation();
  const Vec3& t = pose.translation();
  const double r00 = rot(0, 0), r01 = rot(0, 1), r02 = rot(0, 2);
  const double r10 = rot(1, 0), r11 = rot(1, 1), r12 = rot(1, 2);
  const double r20 = rot(2, 0), r21 = rot(2, 1), r22 = rot(2, 2);
  const double* px = cloud.points.col(0).data();
  const double* py = cloud.points.col(1).data();
  const double* pz = cloud.points.col(2).data();

  for (Eigen::Index j = 0; j < n; ++j) {
    const double x = px[j], y = py[j], z = pz[j];
    const double qz = r20 * x + r21 * y + r22 * z + t.z();
    if (!(qz > kMinDepth)) {
      continue;
    }
    const double qx = r00 * x + r01 * y + r02 * z + t.x();
    const double qy = r10 * x + r11 * y + r12 * z + t.y();
    const int u = static_cast<int>(
        std::floor(intrinsics.fx * qx / qz + intrinsics.cx));
    if (u < 0 || u >= intrinsics.width) {
      continue;
    }
    const int v = static_cast<int>(
        std::floor(intrinsics.fy * qy / qz + intrinsics.cy));
    if (v < 0 || v >= intrinsics.height) {
      continue;
    }
    const int idx = out.index(u, v);
    out.features.row(idx) += features.values.row(j);
    out.occupancy[idx] += 1;
    if (point_weights != nullptr) {
      out.weights[idx] += point_weights->values[j];
    }
  }

  for (Eigen::Index idx = 0; idx < out.occupancy.size(); ++idx) {
    const int count = out.occupancy[idx];
    if (count > 1) {
      out.features.row(idx) /= static_cast<double>(count);
    }
  }
}

AggregatedMap aggregate_3d(const PointCloud& cloud,
                           const FeatureSet3D& features, const Pose& pose,
                           const CameraIntrinsics& intrinsics) {
  AggregatedMap out;
  aggregate_into(cloud, features, nullptr, pose, intrinsics, out);
  return out;
}

Eigen::VectorXd aggregate_weights(const PointCloud& cloud,
                                  const ConfidenceSet3D& weights,
                                  const Pose& pose,
                                  const CameraIntrinsics& intrinsics) {
  // Feature payload is irrelevant here; a 1-wide zero set keeps the pass cheap.
  FeatureSet3D dummy;
  dummy.values.setZero(cloud.size(), 1);
  AggregatedMap out;
  aggregate_into(cloud, dummy, &weights, pose, intrinsics, out);
  return out.weights;
}

CostVolumeUnit build_unit(const FeatureMap2D& image_features,
                          const ConfidenceMap2D& image_weights,
                          const AggregatedMap& aggregated, int index) {
  if (aggregated.height != image_features.height ||
      aggregated.width != image_features.width ||
      static_cast<int>(aggregated.features.cols()) != image_features.dim()) {
    throw std::invalid_argument("build_unit: aggregated map shape mismatch");
  }
  if (image_weights.height != image_features.height ||
      image_weights.width != image_features.width) {
    throw std::invalid_argument("build_unit: weight plane shape mismatch");
  }
  return CostVolumeUnit{&image_features, &image_weights, &aggregated, index};
}

void build_volume(const std::vector<Pose>& candidates, const VolumeInputs& in,
                  int segment_size, const UnitVisitor& visit, int workers) {
  if (segment_size < 1) {
    throw std::invalid_argument("build_volume: segment_size must be >= 1");
  }
  if (in.cloud == nullptr || in.features == nullptr ||
      in.image_features == nullptr || in.image_weights == nullptr ||
      in.intrinsics == nullptr) {
    throw std::invalid_argument("build_volume: missing inputs");
  }

  const std::size_t n = candidates.size();
  const std::size_t seg =
      std::min<std::size_t>(static_cast<std::size_t>(segment_size), n);
  std::vector<AggregatedMap> slots(seg);

  for (std::size_t start = 0; start < n; start += seg) {
    const std::size_t count = std::min(seg, n - start);
    note_units_live(static_cast<int>(count));
    parallel_for(count, workers, [&](std::size_t s) {
      aggregate_into(*in.cloud, *in.features, in.point_weights,
                     candidates[start + s], *in.intrinsics, slots[s]);
    });
    for (std::size_t s = 0; s < count; ++s) {
      visit(build_unit(*in.image_features, *in.image_weights, slots[s],
                       static_cast<int>(start + s)));
    }
    note_units_live(-static_cast<int>(count));
  }
}

}  // namespace posegrid
