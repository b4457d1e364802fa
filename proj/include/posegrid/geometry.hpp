#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace posegrid {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

// Tolerance for rotation orthonormality checks.
inline constexpr double kOrthonormalTol = 1e-9;

// Depths in (0, kMinDepth] are treated as behind the camera so that the
// perspective division stays well conditioned near the image plane.
inline constexpr double kMinDepth = 1e-6;

/// Pinhole camera over a feature-map grid of width x height pixels.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws std::invalid_argument on fx/fy <= 0, principal point outside the
  /// image, or non-positive resolution.
  void validate() const;
};

/// Rigid transformation mapping scene coordinates into the camera frame,
/// q = R * p + t. The rotation is checked for orthonormality on construction.
class Pose {
 public:
  Pose();
  Pose(const Mat3& rotation, const Vec3& translation);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  static Pose identity() { return Pose(); }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

struct PointCloud {
  Eigen::Matrix<double, Eigen::Dynamic, 3> points;  // N x 3, meters

  Eigen::Index size() const { return points.rows(); }
  /// Throws std::invalid_argument if empty or any coordinate is non-finite.
  void validate() const;
};

/// Integer pixel hit by a projected point. Valid only when returned from a
/// successful projection; depth is the camera-frame z of the point.
struct PixelCoord {
  int u = 0;
  int v = 0;
  double depth = 0.0;
};

/// Sub-pixel projection, before rasterization. Used where distances between
/// projections matter (correspondence radii).
struct ContinuousPixel {
  double x = 0.0;
  double y = 0.0;
  double depth = 0.0;
};

/// Projects a scene point into the image. Absent when the point is behind the
/// camera (q_z <= kMinDepth) or the rasterized pixel falls outside the grid.
/// Pixels are half-open squares: u = floor(fx*qx/qz + cx).
std::optional<PixelCoord> project(const Vec3& point, const Pose& pose,
                                  const CameraIntrinsics& intrinsics);

/// Same frustum rule as project(), but keeps the continuous image coordinates.
std::optional<ContinuousPixel> project_continuous(
    const Vec3& point, const Pose& pose, const CameraIntrinsics& intrinsics);

/// delta applied on the left: rotation = delta_rotation * base.rotation,
/// translation = base.translation + delta_translation.
/// Throws std::invalid_argument if delta_rotation is not orthonormal.
Pose compose_pose(const Pose& base, const Mat3& delta_rotation,
                  const Vec3& delta_translation);

/// Intrinsic yaw-pitch-roll about the camera-frame Y, X and Z axes, applied in
/// that order: R = Ry(yaw) * Rx(pitch) * Rz(roll). Angles in degrees.
Mat3 euler_to_rotation(double yaw_deg, double pitch_deg, double roll_deg);

struct PoseErrors {
  double rre_deg = 0.0;  // geodesic rotation angle, degrees
  double rte_m = 0.0;    // Euclidean translation distance, meters
};

PoseErrors pose_errors(const Pose& estimate, const Pose& truth);

/// Entry j is 1 iff project(points.row(j)) is present.
std::vector<std::uint8_t> frustum_mask(const PointCloud& cloud,
                                       const Pose& pose,
                                       const CameraIntrinsics& intrinsics);

}  // namespace posegrid
