#include "posegrid/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/LU>  // determinant

namespace posegrid {

namespace {

constexpr double kDegToRad = M_PI / 180.0;
constexpr double kRadToDeg = 180.0 / M_PI;

void check_rotation(const Mat3& rotation, const char* what) {
  const Mat3 gram = rotation.transpose() * rotation;
  const double dev = (gram - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!std::isfinite(dev) || dev > kOrthonormalTol) {
    throw std::invalid_argument(std::string(what) +
                                ": rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > kOrthonormalTol) {
    throw std::invalid_argument(std::string(what) +
                                ": rotation determinant is not +1");
  }
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("intrinsics: focal lengths must be positive");
  }
  if (width < 1 || height < 1) {
    throw std::invalid_argument("intrinsics: resolution must be at least 1x1");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw std::invalid_argument(
        "intrinsics: principal point outside the image");
  }
}

Pose::Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

Pose::Pose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  check_rotation(rotation_, "pose");
  if (!translation_.allFinite()) {
    throw std::invalid_argument("pose: translation is not finite");
  }
}

void PointCloud::validate() const {
  if (points.rows() < 1) {
    throw std::invalid_argument("point cloud: at least one point required");
  }
  if (!points.allFinite()) {
    throw std::invalid_argument("point cloud: non-finite coordinate");
  }
}

std::optional<PixelCoord> project(const Vec3& point, const Pose& pose,
                                  const CameraIntrinsics& intrinsics) {
  const Vec3 q = pose.rotation() * point + pose.translation();
  if (!(q.z() > kMinDepth)) {
    return std::nullopt;
  }
  const int u =
      static_cast<int>(std::floor(intrinsics.fx * q.x() / q.z() + intrinsics.cx));
  const int v =
      static_cast<int>(std::floor(intrinsics.fy * q.y() / q.z() + intrinsics.cy));
  if (u < 0 || u >= intrinsics.width || v < 0 || v >= intrinsics.height) {
    return std::nullopt;
  }
  return PixelCoord{u, v, q.z()};
}

std::optional<ContinuousPixel> project_continuous(
    const Vec3& point, const Pose& pose, const CameraIntrinsics& intrinsics) {
  const Vec3 q = pose.rotation() * point + pose.translation();
  if (!(q.z() > kMinDepth)) {
    return std::nullopt;
  }
  const double x = intrinsics.fx * q.x() / q.z() + intrinsics.cx;
  const double y = intrinsics.fy * q.y() / q.z() + intrinsics.cy;
  const int u = static_cast<int>(std::floor(x));
  const int v = static_cast<int>(std::floor(y));
  if (u < 0 || u >= intrinsics.width || v < 0 || v >= intrinsics.height) {
    return std::nullopt;
  }
  return ContinuousPixel{x, y, q.z()};
}

Pose compose_pose(const Pose& base, const Mat3& delta_rotation,
                  const Vec3& delta_translation) {
  check_rotation(delta_rotation, "compose_pose");
  return Pose(delta_rotation * base.rotation(),
              base.translation() + delta_translation);
}

Mat3 euler_to_rotation(double yaw_deg, double pitch_deg, double roll_deg) {
  if (!std::isfinite(yaw_deg) || !std::isfinite(pitch_deg) ||
      !std::isfinite(roll_deg)) {
    throw std::invalid_argument("euler_to_rotation: non-finite angle");
  }
  const double y = yaw_deg * kDegToRad;
  const double p = pitch_deg * kDegToRad;
  const double r = roll_deg * kDegToRad;

  Mat3 ry;
  ry << std::cos(y), 0.0, std::sin(y),
        0.0, 1.0, 0.0,
        -std::sin(y), 0.0, std::cos(y);
  Mat3 rx;
  rx << 1.0, 0.0, 0.0,
        0.0, std::cos(p), -std::sin(p),
        0.0, std::sin(p), std::cos(p);
  Mat3 rz;
  rz << std::cos(r), -std::sin(r), 0.0,
        std::sin(r), std::cos(r), 0.0,
        0.0, 0.0, 1.0;
  return ry * rx * rz;
}

PoseErrors pose_errors(const Pose& estimate, const Pose& truth) {
  // Explicit summation keeps the trace symmetric in its arguments bit-for-bit.
  double trace = 0.0;
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < 3; ++i) {
      trace += estimate.rotation()(i, k) * truth.rotation()(i, k);
    }
  }
  const double c = std::clamp((trace - 1.0) / 2.0, -1.0, 1.0);
  PoseErrors err;
  err.rre_deg = std::acos(c) * kRadToDeg;
  err.rte_m = (estimate.translation() - truth.translation()).norm();
  return err;
}

std::vector<std::uint8_t> frustum_mask(const PointCloud& cloud,
                                       const Pose& pose,
                                       const CameraIntrinsics& intrinsics) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(cloud.size()), 0);
  for (Eigen::Index j = 0; j < cloud.size(); ++j) {
    mask[static_cast<std::size_t>(j)] =
        project(cloud.points.row(j).transpose(), pose, intrinsics).has_value()
            ? 1
            : 0;
  }
  return mask;
}

}  // namespace posegrid
