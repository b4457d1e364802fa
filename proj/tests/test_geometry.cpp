#include <cmath>
#include <doctest.h>

#include <Eigen/LU>

#include "posegrid/geometry.hpp"
#include "support.hpp"

using namespace posegrid;
namespace pt = posegrid::testing;

TEST_SUITE_BEGIN("geometry");

TEST_CASE("principal axis point lands on the principal pixel") {
  const CameraIntrinsics k = pt::small_intrinsics();
  const auto hit = project(Vec3(0.0, 0.0, 5.0), Pose::identity(), k);
  REQUIRE(hit.has_value());
  CHECK(hit->u == static_cast<int>(k.cx));
  CHECK(hit->v == static_cast<int>(k.cy));
  CHECK(hit->depth == doctest::Approx(5.0));
}

TEST_CASE("pixels are half-open floor squares") {
  CameraIntrinsics k = pt::small_intrinsics();
  k.fx = k.fy = 8.0;
  k.cx = 8.0;
  k.cy = 6.0;
  // u = floor(8 * x / z + 8): x/z = 0.124 -> 8.992 -> pixel 8.
  auto hit = project(Vec3(0.124, 0.0, 1.0), Pose::identity(), k);
  REQUIRE(hit.has_value());
  CHECK(hit->u == 8);
  // x/z = 0.125 crosses the boundary exactly -> pixel 9.
  hit = project(Vec3(0.125, 0.0, 1.0), Pose::identity(), k);
  REQUIRE(hit.has_value());
  CHECK(hit->u == 9);
}

TEST_CASE("points behind or beside the frustum are rejected") {
  const CameraIntrinsics k = pt::small_intrinsics();
  CHECK_FALSE(project(Vec3(0.0, 0.0, -1.0), Pose::identity(), k).has_value());
  CHECK_FALSE(project(Vec3(0.0, 0.0, 0.0), Pose::identity(), k).has_value());
  CHECK_FALSE(project(Vec3(50.0, 0.0, 1.0), Pose::identity(), k).has_value());
  // Depth at the near-clip boundary is treated as behind.
  CHECK_FALSE(
      project(Vec3(0.0, 0.0, kMinDepth), Pose::identity(), k).has_value());
}

TEST_CASE("continuous projection agrees with the rasterized pixel") {
  const CameraIntrinsics k = pt::small_intrinsics();
  const Pose pose(euler_to_rotation(20.0, -5.0, 3.0), Vec3(0.3, -0.2, 1.0));
  const PointCloud cloud = pt::random_cloud(200, 17);
  for (int i = 0; i < cloud.size(); ++i) {
    const Vec3 p = cloud.points.row(i).transpose();
    const auto px = project(p, pose, k);
    const auto cont = project_continuous(p, pose, k);
    CHECK(px.has_value() == cont.has_value());
    if (px) {
      CHECK(px->u == static_cast<int>(std::floor(cont->x)));
      CHECK(px->v == static_cast<int>(std::floor(cont->y)));
      CHECK(px->depth == doctest::Approx(cont->depth));
    }
  }
}

TEST_CASE("euler rotations are orthonormal and compose in ypr order") {
  const Mat3 r = euler_to_rotation(37.0, 12.0, -45.0);
  CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-12);
  CHECK(r.determinant() == doctest::Approx(1.0));

  const Mat3 split = euler_to_rotation(37.0, 0.0, 0.0) *
                     euler_to_rotation(0.0, 12.0, 0.0) *
                     euler_to_rotation(0.0, 0.0, -45.0);
  CHECK((r - split).norm() < 1e-12);
}

TEST_CASE("yaw turns the optical axis within the ground plane") {
  // q = R p: after a 90 deg yaw the camera looks down world -X, so that point
  // lands straight ahead while the old forward direction moves to camera +X.
  const Mat3 r = euler_to_rotation(90.0, 0.0, 0.0);
  CHECK((r * Vec3(-1.0, 0.0, 0.0) - Vec3(0.0, 0.0, 1.0)).norm() < 1e-12);
  CHECK((r * Vec3(0.0, 0.0, 1.0) - Vec3(1.0, 0.0, 0.0)).norm() < 1e-12);
}

TEST_CASE("pose rejects non-orthonormal rotations") {
  Mat3 bad = Mat3::Identity();
  bad(0, 1) = 0.01;
  CHECK_THROWS_AS(Pose(bad, Vec3::Zero()), std::invalid_argument);
  CHECK_THROWS_AS(compose_pose(Pose::identity(), bad, Vec3::Zero()),
                  std::invalid_argument);
}

TEST_CASE("compose applies the delta on the left") {
  const Pose base(euler_to_rotation(10.0, 0.0, 0.0), Vec3(1.0, 2.0, 3.0));
  const Mat3 delta = euler_to_rotation(25.0, 0.0, 0.0);
  const Pose out = compose_pose(base, delta, Vec3(0.5, 0.0, 0.0));
  CHECK((out.rotation() - delta * base.rotation()).norm() < 1e-12);
  CHECK((out.translation() - Vec3(1.5, 2.0, 3.0)).norm() < 1e-12);
}

TEST_CASE("pose errors recover the geodesic angle and offset") {
  const Pose truth(euler_to_rotation(40.0, 5.0, 0.0), Vec3(0.0, 1.0, 0.0));
  const Pose estimate = compose_pose(truth, euler_to_rotation(30.0, 0.0, 0.0),
                                     Vec3(3.0, 0.0, 4.0));
  const PoseErrors e = pose_errors(estimate, truth);
  CHECK(e.rre_deg == doctest::Approx(30.0).epsilon(1e-9));
  CHECK(e.rte_m == doctest::Approx(5.0).epsilon(1e-12));
  const PoseErrors zero = pose_errors(truth, truth);
  CHECK(zero.rre_deg == doctest::Approx(0.0));
  CHECK(zero.rte_m == doctest::Approx(0.0));
}

TEST_CASE("frustum mask matches per-point projection") {
  const CameraIntrinsics k = pt::small_intrinsics();
  const Pose pose(euler_to_rotation(-15.0, 8.0, 0.0), Vec3(0.2, 0.1, 2.0));
  const PointCloud cloud = pt::random_cloud(500, 23);
  const auto mask = frustum_mask(cloud, pose, k);
  REQUIRE(mask.size() == 500);
  int inside = 0;
  for (int i = 0; i < 500; ++i) {
    const bool hit =
        project(cloud.points.row(i).transpose(), pose, k).has_value();
    CHECK(mask[static_cast<std::size_t>(i)] == (hit ? 1 : 0));
    inside += hit ? 1 : 0;
  }
  CHECK(inside > 0);
  CHECK(inside < 500);
}

TEST_CASE("validation rejects malformed inputs") {
  CameraIntrinsics k = pt::small_intrinsics();
  k.fx = 0.0;
  CHECK_THROWS_AS(k.validate(), std::invalid_argument);
  k = pt::small_intrinsics();
  k.cx = -1.0;
  CHECK_THROWS_AS(k.validate(), std::invalid_argument);
  k = pt::small_intrinsics();
  k.height = 0;
  CHECK_THROWS_AS(k.validate(), std::invalid_argument);

  PointCloud empty;
  empty.points.resize(0, 3);
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
  PointCloud nan_cloud = pt::random_cloud(4, 3);
  nan_cloud.points(2, 1) = std::nan("");
  CHECK_THROWS_AS(nan_cloud.validate(), std::invalid_argument);
}

TEST_SUITE_END();
