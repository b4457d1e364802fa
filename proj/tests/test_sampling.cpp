#include <cmath>
#include <doctest.h>

#include "posegrid/sampling.hpp"
#include "support.hpp"

using namespace posegrid;

TEST_SUITE_BEGIN("sampling");

TEST_CASE("axis offsets form an inclusive symmetric grid") {
  const AxisSampling axis{true, 180.0, 9};
  const auto offsets = axis_offsets(axis);
  REQUIRE(offsets.size() == 9);
  const double expected[9] = {-180.0, -135.0, -90.0, -45.0, 0.0,
                              45.0,   90.0,   135.0, 180.0};
  for (int k = 0; k < 9; ++k) {
    CHECK(offsets[static_cast<std::size_t>(k)] ==
          doctest::Approx(expected[k]).epsilon(1e-15));
  }
  // The midpoint must be an exact zero so the current pose stays a candidate.
  CHECK(offsets[4] == 0.0);
}

TEST_CASE("disabled axes and singleton counts collapse to zero") {
  CHECK(axis_offsets(AxisSampling{false, 7.0, 5}) == std::vector<double>{0.0});
  CHECK(axis_offsets(AxisSampling{true, 7.0, 1}) == std::vector<double>{0.0});
}

TEST_CASE("space validation rejects even counts and bad ranges") {
  SamplingSpace space;
  space.rotation[0] = {true, 10.0, 4};
  CHECK_THROWS_AS(space.validate(), std::invalid_argument);
  space.rotation[0] = {true, -1.0, 3};
  CHECK_THROWS_AS(space.validate(), std::invalid_argument);
  space.rotation[0] = {true, 10.0, 0};
  CHECK_THROWS_AS(space.validate(), std::invalid_argument);
  space.rotation[0] = {true, 10.0, 3};
  CHECK_NOTHROW(space.validate());
}

TEST_CASE("schedule validation bounds the shrink factors") {
  Schedule s = Schedule::defaults();
  CHECK_NOTHROW(s.validate());
  s.rot_shrink = 1.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = Schedule::defaults();
  s.trans_shrink = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = Schedule::defaults();
  s.iterations = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("default schedule spans yaw and the ground plane") {
  const Schedule s = Schedule::defaults();
  CHECK(s.iterations == 9);
  CHECK(s.initial_space.rotation_count() == 9);
  CHECK(s.initial_space.translation_count() == 81);
  CHECK(s.initial_space.candidate_count() == 729);
  CHECK(s.initial_space.rotation[0].range == 180.0);
  CHECK_FALSE(s.initial_space.rotation[1].enabled);
  CHECK_FALSE(s.initial_space.rotation[2].enabled);
  CHECK(s.initial_space.translation[0].range == 5.0);
  CHECK_FALSE(s.initial_space.translation[1].enabled);
  CHECK(s.initial_space.translation[2].range == 5.0);
}

TEST_CASE("candidate ordering follows the documented index formula") {
  SamplingSpace space;
  space.rotation[0] = {true, 30.0, 3};
  space.translation[0] = {true, 1.0, 3};
  space.translation[2] = {true, 2.0, 3};
  const Pose current(euler_to_rotation(15.0, -4.0, 2.0), Vec3(1.0, -2.0, 8.0));
  const auto candidates = sample_candidates(current, space);
  REQUIRE(candidates.size() == 27);

  // index = rot_index * 9 + (x_index * 3 + z_index), each axis low to high.
  auto expect = [&](std::size_t idx, double yaw, double dx, double dz) {
    const Pose want =
        compose_pose(current, euler_to_rotation(yaw, 0.0, 0.0), Vec3(dx, 0.0, dz));
    CHECK((candidates[idx].rotation() - want.rotation()).norm() < 1e-14);
    CHECK((candidates[idx].translation() - want.translation()).norm() < 1e-14);
  };
  expect(0, -30.0, -1.0, -2.0);
  expect(2, -30.0, -1.0, 2.0);
  expect(7, -30.0, 1.0, 0.0);
  expect(13, 0.0, 0.0, 0.0);
  expect(25, 30.0, 1.0, 0.0);
  expect(26, 30.0, 1.0, 2.0);

  // The pure zero-offset candidate reproduces the current pose exactly.
  CHECK((candidates[13].rotation() - current.rotation()).norm() == 0.0);
  CHECK((candidates[13].translation() - current.translation()).norm() == 0.0);
}

TEST_CASE("default grid keeps the current pose at index 364") {
  const Schedule s = Schedule::defaults();
  const Pose current(euler_to_rotation(33.0, 0.0, 0.0), Vec3(0.5, 0.0, -1.5));
  const auto candidates = sample_candidates(current, s.initial_space);
  REQUIRE(candidates.size() == 729);
  // rot_index 4 (yaw 0) * 81 + x_index 4 * 9 + z_index 4 = 364.
  CHECK((candidates[364].rotation() - current.rotation()).norm() == 0.0);
  CHECK((candidates[364].translation() - current.translation()).norm() == 0.0);
}

TEST_CASE("shrink scales ranges and leaves counts alone") {
  Schedule s;
  s.initial_space.rotation[0] = {true, 180.0, 9};
  s.initial_space.translation[0] = {true, 5.0, 9};
  s.rot_shrink = 0.5;
  s.trans_shrink = 0.25;
  const SamplingSpace once = shrink(s.initial_space, s);
  CHECK(once.rotation[0].range == doctest::Approx(90.0));
  CHECK(once.translation[0].range == doctest::Approx(1.25));
  CHECK(once.rotation[0].count == 9);
  CHECK(once.translation[0].count == 9);
}

TEST_CASE("default schedule lands under the advertised endpoints") {
  const Schedule s = Schedule::defaults();
  SamplingSpace space = s.initial_space;
  double prev_rot = space.max_rotation_range();
  double prev_trans = space.max_translation_range();
  // One shrink between consecutive iterations: 8 applications over 9 steps.
  for (int i = 0; i < s.iterations - 1; ++i) {
    space = shrink(space, s);
    CHECK(space.max_rotation_range() < prev_rot);
    CHECK(space.max_translation_range() < prev_trans);
    prev_rot = space.max_rotation_range();
    prev_trans = space.max_translation_range();
  }
  const double rot_full = 2.0 * space.max_rotation_range();
  const double trans_full = 2.0 * space.max_translation_range();
  CHECK(rot_full == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(trans_full == doctest::Approx(0.45).epsilon(1e-9));
  CHECK(rot_full < 1.0);
  CHECK(trans_full < 0.5);
}

TEST_CASE("nearest candidate matches a brute-force search") {
  SamplingSpace space;
  space.rotation[0] = {true, 60.0, 5};
  space.translation[0] = {true, 3.0, 5};
  space.translation[2] = {true, 3.0, 5};
  const Pose current(euler_to_rotation(-20.0, 0.0, 0.0), Vec3(0.0, 0.0, 4.0));
  const auto candidates = sample_candidates(current, space);
  const Pose truth = compose_pose(current, euler_to_rotation(28.0, 0.0, 0.0),
                                  Vec3(-1.4, 0.0, 0.8));

  const std::size_t got = nearest_candidate_index(candidates, truth, space);

  std::size_t want = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const PoseErrors e = pose_errors(candidates[i], truth);
    const double d = e.rre_deg / 120.0 + e.rte_m / 6.0;
    if (d < best) {
      best = d;
      want = i;
    }
  }
  CHECK(got == want);
  // The winner should be the grid point nearest the injected offset:
  // yaw 30 of {-60,-30,0,30,60}, x -1.5 and z 1.5 of {-3,-1.5,0,1.5,3}.
  const PoseErrors won = pose_errors(candidates[got], truth);
  CHECK(won.rre_deg == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(won.rte_m == doctest::Approx(std::hypot(0.1, 0.7)).epsilon(1e-6));
}

TEST_CASE("nearest candidate drops the term for an unsearched side") {
  // Rotation axes all disabled: a large rotation error must not matter.
  SamplingSpace space;
  space.translation[0] = {true, 5.0, 3};
  std::vector<Pose> candidates;
  candidates.push_back(
      Pose(euler_to_rotation(90.0, 0.0, 0.0), Vec3(0.0, 0.0, 0.0)));
  candidates.push_back(Pose(Mat3::Identity(), Vec3(1.0, 0.0, 0.0)));
  const Pose truth = Pose::identity();
  CHECK(nearest_candidate_index(candidates, truth, space) == 0);
}

TEST_CASE("nearest candidate breaks ties toward the lowest index") {
  SamplingSpace space;
  space.translation[2] = {true, 1.0, 3};
  const std::vector<Pose> candidates(4, Pose::identity());
  CHECK(nearest_candidate_index(candidates, Pose::identity(), space) == 0);
  CHECK_THROWS_AS(nearest_candidate_index({}, Pose::identity(), space),
                  std::invalid_argument);
}

TEST_SUITE_END();
