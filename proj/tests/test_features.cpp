#include <doctest.h>
#include <filesystem>

#include "posegrid/features.hpp"
#include "posegrid/tensor_io.hpp"
#include "support.hpp"

using namespace posegrid;
namespace pt = posegrid::testing;

namespace {

OracleFeatureConfig clean_config(int dim = 16) {
  OracleFeatureConfig config;
  config.dim = dim;
  config.seed = 99;
  return config;
}

}  // namespace

TEST_SUITE_BEGIN("features");

TEST_CASE("positional encodings are unit vectors") {
  for (const int dim : {4, 5, 16, 32}) {
    for (const auto& [u, v] : {std::pair{0, 0}, {7, 3}, {15, 11}}) {
      const Eigen::VectorXd enc = positional_encoding(u, v, 16, 12, dim);
      REQUIRE(enc.size() == dim);
      CHECK(enc.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(positional_encoding(0, 0, 16, 12, 3), std::invalid_argument);
}

TEST_CASE("encoding distance grows with pixel displacement") {
  const int w = 48;
  const int h = 24;
  const Eigen::VectorXd origin = positional_encoding(10, 12, w, h, 16);
  double prev = 0.0;
  for (const int step : {1, 2, 4, 8, 12}) {
    const double along_u =
        (positional_encoding(10 + step, 12, w, h, 16) - origin).norm();
    CHECK(along_u > prev);
    prev = along_u;
  }
  prev = 0.0;
  for (const int step : {1, 2, 4, 8}) {
    const double along_v =
        (positional_encoding(10, 12 + step, w, h, 16) - origin).norm();
    CHECK(along_v > prev);
    prev = along_v;
  }
}

TEST_CASE("clean oracle features copy the ground-truth pixel encoding") {
  const CameraIntrinsics k = pt::small_intrinsics();
  const PointCloud cloud = pt::random_cloud(400, 5);
  const Pose gt = Pose::identity();
  const auto [map2d, set3d] = oracle_features(cloud, gt, k, clean_config());
  map2d.validate();
  set3d.validate();
  REQUIRE(map2d.values.rows() == 16 * 12);
  REQUIRE(set3d.values.rows() == 400);

  int visible = 0;
  for (Eigen::Index j = 0; j < cloud.size(); ++j) {
    const auto pixel = project(cloud.points.row(j).transpose(), gt, k);
    if (!pixel) {
      continue;
    }
    ++visible;
    const auto want = map2d.values.row(map2d.index(pixel->u, pixel->v));
    CHECK((set3d.values.row(j) - want).norm() == 0.0);

    // The ground-truth pixel is the unique nearest 2D feature.
    int zero_distance = 0;
    for (Eigen::Index r = 0; r < map2d.values.rows(); ++r) {
      if ((set3d.values.row(j) - map2d.values.row(r)).norm() < 1e-12) {
        ++zero_distance;
      }
    }
    CHECK(zero_distance == 1);
  }
  CHECK(visible > 50);
  CHECK(visible < 400);
}

TEST_CASE("outside points follow the configured mode") {
  const CameraIntrinsics k = pt::small_intrinsics();
  const PointCloud cloud = pt::random_cloud(300, 8);
  const Pose gt = Pose::identity();
  const auto mask = frustum_mask(cloud, gt, k);

  OracleFeatureConfig config = clean_config();
  config.outside_mode = OutsideMode::kZero;
  const auto zeroed = oracle_features(cloud, gt, k, config).second;
  config.outside_mode = OutsideMode::kRandom;
  const auto shuffled = oracle_features(cloud, gt, k, config).second;

  for (Eigen::Index j = 0; j < cloud.size(); ++j) {
    if (mask[static_cast<std::size_t>(j)]) {
      continue;
    }
    CHECK(zeroed.values.row(j).norm() == 0.0);
    CHECK(shuffled.values.row(j).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("feature noise perturbs only the copied encodings") {
  const CameraIntrinsics k = pt::small_intrinsics();
  const PointCloud cloud = pt::random_cloud(200, 12);
  const Pose gt = Pose::identity();
  OracleFeatureConfig config = clean_config();
  config.noise_sigma = 0.05;
  const auto [map2d, set3d] = oracle_features(cloud, gt, k, config);
  for (Eigen::Index j = 0; j < cloud.size(); ++j) {
    const auto pixel = project(cloud.points.row(j).transpose(), gt, k);
    if (!pixel) {
      continue;
    }
    const double dist =
        (set3d.values.row(j) - map2d.values.row(map2d.index(pixel->u, pixel->v)))
            .norm();
    CHECK(dist > 0.0);
    CHECK(dist < 1.0);  // many sigmas for 16 channels at 0.05
  }
}

TEST_CASE("clean confidence reproduces the frustum and its dilation") {
  const CameraIntrinsics k = pt::small_intrinsics();
  const PointCloud cloud = pt::random_cloud(400, 5);
  const Pose gt = Pose::identity();
  const auto [conf2d, conf3d] = oracle_confidence(cloud, gt, k, clean_config());
  conf2d.validate();
  conf3d.validate();

  const auto mask = frustum_mask(cloud, gt, k);
  for (Eigen::Index j = 0; j < cloud.size(); ++j) {
    CHECK(conf3d.values[j] ==
          (mask[static_cast<std::size_t>(j)] ? 1.0 : 0.0));
  }

  std::vector<int> hit(16 * 12, 0);
  for (Eigen::Index j = 0; j < cloud.size(); ++j) {
    if (const auto px = project(cloud.points.row(j).transpose(), gt, k)) {
      hit[static_cast<std::size_t>(px->v * 16 + px->u)] = 1;
    }
  }
  for (int v = 0; v < 12; ++v) {
    for (int u = 0; u < 16; ++u) {
      bool near = false;
      for (int dv = -1; dv <= 1; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          const int uu = u + du;
          const int vv = v + dv;
          if (uu >= 0 && uu < 16 && vv >= 0 && vv < 12 &&
              hit[static_cast<std::size_t>(vv * 16 + uu)]) {
            near = true;
          }
        }
      }
      CHECK(conf2d.values[conf2d.index(u, v)] == (near ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("flips corrupt points and labels together") {
  const CameraIntrinsics k = pt::small_intrinsics();
  const PointCloud cloud = pt::random_cloud(400, 21);
  const Pose gt = Pose::identity();
  OracleFeatureConfig config = clean_config();
  config.conf_flip_prob = 0.25;

  const auto [map2d, set3d] = oracle_features(cloud, gt, k, config);
  const auto conf3d = oracle_confidence(cloud, gt, k, config).second;
  const auto mask = frustum_mask(cloud, gt, k);

  int flipped_visible = 0;
  int flipped_outside = 0;
  for (Eigen::Index j = 0; j < cloud.size(); ++j) {
    const bool visible = mask[static_cast<std::size_t>(j)] != 0;
    const bool trusted = conf3d.values[j] == 1.0;
    // Label disagreement with the frustum identifies the flipped points.
    const bool flipped = visible != trusted;
    if (!visible) {
      flipped_outside += flipped ? 1 : 0;
      continue;
    }
    const auto px = project(cloud.points.row(j).transpose(), gt, k);
    const double dist =
        (set3d.values.row(j) - map2d.values.row(map2d.index(px->u, px->v)))
            .norm();
    if (flipped) {
      ++flipped_visible;
      CHECK(dist > 1e-6);  // garbage replaced the aligned feature
      CHECK(set3d.values.row(j).norm() == doctest::Approx(1.0).epsilon(1e-12));
    } else {
      CHECK(dist == 0.0);
    }
  }
  const int total = flipped_visible + flipped_outside;
  CHECK(flipped_visible > 0);
  CHECK(flipped_outside > 0);
  CHECK(total > 50);
  CHECK(total < 150);
}

TEST_CASE("pixel labels flip independently of coverage") {
  const CameraIntrinsics k = pt::small_intrinsics();
  const PointCloud cloud = pt::random_cloud(400, 5);
  const Pose gt = Pose::identity();

  const auto clean = oracle_confidence(cloud, gt, k, clean_config()).first;
  OracleFeatureConfig config = clean_config();
  config.conf_flip_prob = 0.3;
  const auto noisy = oracle_confidence(cloud, gt, k, config).first;

  int flips = 0;
  for (Eigen::Index i = 0; i < clean.values.size(); ++i) {
    flips += clean.values[i] != noisy.values[i] ? 1 : 0;
  }
  // 192 pixels at p = 0.3: bounds sit far beyond five binomial sigmas.
  CHECK(flips > 20);
  CHECK(flips < 100);
}

TEST_CASE("oracle outputs are deterministic in the seed") {
  const CameraIntrinsics k = pt::small_intrinsics();
  const PointCloud cloud = pt::random_cloud(200, 31);
  const Pose gt(euler_to_rotation(12.0, 0.0, 0.0), Vec3(0.1, 0.0, 1.0));
  OracleFeatureConfig config = clean_config();
  config.noise_sigma = 0.1;
  config.conf_flip_prob = 0.1;

  const auto a = oracle_features(cloud, gt, k, config);
  const auto b = oracle_features(cloud, gt, k, config);
  CHECK(a.first.values == b.first.values);
  CHECK(a.second.values == b.second.values);
  const auto ca = oracle_confidence(cloud, gt, k, config);
  const auto cb = oracle_confidence(cloud, gt, k, config);
  CHECK(ca.first.values == cb.first.values);
  CHECK(ca.second.values == cb.second.values);

  config.seed += 1;
  const auto c = oracle_features(cloud, gt, k, config);
  CHECK(a.second.values != c.second.values);
}

TEST_CASE("zeroing inferior points is idempotent and selective") {
  const FeatureSet3D features = pt::random_features(6, 4, 7);
  ConfidenceSet3D confidence;
  confidence.values.resize(6);
  confidence.values << 0.0, 0.2, 0.5, 0.7, 1.0, 0.49;

  const FeatureSet3D once = zero_out_inferior(features, confidence, 0.5);
  for (Eigen::Index j : {0, 1, 5}) {
    CHECK(once.values.row(j).norm() == 0.0);
  }
  for (Eigen::Index j : {2, 3, 4}) {
    CHECK((once.values.row(j) - features.values.row(j)).norm() == 0.0);
  }
  const FeatureSet3D twice = zero_out_inferior(once, confidence, 0.5);
  CHECK(twice.values == once.values);

  CHECK_THROWS_AS(zero_out_inferior(features, confidence, 1.5),
                  std::invalid_argument);
  ConfidenceSet3D short_conf;
  short_conf.values.resize(3);
  short_conf.values.setOnes();
  CHECK_THROWS_AS(zero_out_inferior(features, short_conf, 0.5),
                  std::invalid_argument);
}

TEST_CASE("config validation rejects out-of-range settings") {
  OracleFeatureConfig config;
  config.dim = 3;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = OracleFeatureConfig{};
  config.noise_sigma = -0.1;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = OracleFeatureConfig{};
  config.conf_flip_prob = 0.6;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("feature bundles round trip through the tensor container") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path();
  const int h = 3;
  const int w = 4;
  const int f = 5;
  const Eigen::Index n = 6;

  auto fill = [](Tensor& t, double scale) {
    t.data.resize(t.element_count());
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      t.data[i] = static_cast<float>(scale * 0.25 * static_cast<double>(i % 4));
    }
  };
  Tensor map2d{{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w),
                static_cast<std::uint32_t>(f)},
               {}};
  Tensor set3d{{static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(f)},
               {}};
  Tensor conf2d{{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w)},
                {}};
  Tensor conf3d{{static_cast<std::uint32_t>(n)}, {}};
  fill(map2d, -1.0);
  fill(set3d, 2.0);
  fill(conf2d, 1.0);
  fill(conf3d, 1.0);

  FeatureImportPaths paths;
  paths.map2d = (dir / "pg_bundle_map2d.bin").string();
  paths.set3d = (dir / "pg_bundle_set3d.bin").string();
  paths.conf2d = (dir / "pg_bundle_conf2d.bin").string();
  paths.conf3d = (dir / "pg_bundle_conf3d.bin").string();
  save_tensor(paths.map2d, map2d);
  save_tensor(paths.set3d, set3d);
  save_tensor(paths.conf2d, conf2d);
  save_tensor(paths.conf3d, conf3d);

  CameraIntrinsics k;
  k.fx = k.fy = 2.0;
  k.cx = 2.0;
  k.cy = 1.0;
  k.width = w;
  k.height = h;

  const FeatureBundle bundle = load_feature_bundle(paths, k, n);
  CHECK(bundle.map2d.dim() == f);
  CHECK(bundle.map2d.values(1, 2) ==
        doctest::Approx(-0.25 * ((f + 2) % 4)).epsilon(1e-12));
  CHECK(bundle.set3d.values.rows() == n);
  CHECK(bundle.conf2d.values.size() == h * w);
  CHECK(bundle.conf3d.values.size() == n);

  // Any dimension mismatch is rejected.
  CHECK_THROWS_AS(load_feature_bundle(paths, k, n + 1), std::runtime_error);
  CameraIntrinsics wrong = k;
  wrong.width = w + 1;
  wrong.cx = 2.0;
  CHECK_THROWS_AS(load_feature_bundle(paths, wrong, n), std::runtime_error);

  // Confidence outside [0,1] fails validation at load time.
  Tensor bad = conf3d;
  bad.data[0] = 2.0f;
  save_tensor(paths.conf3d, bad);
  CHECK_THROWS_AS(load_feature_bundle(paths, k, n), std::invalid_argument);

  for (const auto& p : {paths.map2d, paths.set3d, paths.conf2d, paths.conf3d}) {
    fs::remove(p);
  }
}

TEST_SUITE_END();
