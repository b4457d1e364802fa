#include "posegrid/features.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "posegrid/rng.hpp"
#include "posegrid/tensor_io.hpp"

namespace posegrid {

namespace {

constexpr std::uint64_t kFeatureStream = 0x11;
constexpr std::uint64_t kPixelFlipStream = 0x22;
constexpr std::uint64_t kPointFlipStream = 0x23;

/// Per-point corruption decisions, shared between the feature and confidence
/// generators so a flipped point gets a garbage feature and the matching
/// label in the same scene.
std::vector<std::uint8_t> draw_point_flips(const OracleFeatureConfig& config,
                                           Eigen::Index count) {
  std::vector<std::uint8_t> flips(static_cast<std::size_t>(count), 0);
  if (config.conf_flip_prob > 0.0) {
    std::mt19937_64 rng(mix_seed(config.seed, kPointFlipStream));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (auto& flip : flips) {
      flip = uniform(rng) < config.conf_flip_prob ? 1 : 0;
    }
  }
  return flips;
}

void check_unit_interval(const Eigen::VectorXd& values, const char* what) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0 && values[i] <= 1.0)) {
      throw std::invalid_argument(std::string(what) +
                                  ": confidence outside [0,1]");
    }
  }
}

/// Wavelengths in pixels, geometric from 2*max(W,H) down to max(W,H)/2 (but
/// never below 8). Keeping the shortest wavelength coarse makes encoding
/// distance grow smoothly with pixel displacement instead of decorrelating
/// within a couple of pixels, which is what lets the score landscape rank
/// far-from-truth candidates sensibly at coarse sampling scales.
std::vector<double> wavelengths(int width, int height, int count) {
  const double hi = 2.0 * std::max(width, height);
  const double lo = std::max(8.0, 0.5 * std::max(width, height));
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = hi;
    return out;
  }
  const double ratio = std::pow(lo / hi, 1.0 / (count - 1));
  double w = hi;
  for (int q = 0; q < count; ++q) {
    out[static_cast<std::size_t>(q)] = w;
    w *= ratio;
  }
  return out;
}

void encode_axis(double x, const std::vector<double>& lambdas, int channels,
                 double* out) {
  for (int c = 0; c < channels; ++c) {
    const double lambda = lambdas[static_cast<std::size_t>(c / 2)];
    const double phase = 2.0 * M_PI * x / lambda;
    out[c] = (c % 2 == 0) ? std::sin(phase) : std::cos(phase);
  }
}

}  // namespace

void FeatureMap2D::validate() const {
  if (height < 1 || width < 1 || values.cols() < 1) {
    throw std::invalid_argument("feature map: empty");
  }
  if (values.rows() != static_cast<Eigen::Index>(height) * width) {
    throw std::invalid_argument("feature map: row count does not match H*W");
  }
  if (!values.allFinite()) {
    throw std::invalid_argument("feature map: non-finite value");
  }
}

void FeatureSet3D::validate() const {
  if (!values.allFinite()) {
    throw std::invalid_argument("feature set: non-finite value");
  }
}

void ConfidenceMap2D::validate() const {
  if (values.size() != static_cast<Eigen::Index>(height) * width) {
    throw std::invalid_argument("confidence map: size does not match H*W");
  }
  check_unit_interval(values, "confidence map");
}

void ConfidenceSet3D::validate() const {
  check_unit_interval(values, "confidence set");
}

void OracleFeatureConfig::validate() const {
  if (dim < 4) {
    throw std::invalid_argument(
        "oracle features: dim must be >= 4 (two frequencies per axis)");
  }
  if (!(noise_sigma >= 0.0)) {
    throw std::invalid_argument("oracle features: noise_sigma must be >= 0");
  }
  if (!(conf_flip_prob >= 0.0 && conf_flip_prob <= 0.5)) {
    throw std::invalid_argument(
        "oracle features: conf_flip_prob must lie in [0, 0.5]");
  }
}

Eigen::VectorXd positional_encoding(int u, int v, int width, int height,
                                    int dim) {
  if (dim < 4) {
    throw std::invalid_argument("positional encoding needs dim >= 4");
  }
  const int u_channels = dim - dim / 2;  // u gets the extra channel on odd dim
  const int v_channels = dim / 2;
  const auto u_lambdas = wavelengths(width, height, (u_channels + 1) / 2);
  const auto v_lambdas = wavelengths(width, height, (v_channels + 1) / 2);

  Eigen::VectorXd enc(dim);
  encode_axis(static_cast<double>(u), u_lambdas, u_channels, enc.data());
  encode_axis(static_cast<double>(v), v_lambdas, v_channels,
              enc.data() + u_channels);
  const double norm = enc.norm();
  if (norm > 0.0) {
    enc /= norm;
  }
  return enc;
}

std::pair<FeatureMap2D, FeatureSet3D> oracle_features(
    const PointCloud& cloud, const Pose& gt_pose,
    const CameraIntrinsics& intrinsics, const OracleFeatureConfig& config) {
  config.validate();
  cloud.validate();
  intrinsics.validate();

  const int w = intrinsics.width;
  const int h = intrinsics.height;
  const int f = config.dim;

  FeatureMap2D map;
  map.height = h;
  map.width = w;
  map.values.resize(static_cast<Eigen::Index>(h) * w, f);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      map.values.row(map.index(u, v)) =
          positional_encoding(u, v, w, h, f).transpose();
    }
  }

  std::mt19937_64 rng(mix_seed(config.seed, kFeatureStream));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto flips = draw_point_flips(config, cloud.size());

  const auto random_unit = [&rng, &gauss, f]() {
    Eigen::VectorXd dir(f);
    for (int c = 0; c < f; ++c) {
      dir[c] = gauss(rng);
    }
    const double norm = dir.norm();
    if (norm > 0.0) {
      dir /= norm;
    }
    return dir;
  };

  FeatureSet3D set;
  set.values.resize(cloud.size(), f);
  for (Eigen::Index j = 0; j < cloud.size(); ++j) {
    const auto pixel =
        project(cloud.points.row(j).transpose(), gt_pose, intrinsics);
    if (pixel && !flips[static_cast<std::size_t>(j)]) {
      set.values.row(j) = map.values.row(map.index(pixel->u, pixel->v));
      if (config.noise_sigma > 0.0) {
        for (int c = 0; c < f; ++c) {
          set.values(j, c) += config.noise_sigma * gauss(rng);
        }
      }
    } else if (pixel) {
      // A flipped visible point lost its cross-modal feature; the confidence
      // label records the loss.
      set.values.row(j) = random_unit().transpose();
    } else if (config.outside_mode == OutsideMode::kZero) {
      set.values.row(j).setZero();
    } else {
      set.values.row(j) = random_unit().transpose();
    }
  }
  return {std::move(map), std::move(set)};
}

std::pair<ConfidenceMap2D, ConfidenceSet3D> oracle_confidence(
    const PointCloud& cloud, const Pose& gt_pose,
    const CameraIntrinsics& intrinsics, const OracleFeatureConfig& config) {
  config.validate();
  cloud.validate();
  intrinsics.validate();

  const int w = intrinsics.width;
  const int h = intrinsics.height;

  ConfidenceMap2D conf2d;
  conf2d.height = h;
  conf2d.width = w;
  conf2d.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(h) * w);

  ConfidenceSet3D conf3d;
  conf3d.values = Eigen::VectorXd::Zero(cloud.size());

  const auto flips = draw_point_flips(config, cloud.size());
  std::vector<std::uint8_t> covered(static_cast<std::size_t>(h) * w, 0);
  for (Eigen::Index j = 0; j < cloud.size(); ++j) {
    const auto pixel =
        project(cloud.points.row(j).transpose(), gt_pose, intrinsics);
    // Flipped visible points carry garbage features and are labeled 0;
    // flipped outside points are wrongly trusted garbage.
    const bool flipped = flips[static_cast<std::size_t>(j)] != 0;
    conf3d.values[j] = (pixel != std::nullopt) != flipped ? 1.0 : 0.0;
    if (pixel) {
      covered[static_cast<std::size_t>(conf2d.index(pixel->u, pixel->v))] = 1;
    }
  }
  // Coverage marks areas, not exact hits: a pixel is confident when a point
  // lands in its 3x3 neighborhood.
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      bool near = false;
      for (int dv = -1; dv <= 1 && !near; ++dv) {
        for (int du = -1; du <= 1 && !near; ++du) {
          const int uu = u + du;
          const int vv = v + dv;
          near = uu >= 0 && uu < w && vv >= 0 && vv < h &&
                 covered[static_cast<std::size_t>(vv) * w + uu] != 0;
        }
      }
      if (near) {
        conf2d.values[conf2d.index(u, v)] = 1.0;
      }
    }
  }

  if (config.conf_flip_prob > 0.0) {
    std::mt19937_64 rng(mix_seed(config.seed, kPixelFlipStream));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (Eigen::Index i = 0; i < conf2d.values.size(); ++i) {
      if (uniform(rng) < config.conf_flip_prob) {
        conf2d.values[i] = 1.0 - conf2d.values[i];
      }
    }
  }
  return {std::move(conf2d), std::move(conf3d)};
}

FeatureSet3D zero_out_inferior(const FeatureSet3D& features,
                               const ConfidenceSet3D& confidence,
                               double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("zero_out_inferior: threshold outside [0,1]");
  }
  if (features.values.rows() != confidence.values.size()) {
    throw std::invalid_argument(
        "zero_out_inferior: feature and confidence counts differ");
  }
  FeatureSet3D out = features;
  for (Eigen::Index j = 0; j < out.values.rows(); ++j) {
    if (confidence.values[j] < threshold) {
      out.values.row(j).setZero();
    }
  }
  return out;
}

namespace {

RowMatrixXd tensor_to_matrix(const Tensor& t, Eigen::Index rows,
                             Eigen::Index cols, const char* what) {
  if (t.data.size() != static_cast<std::size_t>(rows * cols)) {
    throw std::runtime_error(std::string(what) +
                             ": tensor size does not match expected shape");
  }
  RowMatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = static_cast<double>(
          t.data[static_cast<std::size_t>(i * cols + j)]);
    }
  }
  return m;
}

}  // namespace

FeatureBundle load_feature_bundle(const FeatureImportPaths& paths,
                                  const CameraIntrinsics& intrinsics,
                                  Eigen::Index point_count) {
  const Tensor t2d = load_tensor(paths.map2d);
  if (t2d.dims.size() != 3 ||
      t2d.dims[0] != static_cast<std::uint32_t>(intrinsics.height) ||
      t2d.dims[1] != static_cast<std::uint32_t>(intrinsics.width)) {
    throw std::runtime_error("feature import: 2D map dims must be [H, W, f]");
  }
  const int f = static_cast<int>(t2d.dims[2]);

  const Tensor t3d = load_tensor(paths.set3d);
  if (t3d.dims.size() != 2 ||
      t3d.dims[0] != static_cast<std::uint32_t>(point_count) ||
      t3d.dims[1] != static_cast<std::uint32_t>(f)) {
    throw std::runtime_error("feature import: 3D set dims must be [N, f]");
  }

  const Tensor tc2d = load_tensor(paths.conf2d);
  if (tc2d.dims.size() != 2 ||
      tc2d.dims[0] != static_cast<std::uint32_t>(intrinsics.height) ||
      tc2d.dims[1] != static_cast<std::uint32_t>(intrinsics.width)) {
    throw std::runtime_error("feature import: 2D confidence dims must be [H, W]");
  }
  const Tensor tc3d = load_tensor(paths.conf3d);
  if (tc3d.dims.size() != 1 ||
      tc3d.dims[0] != static_cast<std::uint32_t>(point_count)) {
    throw std::runtime_error("feature import: 3D confidence dims must be [N]");
  }

  const Eigen::Index hw =
      static_cast<Eigen::Index>(intrinsics.height) * intrinsics.width;

  FeatureBundle bundle;
  bundle.map2d.height = intrinsics.height;
  bundle.map2d.width = intrinsics.width;
  bundle.map2d.values = tensor_to_matrix(t2d, hw, f, "feature import (2D)");
  bundle.set3d.values =
      tensor_to_matrix(t3d, point_count, f, "feature import (3D)");
  bundle.conf2d.height = intrinsics.height;
  bundle.conf2d.width = intrinsics.width;
  bundle.conf2d.values =
      tensor_to_matrix(tc2d, hw, 1, "feature import (2D confidence)").col(0);
  bundle.conf3d.values =
      tensor_to_matrix(tc3d, point_count, 1, "feature import (3D confidence)")
          .col(0);

  bundle.map2d.validate();
  bundle.set3d.validate();
  bundle.conf2d.validate();
  bundle.conf3d.validate();
  return bundle;
}

}  // namespace posegrid
