#include "posegrid/scoring.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "posegrid/losses.hpp"
#include "posegrid/parallel.hpp"
#include "posegrid/rng.hpp"
#include "posegrid/tensor_io.hpp"

namespace posegrid {

namespace {

constexpr double kLeakySlope = 0.1;
constexpr std::uint64_t kInitStream = 0x5C02E11;
constexpr std::uint64_t kTrainStream = 0x7A41A2;
constexpr std::uint32_t kParamsVersion = 1;

// Receptive-field matrix of a 3x3 stride-1 zero-padded convolution: column
// y*w+x holds the field of output pixel (x, y), row c*9+ky*3+kx its entry.
Eigen::MatrixXd im2col(const Eigen::MatrixXd& x, int h, int w) {
  const int channels = static_cast<int>(x.rows());
  Eigen::MatrixXd col = Eigen::MatrixXd::Zero(channels * 9, x.cols());
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      const int sy = ky - 1;
      for (int kx = 0; kx < 3; ++kx) {
        const int sx = kx - 1;
        const int row = c * 9 + ky * 3 + kx;
        const int x0 = std::max(0, -sx);
        const int x1 = std::min(w, w - sx);
        if (x1 <= x0) {
          continue;
        }
        for (int y = std::max(0, -sy); y < std::min(h, h - sy); ++y) {
          col.block(row, y * w + x0, 1, x1 - x0) =
              x.block(c, (y + sy) * w + x0 + sx, 1, x1 - x0);
        }
      }
    }
  }
  return col;
}

// Adjoint of im2col: scatter-adds receptive-field gradients back onto the
// input grid.
Eigen::MatrixXd col2im(const Eigen::MatrixXd& dcol, int channels, int h,
                       int w) {
  Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(channels, h * w);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      const int sy = ky - 1;
      for (int kx = 0; kx < 3; ++kx) {
        const int sx = kx - 1;
        const int row = c * 9 + ky * 3 + kx;
        const int x0 = std::max(0, -sx);
        const int x1 = std::min(w, w - sx);
        if (x1 <= x0) {
          continue;
        }
        for (int y = std::max(0, -sy); y < std::min(h, h - sy); ++y) {
          dx.block(c, (y + sy) * w + x0 + sx, 1, x1 - x0) +=
              dcol.block(row, y * w + x0, 1, x1 - x0);
        }
      }
    }
  }
  return dx;
}

Eigen::MatrixXd unit_channels(const CostVolumeUnit& unit) {
  const int f = unit.feature_dim();
  const Eigen::Index pixels = unit.image_features->values.rows();
  Eigen::MatrixXd x(2 * f + 2, pixels);
  for (int c = 0; c < f; ++c) {
    x.row(c) = unit.image_features->values.col(c).transpose();
    x.row(f + c) = unit.aggregated->features.col(c).transpose();
  }
  x.row(2 * f) = unit.image_weights->values.transpose();
  x.row(2 * f + 1) = unit.aggregated->weights.transpose();
  return x;
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> acts;  // acts[0] input, acts[l+1] layer output
  Eigen::VectorXd pooled;
  double score = 0.0;
  int height = 0;
  int width = 0;
};

ForwardCache conv_forward(Eigen::MatrixXd input, const ScorerParams& params,
                          int height, int width, bool keep_activations) {
  ForwardCache cache;
  cache.height = height;
  cache.width = width;
  Eigen::MatrixXd current = std::move(input);
  if (keep_activations) {
    cache.acts.push_back(current);
  }
  for (const ConvLayer& layer : params.layers) {
    Eigen::MatrixXd pre =
        layer.weight * im2col(current, height, width);
    pre.colwise() += layer.bias;
    current = pre.unaryExpr(
        [](double v) { return v > 0.0 ? v : kLeakySlope * v; });
    if (keep_activations) {
      cache.acts.push_back(current);
    }
  }
  cache.pooled = current.rowwise().mean();
  cache.score = params.head_weight.dot(cache.pooled) + params.head_bias;
  return cache;
}

void ensure_grad_shapes(const ScorerParams& params, ScorerParams& grads) {
  if (!grads.layers.empty()) {
    return;
  }
  grads.layers.reserve(params.layers.size());
  for (const ConvLayer& layer : params.layers) {
    ConvLayer g;
    g.in_channels = layer.in_channels;
    g.out_channels = layer.out_channels;
    g.weight = Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols());
    g.bias = Eigen::VectorXd::Zero(layer.bias.size());
    grads.layers.push_back(std::move(g));
  }
  grads.head_weight = Eigen::VectorXd::Zero(params.head_weight.size());
  grads.head_bias = 0.0;
}

void conv_backward(const ForwardCache& cache, const ScorerParams& params,
                   double dscore, ScorerParams& grads) {
  ensure_grad_shapes(params, grads);
  const int layer_count = static_cast<int>(params.layers.size());
  const double pixels = static_cast<double>(cache.acts.back().cols());

  grads.head_weight += dscore * cache.pooled;
  grads.head_bias += dscore;

  const Eigen::VectorXd dpooled = dscore * params.head_weight;
  Eigen::MatrixXd dcurrent =
      (dpooled / pixels).replicate(1, cache.acts.back().cols());
  for (int l = layer_count - 1; l >= 0; --l) {
    const Eigen::MatrixXd& post = cache.acts[l + 1];
    const Eigen::MatrixXd dpre = dcurrent.cwiseProduct(post.unaryExpr(
        [](double v) { return v > 0.0 ? 1.0 : kLeakySlope; }));
    const Eigen::MatrixXd col =
        im2col(cache.acts[l], cache.height, cache.width);
    grads.layers[l].weight += dpre * col.transpose();
    grads.layers[l].bias += dpre.rowwise().sum();
    if (l > 0) {
      dcurrent = col2im(params.layers[l].weight.transpose() * dpre,
                        params.layers[l].in_channels, cache.height,
                        cache.width);
    }
  }
}

std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

}  // namespace

int argmax_ties_lowest(const Eigen::VectorXd& scores) {
  int best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

double baseline_score(const CostVolumeUnit& unit) {
  const AggregatedMap& agg = *unit.aggregated;
  const auto& image = unit.image_features->values;
  const auto& weights2d = unit.image_weights->values;
  double numerator = 0.0;
  double denominator = 0.0;
  bool any_occupied = false;
  for (Eigen::Index idx = 0; idx < agg.occupancy.size(); ++idx) {
    if (agg.occupancy[idx] == 0) {
      continue;
    }
    any_occupied = true;
    const double w = weights2d[idx] * agg.weights[idx];
    numerator += w * (image.row(idx) - agg.features.row(idx)).norm();
    denominator += w;
  }
  if (!any_occupied || denominator <= 0.0) {
    return -std::numeric_limits<double>::infinity();
  }
  return -numerator / denominator;
}

int ScorerParams::input_channels() const {
  if (layers.empty()) {
    throw std::logic_error("ScorerParams: no layers");
  }
  return layers.front().in_channels;
}

void ScorerParams::validate() const {
  if (layers.empty()) {
    throw std::invalid_argument("ScorerParams: at least one layer required");
  }
  int expected_in = layers.front().in_channels;
  for (const ConvLayer& layer : layers) {
    if (layer.in_channels != expected_in || layer.out_channels < 1) {
      throw std::invalid_argument("ScorerParams: broken channel chain");
    }
    if (layer.weight.rows() != layer.out_channels ||
        layer.weight.cols() != layer.in_channels * 9 ||
        layer.bias.size() != layer.out_channels) {
      throw std::invalid_argument("ScorerParams: parameter shape mismatch");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw std::invalid_argument("ScorerParams: non-finite parameters");
    }
    expected_in = layer.out_channels;
  }
  if (head_weight.size() != layers.back().out_channels ||
      !head_weight.allFinite() || !std::isfinite(head_bias)) {
    throw std::invalid_argument("ScorerParams: broken head");
  }
}

ScorerParams init_scorer_params(int input_channels,
                                const std::vector<int>& widths,
                                std::uint64_t seed) {
  if (input_channels < 1 || widths.empty()) {
    throw std::invalid_argument("init_scorer_params: bad architecture");
  }
  std::mt19937_64 rng(mix_seed(seed, kInitStream));
  std::normal_distribution<double> gauss(0.0, 1.0);
  ScorerParams params;
  int in_channels = input_channels;
  for (const int out_channels : widths) {
    if (out_channels < 1) {
      throw std::invalid_argument("init_scorer_params: bad width");
    }
    ConvLayer layer;
    layer.in_channels = in_channels;
    layer.out_channels = out_channels;
    const double scale = std::sqrt(2.0 / (in_channels * 9.0));
    layer.weight.resize(out_channels, in_channels * 9);
    for (Eigen::Index o = 0; o < layer.weight.rows(); ++o) {
      for (Eigen::Index k = 0; k < layer.weight.cols(); ++k) {
        layer.weight(o, k) = scale * gauss(rng);
      }
    }
    layer.bias = Eigen::VectorXd::Zero(out_channels);
    params.layers.push_back(std::move(layer));
    in_channels = out_channels;
  }
  const double head_scale = std::sqrt(1.0 / in_channels);
  params.head_weight.resize(in_channels);
  for (Eigen::Index i = 0; i < params.head_weight.size(); ++i) {
    params.head_weight[i] = head_scale * gauss(rng);
  }
  params.head_bias = 0.0;
  return params;
}

void save_scorer_params(const std::string& path, const ScorerParams& params) {
  params.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("save_scorer_params: cannot open " + path);
  }
  const auto layer_count = static_cast<std::uint32_t>(params.layers.size());
  Tensor meta;
  meta.dims = {2 + layer_count + 1};
  meta.data.push_back(static_cast<float>(kParamsVersion));
  meta.data.push_back(static_cast<float>(layer_count));
  meta.data.push_back(static_cast<float>(params.layers.front().in_channels));
  for (const ConvLayer& layer : params.layers) {
    meta.data.push_back(static_cast<float>(layer.out_channels));
  }
  write_tensor(out, meta);
  for (const ConvLayer& layer : params.layers) {
    Tensor weight;
    weight.dims = {static_cast<std::uint32_t>(layer.out_channels),
                   static_cast<std::uint32_t>(layer.in_channels), 3, 3};
    weight.data.reserve(layer.weight.size());
    for (Eigen::Index o = 0; o < layer.weight.rows(); ++o) {
      for (Eigen::Index k = 0; k < layer.weight.cols(); ++k) {
        weight.data.push_back(static_cast<float>(layer.weight(o, k)));
      }
    }
    write_tensor(out, weight);
    Tensor bias;
    bias.dims = {static_cast<std::uint32_t>(layer.out_channels)};
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      bias.data.push_back(static_cast<float>(layer.bias[i]));
    }
    write_tensor(out, bias);
  }
  Tensor head;
  head.dims = {static_cast<std::uint32_t>(params.head_weight.size())};
  for (Eigen::Index i = 0; i < params.head_weight.size(); ++i) {
    head.data.push_back(static_cast<float>(params.head_weight[i]));
  }
  write_tensor(out, head);
  Tensor head_bias;
  head_bias.dims = {1};
  head_bias.data.push_back(static_cast<float>(params.head_bias));
  write_tensor(out, head_bias);
  if (!out) {
    throw std::runtime_error("save_scorer_params: write failed for " + path);
  }
}

ScorerParams load_scorer_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_scorer_params: cannot open " + path);
  }
  const Tensor meta = read_tensor(in);
  if (meta.dims.size() != 1 || meta.data.size() < 4 ||
      static_cast<std::uint32_t>(meta.data[0]) != kParamsVersion) {
    throw std::runtime_error("load_scorer_params: unsupported file " + path);
  }
  const int layer_count = static_cast<int>(meta.data[1]);
  if (layer_count < 1 ||
      meta.data.size() != static_cast<std::size_t>(3 + layer_count)) {
    throw std::runtime_error("load_scorer_params: corrupt header in " + path);
  }
  ScorerParams params;
  int in_channels = static_cast<int>(meta.data[2]);
  for (int l = 0; l < layer_count; ++l) {
    const int out_channels = static_cast<int>(meta.data[3 + l]);
    const Tensor weight = read_tensor(in);
    const Tensor bias = read_tensor(in);
    if (weight.dims !=
            std::vector<std::uint32_t>{
                static_cast<std::uint32_t>(out_channels),
                static_cast<std::uint32_t>(in_channels), 3, 3} ||
        bias.dims !=
            std::vector<std::uint32_t>{
                static_cast<std::uint32_t>(out_channels)}) {
      throw std::runtime_error("load_scorer_params: layer shape mismatch");
    }
    ConvLayer layer;
    layer.in_channels = in_channels;
    layer.out_channels = out_channels;
    layer.weight.resize(out_channels, in_channels * 9);
    std::size_t pos = 0;
    for (Eigen::Index o = 0; o < layer.weight.rows(); ++o) {
      for (Eigen::Index k = 0; k < layer.weight.cols(); ++k) {
        layer.weight(o, k) = weight.data[pos++];
      }
    }
    layer.bias.resize(out_channels);
    for (int i = 0; i < out_channels; ++i) {
      layer.bias[i] = bias.data[static_cast<std::size_t>(i)];
    }
    params.layers.push_back(std::move(layer));
    in_channels = out_channels;
  }
  const Tensor head = read_tensor(in);
  const Tensor head_bias = read_tensor(in);
  if (head.dims != std::vector<std::uint32_t>{static_cast<std::uint32_t>(
                       in_channels)} ||
      head_bias.dims != std::vector<std::uint32_t>{1}) {
    throw std::runtime_error("load_scorer_params: head shape mismatch");
  }
  params.head_weight.resize(in_channels);
  for (int i = 0; i < in_channels; ++i) {
    params.head_weight[i] = head.data[static_cast<std::size_t>(i)];
  }
  params.head_bias = head_bias.data[0];
  params.validate();
  return params;
}

Eigen::VectorXd pack_params(const ScorerParams& params) {
  std::size_t count = 1;  // head bias
  for (const ConvLayer& layer : params.layers) {
    count += static_cast<std::size_t>(layer.weight.size()) +
             static_cast<std::size_t>(layer.bias.size());
  }
  count += static_cast<std::size_t>(params.head_weight.size());
  Eigen::VectorXd flat(static_cast<Eigen::Index>(count));
  Eigen::Index pos = 0;
  for (const ConvLayer& layer : params.layers) {
    for (Eigen::Index o = 0; o < layer.weight.rows(); ++o) {
      for (Eigen::Index k = 0; k < layer.weight.cols(); ++k) {
        flat[pos++] = layer.weight(o, k);
      }
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      flat[pos++] = layer.bias[i];
    }
  }
  for (Eigen::Index i = 0; i < params.head_weight.size(); ++i) {
    flat[pos++] = params.head_weight[i];
  }
  flat[pos++] = params.head_bias;
  return flat;
}

void unpack_params(const Eigen::VectorXd& flat, ScorerParams& params) {
  Eigen::Index pos = 0;
  for (ConvLayer& layer : params.layers) {
    for (Eigen::Index o = 0; o < layer.weight.rows(); ++o) {
      for (Eigen::Index k = 0; k < layer.weight.cols(); ++k) {
        layer.weight(o, k) = flat[pos++];
      }
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      layer.bias[i] = flat[pos++];
    }
  }
  for (Eigen::Index i = 0; i < params.head_weight.size(); ++i) {
    params.head_weight[i] = flat[pos++];
  }
  params.head_bias = flat[pos++];
  if (pos != flat.size()) {
    throw std::invalid_argument("unpack_params: size mismatch");
  }
}

double conv_score(const CostVolumeUnit& unit, const ScorerParams& params) {
  params.validate();
  if (params.input_channels() != unit.channel_count() + 2) {
    throw std::invalid_argument("conv_score: channel mismatch");
  }
  return conv_forward(unit_channels(unit), params, unit.height(), unit.width(),
                      /*keep_activations=*/false)
      .score;
}

UnitScorer make_baseline_scorer() {
  return [](const CostVolumeUnit& unit) { return baseline_score(unit); };
}

UnitScorer make_conv_scorer(std::shared_ptr<const ScorerParams> params) {
  if (!params) {
    throw std::invalid_argument("make_conv_scorer: null params");
  }
  params->validate();
  return [params](const CostVolumeUnit& unit) {
    return conv_score(unit, *params);
  };
}

ScoreVector score_batch(const std::vector<Pose>& candidates,
                        const VolumeInputs& in, const UnitScorer& scorer,
                        int segment_size, int workers,
                        const AggregateTransform& post_aggregate) {
  if (candidates.empty()) {
    throw std::invalid_argument("score_batch: at least one candidate required");
  }
  if (segment_size < 1) {
    throw std::invalid_argument("score_batch: segment_size must be >= 1");
  }
  const std::size_t n = candidates.size();
  ScoreVector result;
  result.scores.resize(static_cast<Eigen::Index>(n));

  const std::size_t seg =
      std::min<std::size_t>(static_cast<std::size_t>(segment_size), n);
  std::vector<AggregatedMap> slots(seg);
  for (std::size_t start = 0; start < n; start += seg) {
    const std::size_t count = std::min(seg, n - start);
    parallel_for(count, workers, [&](std::size_t s) {
      const std::size_t i = start + s;
      aggregate_into(*in.cloud, *in.features, in.point_weights, candidates[i],
                     *in.intrinsics, slots[s]);
      if (post_aggregate) {
        post_aggregate(slots[s]);
      }
      result.scores[static_cast<Eigen::Index>(i)] = scorer(build_unit(
          *in.image_features, *in.image_weights, slots[s],
          static_cast<int>(i)));
    });
  }
  result.best_index = argmax_ties_lowest(result.scores);
  return result;
}

double scorer_state_loss(const std::vector<Pose>& candidates,
                         const VolumeInputs& in, const ScorerParams& params,
                         int target, ScorerParams* grads,
                         Eigen::VectorXd* scores_out,
                         const AggregateTransform& post_aggregate) {
  if (candidates.empty()) {
    throw std::invalid_argument("scorer_state_loss: no candidates");
  }
  if (target < 0 || target >= static_cast<int>(candidates.size())) {
    throw std::out_of_range("scorer_state_loss: target out of range");
  }
  params.validate();

  const std::size_t n = candidates.size();
  std::vector<ForwardCache> caches;
  caches.reserve(n);
  Eigen::VectorXd scores(static_cast<Eigen::Index>(n));
  AggregatedMap slot;
  for (std::size_t i = 0; i < n; ++i) {
    aggregate_into(*in.cloud, *in.features, in.point_weights, candidates[i],
                   *in.intrinsics, slot);
    if (post_aggregate) {
      post_aggregate(slot);
    }
    const CostVolumeUnit unit = build_unit(
        *in.image_features, *in.image_weights, slot, static_cast<int>(i));
    if (params.input_channels() != unit.channel_count() + 2) {
      throw std::invalid_argument("scorer_state_loss: channel mismatch");
    }
    caches.push_back(conv_forward(unit_channels(unit), params, unit.height(),
                                  unit.width(),
                                  /*keep_activations=*/grads != nullptr));
    scores[static_cast<Eigen::Index>(i)] = caches.back().score;
  }

  const ScalarLossResult ce = cross_entropy_scores(scores, target);
  if (grads != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      conv_backward(caches[i], params, ce.grad[static_cast<Eigen::Index>(i)],
                    *grads);
    }
  }
  if (scores_out != nullptr) {
    *scores_out = scores;
  }
  return ce.value;
}

void TrainConfig::validate() const {
  if (steps < 1 || states_per_step < 1 || plateau_window < 1) {
    throw std::invalid_argument("TrainConfig: counts must be >= 1");
  }
  if (!(learning_rate > 0.0) || !(min_learning_rate > 0.0) ||
      !(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("TrainConfig: bad optimizer settings");
  }
  if (grid_points < 1 || grid_points % 2 == 0) {
    throw std::invalid_argument("TrainConfig: grid_points must be odd");
  }
  if (segment_size < 1) {
    throw std::invalid_argument("TrainConfig: segment_size must be >= 1");
  }
  if (!(zoif_threshold >= 0.0 && zoif_threshold <= 1.0)) {
    throw std::invalid_argument("TrainConfig: zoif_threshold outside [0,1]");
  }
  if (widths.empty()) {
    throw std::invalid_argument("TrainConfig: at least one conv layer");
  }
}

TrainResult train_scorer(const std::vector<ScenePair>& scenes,
                         const Schedule& schedule, const TrainConfig& config) {
  config.validate();
  schedule.validate();
  if (scenes.empty()) {
    throw std::invalid_argument("train_scorer: at least one scene required");
  }
  const int feature_dim = scenes.front().features.map2d.dim();
  std::vector<FeatureSet3D> effective;
  effective.reserve(scenes.size());
  for (const ScenePair& scene : scenes) {
    scene.validate();
    if (scene.features.map2d.dim() != feature_dim) {
      throw std::invalid_argument("train_scorer: mixed feature dimensions");
    }
    effective.push_back(zero_out_inferior(scene.features.set3d,
                                          scene.features.conf3d,
                                          config.zoif_threshold));
  }

  TrainResult result;
  result.params =
      init_scorer_params(2 * feature_dim + 2, config.widths, config.seed);
  Eigen::VectorXd velocity =
      Eigen::VectorXd::Zero(pack_params(result.params).size());
  std::mt19937_64 rng(mix_seed(config.seed, kTrainStream));
  double lr = config.learning_rate;
  result.loss_curve.reserve(static_cast<std::size_t>(config.steps));

  for (int step = 0; step < config.steps; ++step) {
    ScorerParams grads;
    double batch_loss = 0.0;
    for (int b = 0; b < config.states_per_step; ++b) {
      const std::size_t scene_idx = draw_index(rng, scenes.size());
      const ScenePair& scene = scenes[scene_idx];
      const int depth =
          static_cast<int>(draw_index(rng, schedule.iterations));

      SamplingSpace space = schedule.initial_space;
      for (int k = 0; k < depth; ++k) {
        space = shrink(space, schedule);
      }
      for (auto& axis : space.rotation) {
        if (axis.enabled) {
          axis.count = config.grid_points;
        }
      }
      for (auto& axis : space.translation) {
        if (axis.enabled) {
          axis.count = config.grid_points;
        }
      }

      // The state's current pose: ground truth displaced within the space, so
      // the grid around it brackets the truth exactly as at inference time.
      double angles[3] = {0.0, 0.0, 0.0};
      Vec3 offset = Vec3::Zero();
      for (int a = 0; a < 3; ++a) {
        if (space.rotation[a].enabled) {
          angles[a] = std::uniform_real_distribution<double>(
              -space.rotation[a].range, space.rotation[a].range)(rng);
        }
        if (space.translation[a].enabled) {
          offset[a] = std::uniform_real_distribution<double>(
              -space.translation[a].range, space.translation[a].range)(rng);
        }
      }
      const Pose current =
          compose_pose(scene.gt_pose,
                       euler_to_rotation(angles[0], angles[1], angles[2]),
                       offset);

      const std::vector<Pose> candidates = sample_candidates(current, space);
      const int target = static_cast<int>(
          nearest_candidate_index(candidates, scene.gt_pose, space));

      VolumeInputs in;
      in.cloud = &scene.cloud;
      in.features = &effective[scene_idx];
      in.point_weights = &scene.features.conf3d;
      in.image_features = &scene.features.map2d;
      in.image_weights = &scene.features.conf2d;
      in.intrinsics = &scene.intrinsics;
      batch_loss +=
          scorer_state_loss(candidates, in, result.params, target, &grads);
    }
    batch_loss /= config.states_per_step;
    if (!std::isfinite(batch_loss)) {
      throw std::runtime_error("train_scorer: loss diverged at step " +
                               std::to_string(step));
    }
    result.loss_curve.push_back(batch_loss);

    const Eigen::VectorXd gradient =
        pack_params(grads) / static_cast<double>(config.states_per_step);
    velocity = config.momentum * velocity - lr * gradient;
    unpack_params(pack_params(result.params) + velocity, result.params);

    // Halve the step when a full window stops improving on the previous one.
    const int done = step + 1;
    if (done % config.plateau_window == 0 &&
        done >= 2 * config.plateau_window) {
      const auto window_mean = [&](int first) {
        double sum = 0.0;
        for (int i = first; i < first + config.plateau_window; ++i) {
          sum += result.loss_curve[static_cast<std::size_t>(i)];
        }
        return sum / config.plateau_window;
      };
      const double previous = window_mean(done - 2 * config.plateau_window);
      const double current = window_mean(done - config.plateau_window);
      if (previous - current <
          config.plateau_tolerance * std::max(previous, 1e-12)) {
        lr = std::max(lr / 2.0, config.min_learning_rate);
      }
    }
  }
  result.final_learning_rate = lr;
  return result;
}

}  // namespace posegrid
