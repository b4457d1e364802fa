#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "posegrid/costvolume.hpp"
#include "posegrid/sampling.hpp"
#include "posegrid/scene.hpp"

namespace posegrid {

/// Scores in candidate order; best_index is the argmax with ties going to the
/// lowest index.
struct ScoreVector {
  Eigen::VectorXd scores;
  int best_index = 0;
};

int argmax_ties_lowest(const Eigen::VectorXd& scores);

/// Weighted mean feature distance over occupied pixels, negated so that
/// higher is better. A unit with no occupied pixel, or whose occupied pixels
/// all carry zero weight, offers no evidence and scores -inf, ordering below
/// every candidate with support.
double baseline_score(const CostVolumeUnit& unit);

/// One 3x3 stride-1 zero-padded convolution layer. weight row o holds the
/// kernel of output channel o flattened as (in_channel * 9 + ky * 3 + kx).
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  Eigen::MatrixXd weight;  // out_channels x (in_channels * 9)
  Eigen::VectorXd bias;    // out_channels
};

/// The trainable scorer: a stack of 3x3 conv layers with leaky nonlinearity
/// (slope 0.1), a global average pool and an affine head. Input channel count
/// must equal 2f + 2: image features, aggregated features and the two weight
/// planes.
struct ScorerParams {
  std::vector<ConvLayer> layers;
  Eigen::VectorXd head_weight;  // last layer's out_channels
  double head_bias = 0.0;

  int input_channels() const;
  void validate() const;
};

/// He-style random init, biases zero. Default widths give the 4-layer scorer;
/// widths may extend up to the full 10-layer stack.
ScorerParams init_scorer_params(int input_channels,
                                const std::vector<int>& widths = {32, 32, 16,
                                                                  8},
                                std::uint64_t seed = 0);

/// Versioned single-file serialization in the flat tensor container format.
void save_scorer_params(const std::string& path, const ScorerParams& params);
ScorerParams load_scorer_params(const std::string& path);

Eigen::VectorXd pack_params(const ScorerParams& params);
void unpack_params(const Eigen::VectorXd& flat, ScorerParams& params);

/// Deterministic forward pass over one unit's [F2d | aggregated | W2d | Wagg]
/// channel stack.
double conv_score(const CostVolumeUnit& unit, const ScorerParams& params);

using UnitScorer = std::function<double(const CostVolumeUnit&)>;

UnitScorer make_baseline_scorer();
UnitScorer make_conv_scorer(std::shared_ptr<const ScorerParams> params);

using AggregateTransform = std::function<void(AggregatedMap&)>;

/// Builds and scores every candidate's unit, materializing at most
/// segment_size aggregations at a time. post_aggregate, when set, edits each
/// aggregated map before scoring (the engine's weighting ablations). Output
/// is independent of segment_size and worker count.
ScoreVector score_batch(const std::vector<Pose>& candidates,
                        const VolumeInputs& in, const UnitScorer& scorer,
                        int segment_size, int workers = 1,
                        const AggregateTransform& post_aggregate = {});

/// Cross-entropy of one training state's conv scores against the target
/// candidate. Parameter gradients from hand-derived layer adjoints are
/// accumulated into *grads when given; scores_out receives the raw scores.
double scorer_state_loss(const std::vector<Pose>& candidates,
                         const VolumeInputs& in, const ScorerParams& params,
                         int target, ScorerParams* grads = nullptr,
                         Eigen::VectorXd* scores_out = nullptr,
                         const AggregateTransform& post_aggregate = {});

struct TrainConfig {
  int steps = 200;
  int states_per_step = 4;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int plateau_window = 25;      // steps per plateau comparison window
  double plateau_tolerance = 1e-3;  // required relative improvement
  double min_learning_rate = 1e-6;
  int grid_points = 3;  // per enabled axis in training states
  int segment_size = 32;
  double zoif_threshold = 0.5;
  std::vector<int> widths = {32, 32, 16, 8};
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  ScorerParams params;
  std::vector<double> loss_curve;  // one mean batch loss per step
  double final_learning_rate = 0.0;
};

/// SGD with momentum on the conv scorer, supervised by cross-entropy against
/// the candidate nearest ground truth. Each step draws states at random
/// shrink depths of the schedule so training covers the inference
/// convergence states. Throws on non-finite loss.
TrainResult train_scorer(const std::vector<ScenePair>& scenes,
                         const Schedule& schedule, const TrainConfig& config);

}  // namespace posegrid
