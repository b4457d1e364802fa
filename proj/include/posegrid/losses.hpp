#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "posegrid/features.hpp"
#include "posegrid/scene.hpp"

namespace posegrid {

struct CircleLossConfig {
  double gamma = 10.0;
  double margin_pos = 0.1;
  double margin_neg = 1.4;
  double radius = 1.0;  // pixels, for positive set construction

  void validate() const;
};

/// Anchor i is the pixel of sampled point i; positives/negatives hold
/// positions into the anchor list, so the 3D-anchored direction is the
/// transpose of the same relation.
struct CorrespondenceSets {
  std::vector<int> anchor_pixel;               // flattened pixel index
  std::vector<int> anchor_point;               // cloud row index
  std::vector<std::vector<int>> positives;     // disjoint from negatives
  std::vector<std::vector<int>> negatives;

  int size() const { return static_cast<int>(anchor_pixel.size()); }
};

CorrespondenceSets build_pos_neg_sets(const ScenePair& scene,
                                      const CircleLossConfig& config);

struct CircleLossResult {
  double value = 0.0;
  RowMatrixXd grad_2d;  // d value / d f2d.values
  RowMatrixXd grad_3d;  // d value / d f3d.values
  int skipped_anchors = 0;
};

/// Adaptive-weight tables aligned with sets.positives / sets.negatives.
/// Pair weights are direction-independent, so one table serves both the
/// pixel-anchored and point-anchored sums.
struct ThetaTables {
  std::vector<std::vector<double>> pos;
  std::vector<std::vector<double>> neg;
};

ThetaTables capture_thetas(const FeatureMap2D& f2d, const FeatureSet3D& f3d,
                           const CorrespondenceSets& sets,
                           const CircleLossConfig& config);

/// Both anchoring directions summed. Weights are recomputed from the current
/// distances for the value but held constant in the gradient, so finite
/// differences of this function do not reproduce grad_2d/grad_3d; use
/// circle_loss_frozen with thetas captured at the same point for that.
CircleLossResult circle_loss(const FeatureMap2D& f2d, const FeatureSet3D& f3d,
                             const CorrespondenceSets& sets,
                             const CircleLossConfig& config);

/// Same loss with externally fixed weight tables. At the capture point its
/// value matches circle_loss and its gradient is the detached one.
CircleLossResult circle_loss_frozen(const FeatureMap2D& f2d,
                                    const FeatureSet3D& f3d,
                                    const CorrespondenceSets& sets,
                                    const CircleLossConfig& config,
                                    const ThetaTables& thetas);

struct ScalarLossResult {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// Mean focal loss over elements. Predictions are clamped to
/// [1e-7, 1 - 1e-7] before evaluation; labels must be exactly 0 or 1.
ScalarLossResult focal_loss(const Eigen::VectorXd& pred,
                            const Eigen::VectorXd& labels, double alpha = 0.25,
                            double gamma_f = 2.0);

/// -log softmax(scores)[target]; gradient softmax(scores) - one_hot(target).
ScalarLossResult cross_entropy_scores(const Eigen::VectorXd& scores,
                                      int target);

using ScalarFunction =
    std::function<std::pair<double, Eigen::VectorXd>(const Eigen::VectorXd&)>;

/// Central-difference check. Returns the max over coordinates of
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6). The absolute
/// floor absorbs difference-quotient roundoff on coordinates whose true
/// gradient is at or near zero, which no finite epsilon can resolve.
double grad_check(const ScalarFunction& fn, const Eigen::VectorXd& point,
                  double epsilon);

}  // namespace posegrid
