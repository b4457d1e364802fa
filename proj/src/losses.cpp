#include "posegrid/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace posegrid {

namespace {

constexpr double kPredClamp = 1e-7;

double stable_log1p_exp(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                  : std::exp(z) / (1.0 + std::exp(z));
}

// Pairwise feature distance matrix; row i is the pixel side of anchor i,
// column j the point side of anchor j.
Eigen::MatrixXd pair_distances(const FeatureMap2D& f2d, const FeatureSet3D& f3d,
                               const CorrespondenceSets& sets) {
  const int n = sets.size();
  Eigen::MatrixXd d(n, n);
  for (int i = 0; i < n; ++i) {
    const auto pixel_row = f2d.values.row(sets.anchor_pixel[i]);
    for (int j = 0; j < n; ++j) {
      d(i, j) = (pixel_row - f3d.values.row(sets.anchor_point[j])).norm();
    }
  }
  return d;
}

struct PairTerm {
  int i = 0;  // pixel-side anchor position
  int j = 0;  // point-side anchor position
  double theta = 0.0;
  double exponent = 0.0;
};

// One anchor of either direction: log(1 + P*N) with softmax pair weights
// for the gradient. coef_out receives d loss / d D(i,j) per pair, signed.
double anchor_loss(std::vector<PairTerm>& pos, std::vector<PairTerm>& neg,
                   std::vector<std::pair<PairTerm, double>>& coef_out) {
  double max_p = pos[0].exponent;
  for (const auto& t : pos) max_p = std::max(max_p, t.exponent);
  double sum_p = 0.0;
  for (const auto& t : pos) sum_p += std::exp(t.exponent - max_p);
  const double log_p = max_p + std::log(sum_p);

  double max_n = neg[0].exponent;
  for (const auto& t : neg) max_n = std::max(max_n, t.exponent);
  double sum_n = 0.0;
  for (const auto& t : neg) sum_n += std::exp(t.exponent - max_n);
  const double log_n = max_n + std::log(sum_n);

  const double z = log_p + log_n;
  const double s = sigmoid(z);
  for (const auto& t : pos) {
    const double w = std::exp(t.exponent - max_p) / sum_p;
    coef_out.emplace_back(t, s * w * t.theta);
  }
  for (const auto& t : neg) {
    const double w = std::exp(t.exponent - max_n) / sum_n;
    coef_out.emplace_back(t, -s * w * t.theta);
  }
  return stable_log1p_exp(z);
}

CircleLossResult evaluate_circle(const FeatureMap2D& f2d,
                                 const FeatureSet3D& f3d,
                                 const CorrespondenceSets& sets,
                                 const CircleLossConfig& config,
                                 const ThetaTables* frozen) {
  config.validate();
  if (!f2d.values.allFinite() || !f3d.values.allFinite()) {
    throw std::invalid_argument("circle_loss: non-finite feature input");
  }
  const int n = sets.size();
  CircleLossResult result;
  result.grad_2d = RowMatrixXd::Zero(f2d.values.rows(), f2d.values.cols());
  result.grad_3d = RowMatrixXd::Zero(f3d.values.rows(), f3d.values.cols());
  if (n == 0) {
    return result;
  }

  const Eigen::MatrixXd d = pair_distances(f2d, f3d, sets);
  const auto theta_pos = [&](int i, int idx, int j) {
    return frozen != nullptr
               ? frozen->pos[i][idx]
               : std::max(0.0, config.gamma * (d(i, j) - config.margin_pos));
  };
  const auto theta_neg = [&](int i, int idx, int j) {
    return frozen != nullptr
               ? frozen->neg[i][idx]
               : std::max(0.0, config.gamma * (config.margin_neg - d(i, j)));
  };

  // Transposed adjacency for the point-anchored direction, carrying the
  // source list position so frozen tables stay addressable.
  std::vector<std::vector<std::pair<int, int>>> tpos(n), tneg(n);
  for (int i = 0; i < n; ++i) {
    for (std::size_t idx = 0; idx < sets.positives[i].size(); ++idx) {
      tpos[sets.positives[i][idx]].emplace_back(i, static_cast<int>(idx));
    }
    for (std::size_t idx = 0; idx < sets.negatives[i].size(); ++idx) {
      tneg[sets.negatives[i][idx]].emplace_back(i, static_cast<int>(idx));
    }
  }

  int used_2d = 0;
  int used_3d = 0;
  for (int a = 0; a < n; ++a) {
    const bool ok_2d = !sets.positives[a].empty() && !sets.negatives[a].empty();
    const bool ok_3d = !tpos[a].empty() && !tneg[a].empty();
    used_2d += ok_2d ? 1 : 0;
    used_3d += ok_3d ? 1 : 0;
    result.skipped_anchors += (ok_2d ? 0 : 1) + (ok_3d ? 0 : 1);
  }

  std::vector<PairTerm> pos_terms, neg_terms;
  std::vector<std::pair<PairTerm, double>> coefs;
  const auto accumulate = [&](double scale) {
    for (const auto& [term, coef] : coefs) {
      const double dist = d(term.i, term.j);
      if (dist < 1e-12) {
        continue;
      }
      const auto diff = (f2d.values.row(sets.anchor_pixel[term.i]) -
                         f3d.values.row(sets.anchor_point[term.j])) /
                        dist;
      result.grad_2d.row(sets.anchor_pixel[term.i]) += scale * coef * diff;
      result.grad_3d.row(sets.anchor_point[term.j]) -= scale * coef * diff;
    }
    coefs.clear();
  };

  if (used_2d > 0) {
    const double scale = 1.0 / used_2d;
    double total = 0.0;
    for (int a = 0; a < n; ++a) {
      if (sets.positives[a].empty() || sets.negatives[a].empty()) {
        continue;
      }
      pos_terms.clear();
      neg_terms.clear();
      for (std::size_t idx = 0; idx < sets.positives[a].size(); ++idx) {
        const int j = sets.positives[a][idx];
        const double theta = theta_pos(a, static_cast<int>(idx), j);
        pos_terms.push_back(
            {a, j, theta, theta * (d(a, j) - config.margin_pos)});
      }
      for (std::size_t idx = 0; idx < sets.negatives[a].size(); ++idx) {
        const int j = sets.negatives[a][idx];
        const double theta = theta_neg(a, static_cast<int>(idx), j);
        neg_terms.push_back(
            {a, j, theta, theta * (config.margin_neg - d(a, j))});
      }
      total += anchor_loss(pos_terms, neg_terms, coefs);
      accumulate(scale);
    }
    result.value += scale * total;
  }

  if (used_3d > 0) {
    const double scale = 1.0 / used_3d;
    double total = 0.0;
    for (int a = 0; a < n; ++a) {
      if (tpos[a].empty() || tneg[a].empty()) {
        continue;
      }
      pos_terms.clear();
      neg_terms.clear();
      for (const auto& [i, idx] : tpos[a]) {
        const double theta = theta_pos(i, idx, a);
        pos_terms.push_back(
            {i, a, theta, theta * (d(i, a) - config.margin_pos)});
      }
      for (const auto& [i, idx] : tneg[a]) {
        const double theta = theta_neg(i, idx, a);
        neg_terms.push_back(
            {i, a, theta, theta * (config.margin_neg - d(i, a))});
      }
      total += anchor_loss(pos_terms, neg_terms, coefs);
      accumulate(scale);
    }
    result.value += scale * total;
  }

  return result;
}

}  // namespace

void CircleLossConfig::validate() const {
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("CircleLossConfig: gamma must be positive");
  }
  if (!(margin_pos >= 0.0) || !(margin_pos < margin_neg)) {
    throw std::invalid_argument(
        "CircleLossConfig: require 0 <= margin_pos < margin_neg");
  }
  if (!(radius >= 0.0)) {
    throw std::invalid_argument("CircleLossConfig: radius must be >= 0");
  }
}

CorrespondenceSets build_pos_neg_sets(const ScenePair& scene,
                                      const CircleLossConfig& config) {
  config.validate();
  CorrespondenceSets sets;
  std::vector<double> proj_x, proj_y;
  for (Eigen::Index j = 0; j < scene.cloud.size(); ++j) {
    const Vec3 p = scene.cloud.points.row(j).transpose();
    const auto pixel = project(p, scene.gt_pose, scene.intrinsics);
    if (!pixel) {
      continue;
    }
    const auto cont = project_continuous(p, scene.gt_pose, scene.intrinsics);
    sets.anchor_pixel.push_back(
        scene.features.map2d.index(pixel->u, pixel->v));
    sets.anchor_point.push_back(static_cast<int>(j));
    proj_x.push_back(cont->x);
    proj_y.push_back(cont->y);
  }
  const int n = sets.size();
  sets.positives.resize(n);
  sets.negatives.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double dist = std::hypot(proj_x[i] - proj_x[j],
                                     proj_y[i] - proj_y[j]);
      if (dist <= config.radius) {
        sets.positives[i].push_back(j);
      } else {
        sets.negatives[i].push_back(j);
      }
    }
  }
  return sets;
}

ThetaTables capture_thetas(const FeatureMap2D& f2d, const FeatureSet3D& f3d,
                           const CorrespondenceSets& sets,
                           const CircleLossConfig& config) {
  config.validate();
  const Eigen::MatrixXd d = pair_distances(f2d, f3d, sets);
  const int n = sets.size();
  ThetaTables tables;
  tables.pos.resize(n);
  tables.neg.resize(n);
  for (int i = 0; i < n; ++i) {
    for (const int j : sets.positives[i]) {
      tables.pos[i].push_back(
          std::max(0.0, config.gamma * (d(i, j) - config.margin_pos)));
    }
    for (const int j : sets.negatives[i]) {
      tables.neg[i].push_back(
          std::max(0.0, config.gamma * (config.margin_neg - d(i, j))));
    }
  }
  return tables;
}

CircleLossResult circle_loss(const FeatureMap2D& f2d, const FeatureSet3D& f3d,
                             const CorrespondenceSets& sets,
                             const CircleLossConfig& config) {
  return evaluate_circle(f2d, f3d, sets, config, nullptr);
}

CircleLossResult circle_loss_frozen(const FeatureMap2D& f2d,
                                    const FeatureSet3D& f3d,
                                    const CorrespondenceSets& sets,
                                    const CircleLossConfig& config,
                                    const ThetaTables& thetas) {
  return evaluate_circle(f2d, f3d, sets, config, &thetas);
}

ScalarLossResult focal_loss(const Eigen::VectorXd& pred,
                            const Eigen::VectorXd& labels, double alpha,
                            double gamma_f) {
  if (pred.size() != labels.size()) {
    throw std::invalid_argument("focal_loss: size mismatch");
  }
  if (pred.size() == 0) {
    throw std::invalid_argument("focal_loss: empty input");
  }
  ScalarLossResult result;
  result.grad = Eigen::VectorXd::Zero(pred.size());
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double y = labels[i];
    if (y != 0.0 && y != 1.0) {
      throw std::invalid_argument("focal_loss: labels must be 0 or 1");
    }
    const double p = std::clamp(pred[i], kPredClamp, 1.0 - kPredClamp);
    if (y == 1.0) {
      const double base = std::pow(1.0 - p, gamma_f);
      result.value += inv_n * (-alpha * base * std::log(p));
      result.grad[i] =
          inv_n * (-alpha) *
          (-gamma_f * std::pow(1.0 - p, gamma_f - 1.0) * std::log(p) +
           base / p);
    } else {
      const double base = std::pow(p, gamma_f);
      result.value += inv_n * (-(1.0 - alpha) * base * std::log1p(-p));
      result.grad[i] =
          inv_n * (-(1.0 - alpha)) *
          (gamma_f * std::pow(p, gamma_f - 1.0) * std::log1p(-p) -
           base / (1.0 - p));
    }
    if (pred[i] < kPredClamp || pred[i] > 1.0 - kPredClamp) {
      result.grad[i] = 0.0;  // clamp is flat outside its interval
    }
  }
  return result;
}

ScalarLossResult cross_entropy_scores(const Eigen::VectorXd& scores,
                                      int target) {
  if (target < 0 || target >= scores.size()) {
    throw std::out_of_range("cross_entropy_scores: target out of range");
  }
  const double max_score = scores.maxCoeff();
  const Eigen::VectorXd shifted = (scores.array() - max_score).exp();
  const double denom = shifted.sum();
  ScalarLossResult result;
  result.value = std::log(denom) + max_score - scores[target];
  result.grad = shifted / denom;
  result.grad[target] -= 1.0;
  return result;
}

double grad_check(const ScalarFunction& fn, const Eigen::VectorXd& point,
                  double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("grad_check: epsilon must be positive");
  }
  const auto [value, analytic] = fn(point);
  if (!std::isfinite(value) || !analytic.allFinite()) {
    throw std::runtime_error("grad_check: non-finite evaluation");
  }
  if (analytic.size() != point.size()) {
    throw std::invalid_argument("grad_check: gradient size mismatch");
  }
  double worst = 0.0;
  Eigen::VectorXd x = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    x[i] = point[i] + epsilon;
    const double hi = fn(x).first;
    x[i] = point[i] - epsilon;
    const double lo = fn(x).first;
    x[i] = point[i];
    if (!std::isfinite(hi) || !std::isfinite(lo)) {
      throw std::runtime_error("grad_check: non-finite evaluation");
    }
    const double numeric = (hi - lo) / (2.0 * epsilon);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace posegrid
