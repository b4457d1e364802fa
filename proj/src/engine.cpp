#include "posegrid/engine.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <string>

namespace posegrid {

void EngineConfig::validate() const {
  schedule.validate();
  if (scorer == ScorerChoice::kConv && !scorer_params) {
    throw std::invalid_argument("EngineConfig: conv scorer needs parameters");
  }
  if (segment_size < 1) {
    throw std::invalid_argument("EngineConfig: segment_size must be >= 1");
  }
  if (!(zoif_threshold >= 0.0 && zoif_threshold <= 1.0)) {
    throw std::invalid_argument("EngineConfig: zoif_threshold outside [0,1]");
  }
}

NoOverlapError::NoOverlapError(int iteration)
    : std::runtime_error(
          iteration < 0
              ? std::string("no candidate pose projects any point")
              : "no candidate pose projects any point at iteration " +
                    std::to_string(iteration)),
      iteration_(iteration) {}

StepResult step(const Pose& current, const SamplingSpace& space,
                const VolumeInputs& in, const UnitScorer& scorer,
                int segment_size, int workers,
                const AggregateTransform& post_aggregate) {
  const std::vector<Pose> candidates = sample_candidates(current, space);

  std::atomic<bool> any_occupied{false};
  const UnitScorer tracking = [&](const CostVolumeUnit& unit) {
    if (!any_occupied.load(std::memory_order_relaxed) &&
        unit.aggregated->occupancy.maxCoeff() > 0) {
      any_occupied.store(true, std::memory_order_relaxed);
    }
    return scorer(unit);
  };

  StepResult result;
  result.scores = score_batch(candidates, in, tracking, segment_size, workers,
                              post_aggregate);
  if (!any_occupied.load()) {
    throw NoOverlapError(-1);
  }
  result.pose = candidates[static_cast<std::size_t>(result.scores.best_index)];
  return result;
}

RegistrationResult run_registration(const ScenePair& scene,
                                    const EngineConfig& config,
                                    bool truth_known) {
  config.validate();
  scene.cloud.validate();
  scene.intrinsics.validate();

  // Per-scene preparation: features and weight planes are pose independent,
  // so ZOIF and the ablation substitutions happen exactly once.
  const FeatureSet3D effective_features =
      config.zoif_enabled
          ? zero_out_inferior(scene.features.set3d, scene.features.conf3d,
                              config.zoif_threshold)
          : scene.features.set3d;
  ConfidenceMap2D effective_conf2d = scene.features.conf2d;
  if (!config.weight2d_enabled) {
    effective_conf2d.values.setOnes();
  }

  VolumeInputs in;
  in.cloud = &scene.cloud;
  in.features = &effective_features;
  in.point_weights =
      config.weight3d_enabled ? &scene.features.conf3d : nullptr;
  in.image_features = &scene.features.map2d;
  in.image_weights = &effective_conf2d;
  in.intrinsics = &scene.intrinsics;

  AggregateTransform post_aggregate;
  if (!config.weight3d_enabled) {
    post_aggregate = [](AggregatedMap& map) { map.weights.setOnes(); };
  }

  UnitScorer scorer;
  if (config.scorer == ScorerChoice::kBaseline) {
    scorer = make_baseline_scorer();
  } else {
    scorer = make_conv_scorer(config.scorer_params);
  }

  RegistrationResult result;
  result.trace.reserve(static_cast<std::size_t>(config.schedule.iterations));
  Pose pose = config.initial_pose;
  SamplingSpace space = config.schedule.initial_space;
  for (int lambda = 0; lambda < config.schedule.iterations; ++lambda) {
    if (lambda > 0) {
      space = shrink(space, config.schedule);
    }
    StepResult stepped;
    try {
      stepped = step(pose, space, in, scorer, config.segment_size,
                     config.workers, post_aggregate);
    } catch (const NoOverlapError&) {
      throw NoOverlapError(lambda);
    }
    pose = stepped.pose;

    IterationRecord record;
    record.iteration = lambda;
    record.best_index = stepped.scores.best_index;
    record.best_score = stepped.scores.scores[stepped.scores.best_index];
    record.rot_range = space.max_rotation_range();
    record.trans_range = space.max_translation_range();
    if (truth_known) {
      const PoseErrors errors = pose_errors(pose, scene.gt_pose);
      record.rre_deg = errors.rre_deg;
      record.rte_m = errors.rte_m;
    } else {
      record.rre_deg = std::numeric_limits<double>::quiet_NaN();
      record.rte_m = std::numeric_limits<double>::quiet_NaN();
    }
    result.trace.push_back(record);
  }
  result.final_pose = pose;
  result.iterations_run = config.schedule.iterations;
  return result;
}

}  // namespace posegrid
