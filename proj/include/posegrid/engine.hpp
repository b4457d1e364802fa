#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include "posegrid/sampling.hpp"
#include "posegrid/scene.hpp"
#include "posegrid/scoring.hpp"

namespace posegrid {

enum class ScorerChoice { kBaseline, kConv };

struct EngineConfig {
  Schedule schedule = Schedule::defaults();
  ScorerChoice scorer = ScorerChoice::kBaseline;
  std::shared_ptr<const ScorerParams> scorer_params;  // required for kConv
  bool zoif_enabled = true;
  bool weight2d_enabled = true;
  bool weight3d_enabled = true;
  double zoif_threshold = 0.5;
  int segment_size = 81;
  int workers = 1;
  Pose initial_pose = Pose::identity();

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;  // lambda, 0-based
  int best_index = 0;
  double best_score = 0.0;
  double rot_range = 0.0;    // enabled rotation half-range this iteration
  double trans_range = 0.0;  // enabled translation half-range this iteration
  double rre_deg = 0.0;      // vs truth; NaN when truth is unknown
  double rte_m = 0.0;
};

struct RegistrationResult {
  Pose final_pose;
  std::vector<IterationRecord> trace;
  int iterations_run = 0;
};

/// No candidate pose projected a single point into the image: the instance is
/// ill-posed for registration. iteration() is -1 when raised outside the
/// engine loop.
class NoOverlapError : public std::runtime_error {
 public:
  explicit NoOverlapError(int iteration);
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

struct StepResult {
  Pose pose;
  ScoreVector scores;
};

/// One engine iteration: sample candidates around `current`, score them and
/// adopt the argmax. The inputs must already carry the per-scene preparation
/// (ZOIF, weight substitution) of run_registration.
StepResult step(const Pose& current, const SamplingSpace& space,
                const VolumeInputs& in, const UnitScorer& scorer,
                int segment_size, int workers = 1,
                const AggregateTransform& post_aggregate = {});

/// The full coarse-to-fine loop. Feature preparation happens once, then
/// schedule.iterations steps run with the space shrinking in between.
/// scene.gt_pose is used only for the trace errors, and only when truth_known.
RegistrationResult run_registration(const ScenePair& scene,
                                    const EngineConfig& config,
                                    bool truth_known = true);

}  // namespace posegrid
