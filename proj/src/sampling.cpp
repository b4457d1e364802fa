#include "posegrid/sampling.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace posegrid {

namespace {

int checked_axis_count(const AxisSampling& axis) {
  if (!axis.enabled) {
    return 1;
  }
  return axis.count;
}

void validate_axis(const AxisSampling& axis, const char* what) {
  if (axis.count < 1 || axis.count % 2 == 0) {
    throw std::invalid_argument(std::string(what) +
                                ": sample counts must be odd and >= 1");
  }
  if (!(axis.range >= 0.0) || !std::isfinite(axis.range)) {
    throw std::invalid_argument(std::string(what) +
                                ": ranges must be finite and >= 0");
  }
}

}  // namespace

void SamplingSpace::validate() const {
  for (const auto& axis : rotation) {
    validate_axis(axis, "sampling space (rotation)");
  }
  for (const auto& axis : translation) {
    validate_axis(axis, "sampling space (translation)");
  }
}

int SamplingSpace::rotation_count() const {
  int n = 1;
  for (const auto& axis : rotation) {
    n *= checked_axis_count(axis);
  }
  return n;
}

int SamplingSpace::translation_count() const {
  int n = 1;
  for (const auto& axis : translation) {
    n *= checked_axis_count(axis);
  }
  return n;
}

int SamplingSpace::candidate_count() const {
  return rotation_count() * translation_count();
}

double SamplingSpace::max_rotation_range() const {
  double r = 0.0;
  for (const auto& axis : rotation) {
    if (axis.enabled) {
      r = std::max(r, axis.range);
    }
  }
  return r;
}

double SamplingSpace::max_translation_range() const {
  double r = 0.0;
  for (const auto& axis : translation) {
    if (axis.enabled) {
      r = std::max(r, axis.range);
    }
  }
  return r;
}

void Schedule::validate() const {
  initial_space.validate();
  if (!(rot_shrink > 0.0 && rot_shrink < 1.0) ||
      !(trans_shrink > 0.0 && trans_shrink < 1.0)) {
    throw std::invalid_argument("schedule: shrink factors must lie in (0,1)");
  }
  if (iterations < 1) {
    throw std::invalid_argument("schedule: at least one iteration required");
  }
}

Schedule Schedule::defaults() {
  Schedule s;
  s.initial_space.rotation[0] = {true, 180.0, 9};  // yaw over the full circle
  s.initial_space.translation[0] = {true, 5.0, 9};
  s.initial_space.translation[2] = {true, 5.0, 9};
  s.iterations = 9;
  // After iterations-1 = 8 shrinks the rotation full range is
  // 360 * 0.9/360 = 0.9 deg and the translation full range 10 * 0.45/10 = 0.45 m.
  s.rot_shrink = std::pow(0.9 / 360.0, 1.0 / 8.0);
  s.trans_shrink = std::pow(0.45 / 10.0, 1.0 / 8.0);
  return s;
}

std::vector<double> axis_offsets(const AxisSampling& axis) {
  if (!axis.enabled || axis.count == 1) {
    return {0.0};
  }
  const int half = (axis.count - 1) / 2;
  const double step = axis.range / half;
  std::vector<double> offsets;
  offsets.reserve(static_cast<std::size_t>(axis.count));
  for (int k = -half; k <= half; ++k) {
    offsets.push_back(k * step);  // k = 0 gives an exact zero offset
  }
  return offsets;
}

std::vector<Pose> sample_candidates(const Pose& current,
                                    const SamplingSpace& space) {
  space.validate();

  const auto yaw = axis_offsets(space.rotation[0]);
  const auto pitch = axis_offsets(space.rotation[1]);
  const auto roll = axis_offsets(space.rotation[2]);
  const auto tx = axis_offsets(space.translation[0]);
  const auto ty = axis_offsets(space.translation[1]);
  const auto tz = axis_offsets(space.translation[2]);

  std::vector<Pose> candidates;
  candidates.reserve(static_cast<std::size_t>(space.candidate_count()));
  for (double y : yaw) {
    for (double p : pitch) {
      for (double r : roll) {
        const Mat3 delta_rot = euler_to_rotation(y, p, r);
        for (double x : tx) {
          for (double yy : ty) {
            for (double z : tz) {
              candidates.push_back(
                  compose_pose(current, delta_rot, Vec3(x, yy, z)));
            }
          }
        }
      }
    }
  }
  return candidates;
}

SamplingSpace shrink(const SamplingSpace& space, const Schedule& schedule) {
  SamplingSpace out = space;
  for (auto& axis : out.rotation) {
    axis.range *= schedule.rot_shrink;
  }
  for (auto& axis : out.translation) {
    axis.range *= schedule.trans_shrink;
  }
  return out;
}

std::size_t nearest_candidate_index(const std::vector<Pose>& candidates,
                                    const Pose& truth,
                                    const SamplingSpace& space) {
  if (candidates.empty()) {
    throw std::invalid_argument("nearest_candidate_index: empty candidate list");
  }
  const double rot_full = 2.0 * space.max_rotation_range();
  const double trans_full = 2.0 * space.max_translation_range();

  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const PoseErrors err = pose_errors(candidates[i], truth);
    double d = 0.0;
    if (rot_full > 0.0) {
      d += err.rre_deg / rot_full;
    }
    if (trans_full > 0.0) {
      d += err.rte_m / trans_full;
    }
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

}  // namespace posegrid
