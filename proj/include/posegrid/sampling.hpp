#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "posegrid/geometry.hpp"

namespace posegrid {

/// One searched degree of freedom: a symmetric half-range and an odd sample
/// count. Disabled axes contribute the single offset 0.
struct AxisSampling {
  bool enabled = false;
  double range = 0.0;  // half-range; degrees for rotation, meters for translation
  int count = 1;
};

/// Rotation axes are ordered yaw (camera Y), pitch (X), roll (Z); translation
/// axes x, y, z in the camera frame of the current pose.
struct SamplingSpace {
  std::array<AxisSampling, 3> rotation;
  std::array<AxisSampling, 3> translation;

  void validate() const;
  int rotation_count() const;     // N_r
  int translation_count() const;  // N_t
  int candidate_count() const;    // N_p = N_r * N_t
  double max_rotation_range() const;
  double max_translation_range() const;
};

struct Schedule {
  SamplingSpace initial_space;
  double rot_shrink = 0.5;    // multiplicative, in (0,1)
  double trans_shrink = 0.5;  // multiplicative, in (0,1)
  int iterations = 1;

  void validate() const;

  /// Yaw over the full circle (9 samples) plus a 9x9 ground-plane translation
  /// grid of half-range 5 m, run for 9 iterations. The shrink factors are
  /// chosen so the full ranges end below 1 degree and 0.5 m.
  static Schedule defaults();
};

/// Uniform inclusive offset grid over [-range, +range]; the midpoint offset is
/// exactly 0. A disabled axis or count 1 yields the single offset 0.
std::vector<double> axis_offsets(const AxisSampling& axis);

/// Cartesian product of the per-axis offset grids around `current`, ordered
/// rotation-major: index = rot_index * N_t + trans_index, where rot_index
/// nests yaw(outer)/pitch/roll(inner) and trans_index nests x(outer)/y/z(inner),
/// each axis scanned from -range to +range.
std::vector<Pose> sample_candidates(const Pose& current,
                                    const SamplingSpace& space);

/// Multiplies every enabled range by the schedule's shrink factor; sample
/// counts are unchanged, so the step size shrinks with the range.
SamplingSpace shrink(const SamplingSpace& space, const Schedule& schedule);

/// Argmin over candidates of rre/rot_full_range + rte/trans_full_range, where
/// the full ranges are twice the largest enabled half-range (a term is dropped
/// when its side of the space has no enabled axis). Ties go to the lowest index.
std::size_t nearest_candidate_index(const std::vector<Pose>& candidates,
                                    const Pose& truth,
                                    const SamplingSpace& space);

}  // namespace posegrid
