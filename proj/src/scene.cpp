#include "posegrid/scene.hpp"

#include <stdexcept>

namespace posegrid {

void ScenePair::validate() const {
  cloud.validate();
  intrinsics.validate();
  const auto mask = frustum_mask(cloud, gt_pose, intrinsics);
  for (std::uint8_t inside : mask) {
    if (inside) {
      return;
    }
  }
  throw std::invalid_argument(
      "scene: no point inside the ground-truth frustum");
}

}  // namespace posegrid
