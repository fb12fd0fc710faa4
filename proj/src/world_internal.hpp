#pragma once

#include <vector>

#include "brickstack/world.hpp"

namespace brickstack::detail {

/// Lowers brick `id` along -z until it rests on the ground or on bricks
/// overlapping its footprint.  Fills `supporters` with the bodies it ends up
/// touching (kGroundBody for the ground).
void drop_to_rest(SceneState& s, int id, std::vector<int>* supporters);

}  // namespace brickstack::detail
