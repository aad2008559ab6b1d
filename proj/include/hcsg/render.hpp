#pragma once

#include <string>

#include "hcsg/agent.hpp"
#include "hcsg/world.hpp"

namespace hcsg {

/// Overhead SVG: obstacles, objects, pedestrian tracks over the episode,
/// the agent path, collision markers, start and goal.
std::string render_episode_svg(const Episode& episode, const EpisodeLog& log, double dt = kDefaultDt);

}  // namespace hcsg
