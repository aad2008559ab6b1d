#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hcsg/world.hpp"

namespace hcsg {

/// Seen layouts come from {corridor, room, lounge}; unseen from
/// {lhall, pillars, atrium}.
std::vector<std::string> layout_family(Split split);

/// Episode `index` of a benchmark; a pure function of its arguments.
/// Every returned episode passes validate_episode.
Episode generate_episode(std::size_t index, Split split, std::uint64_t seed);

/// n >= 1 episodes; throws Error(kInvalidConfig) otherwise.
std::vector<Episode> generate_benchmark(std::size_t n, Split split, std::uint64_t seed);

}  // namespace hcsg
