#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hcsg/nn.hpp"

namespace hcsg {

struct GradientReport {
  std::string path;
  GradCheckResult result;
};

/// Central-difference checks of every hand-written backward pass on seeded
/// random fixtures: forecast.trajectory, forecast.pose, fusion, scorer.nav and
/// scorer.social (navigation plus expected social penalty).
std::vector<GradientReport> gradient_suite(std::uint64_t seed, std::size_t probes = 24);

}  // namespace hcsg
