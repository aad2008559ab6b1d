#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcsg/world.hpp"

namespace hcsg {

/// Benchmark file: {"format": "hcsg-benchmark", "version": 1, "maps": [...], "episodes": [...]}.
/// Maps are shared by id. See docs/scenario_schema.md.
nlohmann::ordered_json benchmark_to_json(const std::vector<Episode>& episodes);

/// Strict parse: unknown fields, missing required fields and invariant
/// violations throw Error(kInvalidScenario).
std::vector<Episode> benchmark_from_json(const nlohmann::json& j);

std::vector<Episode> load_benchmark(const std::filesystem::path& path);
void save_benchmark(const std::filesystem::path& path, const std::vector<Episode>& episodes);

/// Stable digest of the serialized benchmark.
std::string benchmark_hash(const std::vector<Episode>& episodes);

}  // namespace hcsg
