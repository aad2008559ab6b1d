#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hcsg/agent.hpp"
#include "hcsg/train.hpp"

namespace hcsg {

struct MetricsReport {
  double ne = 0.0;   // mean final distance to goal, m
  double sr = 0.0;   // fraction within delta_th and collision-free
  double tcr = 0.0;  // collision events per episode
  double cr = 0.0;   // fraction with at least one collision
  std::size_t episodes = 0;
  std::string split;
  std::string ablation;
};

/// Throws Error(kEmptyInput) on an empty log list.
MetricsReport compute_metrics(const std::vector<EpisodeLog>& logs, double delta_th = kDefaultGoalThreshold,
                              const std::string& split = "", const std::string& ablation = "");

/// Runs every episode; results are ordered like `episodes` regardless of
/// `workers`. Episode k uses seed derive_seed(seed, episodes[k].seed).
std::vector<EpisodeLog> evaluate(const Models& models, const std::vector<Episode>& episodes,
                                 const AgentOptions& options, std::uint64_t seed, int workers = 1);

/// Agent options matching a training configuration (greedy decoding).
AgentOptions eval_options(const TrainConfig& config);

/// geo-off, sem-off, past-oriented, coll-off, prox-off, rgb-only, depth-only.
const std::vector<std::string>& ablation_toggles();
/// Throws Error(kInvalidConfig) for an unknown toggle.
void apply_toggle(TrainConfig& config, const std::string& toggle);

struct AblationVariant {
  std::string name;
  std::vector<std::string> toggles;
};

struct AblationRun {
  std::uint64_t seed = 0;
  MetricsReport report;
  std::string logs_hash;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
};

struct AblationRow {
  std::string variant;
  MetricsReport median;  // per-metric median over runs
  std::vector<AblationRun> runs;
};

struct AblationPlan {
  TrainConfig base;
  std::vector<AblationVariant> variants;  // empty: the full model only
  std::vector<std::uint64_t> seeds;
  int workers = 1;
  InterpreterConfig interpreter;
};

/// Trains and evaluates each variant with every seed on the same episodes.
std::vector<AblationRow> run_ablation(const AblationPlan& plan, const std::vector<Episode>& train_episodes,
                                      const std::vector<Episode>& eval_episodes);

double median(std::vector<double> values);

/// Digest over the per-episode log hashes, in order.
std::string logs_hash(const std::vector<EpisodeLog>& logs);
/// One JSON object per line.
std::string logs_jsonl(const std::vector<EpisodeLog>& logs);

std::string metrics_csv(const std::vector<MetricsReport>& reports, const std::string& config_hash);
std::string metrics_markdown(const std::vector<MetricsReport>& reports, const std::string& config_hash);
std::string ablation_csv(const std::vector<AblationRow>& rows, const std::string& config_hash);
std::string ablation_markdown(const std::vector<AblationRow>& rows, const std::string& config_hash);

}  // namespace hcsg
