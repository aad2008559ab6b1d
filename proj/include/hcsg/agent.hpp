#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcsg/forecast.hpp"
#include "hcsg/perception.hpp"
#include "hcsg/policy.hpp"
#include "hcsg/semantic.hpp"
#include "hcsg/topo.hpp"
#include "hcsg/world.hpp"

namespace hcsg {

inline constexpr int kDefaultMaxDecisions = 50;
inline constexpr double kDefaultGoalThreshold = 3.0;

/// Which inputs reach the node features.
struct FeatureToggles {
  bool geo = true;
  bool sem = true;
  // Geometric features from an encoder that never sees decoder supervision.
  bool past_oriented = false;
  SensingMode sensing;
};

/// Everything the agent reads. `past_encoder` is a frozen, randomly
/// initialized forecaster pair used only for past-oriented features.
struct Models {
  ForecasterPair forecasters;
  ForecasterPair past_encoder;
  Scorer scorer;

  Models() = default;
  explicit Models(std::uint64_t seed, double alpha = kDefaultDistanceBias);

  nlohmann::ordered_json to_json() const;
  void load_json(const nlohmann::json& j);
};

enum class ActionMode { kGreedy, kSample, kExpert };
std::string_view to_string(ActionMode mode);
ActionMode parse_action_mode(std::string_view text);

struct AgentOptions {
  ActionMode mode = ActionMode::kGreedy;
  int max_decisions = kDefaultMaxDecisions;
  int window_frames = kDefaultWindowFrames;
  double noise_sigma = 0.0;
  double goal_threshold = kDefaultGoalThreshold;
  // Ends the episode as soon as the agent is within goal_threshold; off by
  // default so that stopping is the policy's decision.
  bool terminate_on_goal = false;
  // Attach simulator ground-truth futures to each track (training only).
  bool collect_targets = false;
  CameraIntrinsics intrinsics;
  InterpreterConfig interpreter;
  FeatureToggles features;
};

/// One live human at a decision.
struct TrackObservation {
  int track_id = 0;
  int source_id = -1;  // simulator bookkeeping
  TrackHistory history;
  ForecastResult forecast;
  ActivityDescription description;
  HumanFeature feature;
  std::array<Vec2, kHorizon> forecast_world{};
  std::optional<ForecastSample> target;
};

struct Decision {
  int index = 0;
  std::int64_t t = 0;
  Pose2 agent;
  std::size_t detections = 0;
  std::vector<CollisionEvent> pause_collisions;
  std::vector<TrackObservation> tracks;
  std::vector<Vec2> action_positions;  // world positions of dist.actions
  Distribution dist;
  ScoreCache cache;
  int expert = -1;  // index into dist, -1 when no expert action exists
};

struct StepRecord {
  int decision = 0;
  std::int64_t t = 0;
  Pose2 agent;
  int chosen_node = -1;  // -1 for STOP
  double entropy = 0.0;
  std::size_t detections = 0;
  int live_tracks = 0;
  std::vector<CollisionEvent> collisions;
  std::optional<LossBreakdown> loss;
};

struct EpisodeLog {
  std::string episode_id;
  std::vector<StepRecord> steps;
  Vec2 goal;
  Vec2 final_position;
  std::string termination;  // stop | budget | goal
  int goal_reached_step = -1;
  int forecast_calls = 0;
  int interpret_calls = 0;

  int collision_count() const;
  double final_distance() const { return distance(final_position, goal); }
  /// Stable field order; the trailing "hash" field digests everything before it.
  nlohmann::ordered_json to_json() const;
  std::string content_hash() const;
};

/// Step-wise episode execution shared by evaluation and training.
class EpisodeRunner {
 public:
  EpisodeRunner(const Episode& episode, const Models& models, const AgentOptions& options, std::uint64_t seed);

  bool finished() const { return finished_; }
  /// Observe, pause when humans are detected, update the graph and score.
  Decision& prepare();
  /// Choice per the configured mode (index into the distribution).
  int choose(const Decision& decision);
  /// Executes a choice (index into the distribution; stop_index() for STOP).
  void act(int choice, std::optional<LossBreakdown> loss = std::nullopt);

  const TopoGraph& graph() const { return graph_; }
  const SimState& state() const { return state_; }
  const EpisodeLog& log() const { return log_; }
  EpisodeLog take_log() { return std::move(log_); }

 private:
  int expert_choice(const Decision& decision) const;

  const Episode& episode_;
  const Models& models_;
  AgentOptions options_;
  DistanceField field_;
  Rng noise_rng_;
  Rng policy_rng_;
  SimState state_;
  TopoGraph graph_;
  InstructionTokens tokens_;
  Decision decision_;
  bool prepared_ = false;
  bool finished_ = false;
  int decisions_ = 0;
  EpisodeLog log_;
};

EpisodeLog navigate_episode(const Episode& episode, const Models& models, const AgentOptions& options,
                            std::uint64_t seed);

}  // namespace hcsg
