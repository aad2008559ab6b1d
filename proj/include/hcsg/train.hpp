#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hcsg/agent.hpp"

namespace hcsg {

inline constexpr double kCollisionPenalty = 3.0;  // delta
inline constexpr double kSafetyRadius = 1.0;      // r_s, m
inline constexpr double kProximityFloor = 0.0625; // eps_p, m^2

struct SocialConfig {
  double lambda_c = 1.0;
  double lambda_p = 1.0;
  double delta = kCollisionPenalty;
  double safety_radius = kSafetyRadius;
  double epsilon = kProximityFloor;
  double collision_radius = kCollisionRadius;
};

struct TrainConfig {
  double policy_lr = 1e-3;
  double forecaster_lr = 1e-4;
  int iterations = 1500;
  SocialConfig social;
  double gamma1 = 0.5;
  double gamma2 = 0.5;
  double anneal_fraction = 0.5;  // T_anneal as a fraction of iterations
  double student_prob = 0.25;
  double warmup_fraction = 0.2;
  double goal_threshold = kDefaultGoalThreshold;
  int max_decisions = kDefaultMaxDecisions;
  int window_frames = kDefaultWindowFrames;
  double noise_sigma = 0.0;
  // Synthetic constant-velocity warm start of the forecasters.
  int pretrain_steps = 300;
  int pretrain_tracks = 128;
  double pretrain_lr = 3e-3;
  double alpha = kDefaultDistanceBias;
  std::uint64_t seed = 0;
  FeatureToggles features;

  /// Throws Error(kInvalidConfig) when an invariant is violated.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  /// Strict: unknown keys are rejected. Missing keys keep defaults.
  static TrainConfig from_json(const nlohmann::json& j);
  int anneal_horizon() const;
  /// Digest of to_json(); names run directories and tags artifacts.
  std::string hash() const;
};

/// 0.25 + 0.375 (1 + cos theta).
double front_weight(double theta);
/// lambda_c times the sum of per-event penalties delta.
double collision_loss(std::size_t events, double lambda_c, double delta = kCollisionPenalty);

struct RelativeHuman {
  Vec2 offset;       // human minus agent, m
  double bearing;    // relative to the agent heading, rad
};
/// lambda_p sum_j phi(theta_j) / max(|d_j|^2, eps_p) over humans within r_s.
double proximity_loss(const std::vector<RelativeHuman>& humans, double lambda_p, double safety_radius = kSafetyRadius,
                      double epsilon = kProximityFloor);

/// -log p(expert). Throws Error(kExpertNotAvailable) when expert < 0.
double nav_loss(const Distribution& dist, int expert);

/// max(0.1, 1 - t / T_anneal).
double anneal_weight(std::int64_t t, std::int64_t horizon);
LossBreakdown total_loss(const LossBreakdown& components, std::int64_t t, std::int64_t horizon);

struct SocialPenalty {
  double coll = 0.0;  // expectation over moving actions
  double prox = 0.0;
  Eigen::VectorXd coll_per_action;  // STOP (last entry) is always 0
  Eigen::VectorXd prox_per_action;
  Eigen::VectorXd weights;          // p(a | not STOP); 0 for STOP
  double total() const { return coll + prox; }
};

/// Each moving action is the segment from the agent to its position. A
/// forecast human counts one contact when its closest approach to the segment
/// over the horizon is under the collision radius, and a proximity term at
/// that closest approach when within r_s. The expectation is taken under the
/// distribution conditioned on not stopping; with no moving action it is 0.
SocialPenalty expected_social_penalty(const Distribution& dist, const Pose2& agent,
                                      const std::vector<Vec2>& action_positions,
                                      const std::vector<std::array<Vec2, kHorizon>>& humans,
                                      const SocialConfig& config);

/// d(nav + expected penalty)/d(logits) in closed form. expert < 0 drops the nav
/// term; a default-constructed penalty drops the social term.
Eigen::VectorXd policy_logit_gradient(const Distribution& dist, int expert, const SocialPenalty& penalty);

struct TrainResult {
  Models models;
  std::vector<LossBreakdown> curve;
  int episodes_started = 0;
};

/// Optional per-iteration observer (iteration, losses).
using TrainObserver = std::function<void(int, const LossBreakdown&)>;

/// One iteration is one decision step with one update of each parameter set.
/// Throws Error(kNonFiniteLoss) with diagnostics when a loss goes non-finite.
TrainResult train(const TrainConfig& config, const std::vector<Episode>& episodes,
                  const InterpreterConfig& interpreter = {}, const TrainObserver& observer = {});

/// Warm start of both forecasters on synthetic constant-velocity walkers.
void pretrain_forecasters(ForecasterPair& models, const TrainConfig& config);

/// CSV with a header line carrying the config hash.
std::string curves_csv(const std::vector<LossBreakdown>& curve, const std::string& config_hash);

}  // namespace hcsg
