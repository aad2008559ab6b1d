#include "hcsg/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hcsg {

namespace {

[[noreturn]] void bad_config(const std::string& what) { throw Error(ErrorKind::kInvalidConfig, what); }

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  try {
    out = j.get<T>();
  } catch (const nlohmann::json::exception&) {
    bad_config(std::string("config field '") + key + "' has the wrong type");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (policy_lr < 0.0 || forecaster_lr < 0.0 || pretrain_lr < 0.0) bad_config("learning rates must be nonnegative");
  if (iterations < 0) bad_config("iterations must be nonnegative");
  if (social.lambda_c < 0.0 || social.lambda_p < 0.0) bad_config("loss weights must be nonnegative");
  if (!(social.delta > 0.0)) bad_config("collision penalty must be positive");
  if (!(social.epsilon > 0.0) || !(social.safety_radius > std::sqrt(social.epsilon))) {
    bad_config("safety radius must exceed sqrt(eps_p)");
  }
  if (!(goal_threshold > 0.0)) bad_config("goal threshold must be positive");
  if (!(anneal_fraction > 0.0)) bad_config("anneal fraction must be positive");
  if (student_prob < 0.0 || student_prob > 1.0) bad_config("student probability must lie in [0, 1]");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) bad_config("warmup fraction must lie in [0, 1]");
  if (max_decisions <= 0) bad_config("decision budget must be positive");
  if (window_frames < kMinTrackFrames) bad_config("window must span at least 3 frames");
  if (noise_sigma < 0.0) bad_config("noise must be nonnegative");
  if (pretrain_steps < 0 || pretrain_tracks <= 0) bad_config("pretraining sizes are invalid");
  if (alpha < 0.0) bad_config("distance bias must be nonnegative");
}

int TrainConfig::anneal_horizon() const {
  return std::max(1, static_cast<int>(std::lround(anneal_fraction * iterations)));
}

std::string TrainConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["policy_lr"] = policy_lr;
  j["forecaster_lr"] = forecaster_lr;
  j["iterations"] = iterations;
  j["lambda_c"] = social.lambda_c;
  j["lambda_p"] = social.lambda_p;
  j["delta"] = social.delta;
  j["safety_radius"] = social.safety_radius;
  j["epsilon_p"] = social.epsilon;
  j["collision_radius"] = social.collision_radius;
  j["gamma1"] = gamma1;
  j["gamma2"] = gamma2;
  j["anneal_fraction"] = anneal_fraction;
  j["student_prob"] = student_prob;
  j["warmup_fraction"] = warmup_fraction;
  j["goal_threshold"] = goal_threshold;
  j["max_decisions"] = max_decisions;
  j["window_frames"] = window_frames;
  j["noise_sigma"] = noise_sigma;
  j["pretrain_steps"] = pretrain_steps;
  j["pretrain_tracks"] = pretrain_tracks;
  j["pretrain_lr"] = pretrain_lr;
  j["alpha"] = alpha;
  j["seed"] = seed;
  j["features"] = {{"geo", features.geo},
                   {"sem", features.sem},
                   {"past_oriented", features.past_oriented},
                   {"depth", features.sensing.depth},
                   {"rgb", features.sensing.rgb},
                   {"nominal_depth", features.sensing.nominal_depth}};
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) bad_config("train config must be a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "policy_lr") read_field(value, "policy_lr", c.policy_lr);
    else if (key == "forecaster_lr") read_field(value, "forecaster_lr", c.forecaster_lr);
    else if (key == "iterations") read_field(value, "iterations", c.iterations);
    else if (key == "lambda_c") read_field(value, "lambda_c", c.social.lambda_c);
    else if (key == "lambda_p") read_field(value, "lambda_p", c.social.lambda_p);
    else if (key == "delta") read_field(value, "delta", c.social.delta);
    else if (key == "safety_radius") read_field(value, "safety_radius", c.social.safety_radius);
    else if (key == "epsilon_p") read_field(value, "epsilon_p", c.social.epsilon);
    else if (key == "collision_radius") read_field(value, "collision_radius", c.social.collision_radius);
    else if (key == "gamma1") read_field(value, "gamma1", c.gamma1);
    else if (key == "gamma2") read_field(value, "gamma2", c.gamma2);
    else if (key == "anneal_fraction") read_field(value, "anneal_fraction", c.anneal_fraction);
    else if (key == "student_prob") read_field(value, "student_prob", c.student_prob);
    else if (key == "warmup_fraction") read_field(value, "warmup_fraction", c.warmup_fraction);
    else if (key == "goal_threshold") read_field(value, "goal_threshold", c.goal_threshold);
    else if (key == "max_decisions") read_field(value, "max_decisions", c.max_decisions);
    else if (key == "window_frames") read_field(value, "window_frames", c.window_frames);
    else if (key == "noise_sigma") read_field(value, "noise_sigma", c.noise_sigma);
    else if (key == "pretrain_steps") read_field(value, "pretrain_steps", c.pretrain_steps);
    else if (key == "pretrain_tracks") read_field(value, "pretrain_tracks", c.pretrain_tracks);
    else if (key == "pretrain_lr") read_field(value, "pretrain_lr", c.pretrain_lr);
    else if (key == "alpha") read_field(value, "alpha", c.alpha);
    else if (key == "seed") read_field(value, "seed", c.seed);
    else if (key == "features") {
      if (!value.is_object()) bad_config("'features' must be an object");
      for (const auto& [fk, fv] : value.items()) {
        if (fk == "geo") read_field(fv, "features.geo", c.features.geo);
        else if (fk == "sem") read_field(fv, "features.sem", c.features.sem);
        else if (fk == "past_oriented") read_field(fv, "features.past_oriented", c.features.past_oriented);
        else if (fk == "depth") read_field(fv, "features.depth", c.features.sensing.depth);
        else if (fk == "rgb") read_field(fv, "features.rgb", c.features.sensing.rgb);
        else if (fk == "nominal_depth") read_field(fv, "features.nominal_depth", c.features.sensing.nominal_depth);
        else bad_config("unknown config field 'features." + fk + "'");
      }
    } else {
      bad_config("unknown config field '" + key + "'");
    }
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

double front_weight(double theta) { return 0.25 + 0.375 * (1.0 + std::cos(theta)); }

double collision_loss(std::size_t events, double lambda_c, double delta) {
  double sum = 0.0;
  for (std::size_t i = 0; i < events; ++i) sum += delta;
  return lambda_c * sum;
}

double proximity_loss(const std::vector<RelativeHuman>& humans, double lambda_p, double safety_radius,
                      double epsilon) {
  double sum = 0.0;
  for (const RelativeHuman& h : humans) {
    const double d2 = h.offset.squared_norm();
    if (d2 > safety_radius * safety_radius) continue;
    sum += front_weight(h.bearing) / std::max(d2, epsilon);
  }
  return lambda_p * sum;
}

double nav_loss(const Distribution& dist, int expert) {
  if (expert < 0 || expert >= dist.size()) throw Error(ErrorKind::kExpertNotAvailable, "no expert action");
  return -std::log(dist.probs[expert]);
}

double anneal_weight(std::int64_t t, std::int64_t horizon) {
  if (horizon <= 0) return 0.1;
  return std::max(0.1, 1.0 - static_cast<double>(t) / static_cast<double>(horizon));
}

LossBreakdown total_loss(const LossBreakdown& c, std::int64_t t, std::int64_t horizon) {
  LossBreakdown out = c;
  out.total = anneal_weight(t, horizon) * (c.pose + c.traj) + c.coll + c.prox + c.nav;
  return out;
}

SocialPenalty expected_social_penalty(const Distribution& dist, const Pose2& agent,
                                      const std::vector<Vec2>& action_positions,
                                      const std::vector<std::array<Vec2, kHorizon>>& humans,
                                      const SocialConfig& config) {
  if (action_positions.size() != dist.actions.size()) {
    throw Error(ErrorKind::kShapeMismatch, "one position per action expected");
  }
  const int n = dist.size();
  const int moves = dist.stop_index();
  SocialPenalty out;
  out.coll_per_action = Eigen::VectorXd::Zero(n);
  out.prox_per_action = Eigen::VectorXd::Zero(n);
  out.weights = Eigen::VectorXd::Zero(n);
  if (moves == 0) return out;
  const Vec2 origin = agent.position();
  for (int a = 0; a < moves; ++a) {
    const Vec2 end = action_positions[static_cast<std::size_t>(a)];
    const Vec2 dir = end - origin;
    const double heading = dir.squared_norm() > 0.0 ? std::atan2(dir.y, dir.x) : agent.heading;
    std::size_t contacts = 0;
    std::vector<RelativeHuman> near;
    for (const auto& future : humans) {
      double best = std::numeric_limits<double>::infinity();
      Vec2 best_offset;
      for (const Vec2& q : future) {
        const Vec2 c = closest_point_on_segment(origin, end, q);
        const double d = distance(q, c);
        if (d < best) {
          best = d;
          best_offset = q - c;
        }
      }
      if (best < config.collision_radius) ++contacts;
      if (best <= config.safety_radius) {
        near.push_back({best_offset, wrap_angle(std::atan2(best_offset.y, best_offset.x) - heading)});
      }
    }
    out.coll_per_action[a] = collision_loss(contacts, config.lambda_c, config.delta);
    out.prox_per_action[a] = proximity_loss(near, config.lambda_p, config.safety_radius, config.epsilon);
  }
  // Conditioned on moving: STOP traces no segment.
  Eigen::VectorXd q = dist.logits.head(moves);
  softmax_inplace(q);
  out.weights.head(moves) = q;
  out.coll = out.weights.dot(out.coll_per_action);
  out.prox = out.weights.dot(out.prox_per_action);
  return out;
}

Eigen::VectorXd policy_logit_gradient(const Distribution& dist, int expert, const SocialPenalty& penalty) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dist.size());
  if (penalty.weights.size() > 0) {
    if (penalty.weights.size() != dist.size()) throw Error(ErrorKind::kShapeMismatch, "penalty does not match the distribution");
    // The conditional over moving actions is a softmax of their logits alone,
    // so the STOP logit receives no social gradient.
    const Eigen::VectorXd pen = penalty.coll_per_action + penalty.prox_per_action;
    const double mean = penalty.weights.dot(pen);
    g = penalty.weights.cwiseProduct(pen - Eigen::VectorXd::Constant(pen.size(), mean));
  }
  if (expert >= 0) {
    g += dist.probs;
    g[expert] -= 1.0;
  }
  return g;
}

// ---------------------------------------------------------------------------

void pretrain_forecasters(ForecasterPair& models, const TrainConfig& config) {
  if (config.pretrain_steps <= 0) return;
  Rng rng(derive_seed(config.seed, 0x5eed));
  const auto batch = constant_velocity_samples(config.pretrain_tracks, config.window_frames, config.noise_sigma, 1.5, rng);
  ForecasterOptimizer optim(models);
  for (int i = 0; i < config.pretrain_steps; ++i) {
    train_step(batch, models, optim, config.pretrain_lr, config.gamma1, config.gamma2);
  }
}

TrainResult train(const TrainConfig& config, const std::vector<Episode>& episodes, const InterpreterConfig& interpreter,
                  const TrainObserver& observer) {
  config.validate();
  if (episodes.empty()) throw Error(ErrorKind::kEmptyInput, "training needs at least one episode");
  TrainResult result;
  result.models = Models(config.seed, config.alpha);
  Models& models = result.models;
  pretrain_forecasters(models.forecasters, config);

  Adam policy_optim(models.scorer.params().size());
  ForecasterOptimizer forecast_optim(models.forecasters);
  ParamStore grad = models.scorer.params().zeros_like();
  Rng rng(derive_seed(config.seed, 0x7a11));

  AgentOptions options;
  options.mode = ActionMode::kExpert;
  options.max_decisions = config.max_decisions;
  options.window_frames = config.window_frames;
  options.noise_sigma = config.noise_sigma;
  options.goal_threshold = config.goal_threshold;
  options.collect_targets = true;
  options.interpreter = interpreter;
  options.features = config.features;

  const int horizon = config.anneal_horizon();
  const int warmup = static_cast<int>(std::lround(config.warmup_fraction * config.iterations));
  int iteration = 0;
  std::size_t episode_index = 0;
  while (iteration < config.iterations) {
    const Episode& episode = episodes[episode_index % episodes.size()];
    EpisodeRunner runner(episode, models, options, derive_seed(config.seed, episode_index));
    ++result.episodes_started;
    while (!runner.finished() && iteration < config.iterations) {
      Decision& d = runner.prepare();

      std::vector<std::array<Vec2, kHorizon>> humans;
      std::vector<ForecastSample> batch;
      for (const TrackObservation& t : d.tracks) {
        humans.push_back(t.forecast_world);
        if (t.target) batch.push_back(*t.target);
      }
      LossBreakdown parts;
      const SocialPenalty penalty =
          expected_social_penalty(d.dist, d.agent, d.action_positions, humans, config.social);
      parts.coll = penalty.coll;
      parts.prox = penalty.prox;
      if (d.expert >= 0) parts.nav = nav_loss(d.dist, d.expert);

      const double w = anneal_weight(iteration, horizon);
      if (!batch.empty()) {
        const LossBreakdown f =
            train_step(batch, models.forecasters, forecast_optim, config.forecaster_lr, config.gamma1, config.gamma2, w);
        parts.pose = f.pose;
        parts.traj = f.traj;
      }
      const LossBreakdown total = total_loss(parts, iteration, horizon);
      if (!std::isfinite(total.total)) {
        std::ostringstream msg;
        msg << "iteration " << iteration << " episode " << episode.id << ": nav=" << parts.nav
            << " pose=" << parts.pose << " traj=" << parts.traj << " coll=" << parts.coll << " prox=" << parts.prox;
        throw Error(ErrorKind::kNonFiniteLoss, msg.str());
      }

      grad.set_zero();
      score_backward(runner.graph(), tokenize_instruction(episode.instruction.text), models.scorer, d.cache,
                     policy_logit_gradient(d.dist, d.expert, penalty), grad);
      policy_optim.step(models.scorer.params(), grad, config.policy_lr);

      int choice;
      const bool student = iteration >= warmup && rng.bernoulli(config.student_prob);
      if (d.expert < 0 || student) {
        const double u = rng.uniform();
        double acc = 0.0;
        choice = d.dist.size() - 1;
        for (int i = 0; i < d.dist.size(); ++i) {
          acc += d.dist.probs[i];
          if (u < acc) {
            choice = i;
            break;
          }
        }
      } else {
        choice = d.expert;
      }
      runner.act(choice, total);
      result.curve.push_back(total);
      if (observer) observer(iteration, total);
      ++iteration;
    }
    ++episode_index;
  }
  return result;
}

std::string curves_csv(const std::vector<LossBreakdown>& curve, const std::string& config_hash) {
  std::ostringstream out;
  out << "# config_hash=" << config_hash << "\n";
  out << "iteration,nav,pose,traj,coll,prox,total\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const LossBreakdown& l = curve[i];
    out << i << ',' << format_double(l.nav) << ',' << format_double(l.pose) << ',' << format_double(l.traj) << ','
        << format_double(l.coll) << ',' << format_double(l.prox) << ',' << format_double(l.total) << "\n";
  }
  return out.str();
}

}  // namespace hcsg
