#include "hcsg/agent.hpp"

#include <algorithm>
#include <limits>

namespace hcsg {

Models::Models(std::uint64_t seed, double alpha)
    : forecasters(derive_seed(seed, 11)), past_encoder(derive_seed(seed, 12)), scorer(derive_seed(seed, 13), alpha) {}

nlohmann::ordered_json Models::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "hcsg-models";
  j["version"] = 1;
  j["forecasters"] = forecasters.to_json();
  j["past_encoder"] = past_encoder.to_json();
  j["scorer"] = scorer.to_json();
  return j;
}

void Models::load_json(const nlohmann::json& j) {
  if (j.value("format", "") != "hcsg-models" || j.value("version", 0) != 1) {
    throw Error(ErrorKind::kShapeMismatch, "not a version 1 model checkpoint");
  }
  Models next = *this;
  next.forecasters.load_json(j.at("forecasters"));
  next.past_encoder.load_json(j.at("past_encoder"));
  next.scorer.load_json(j.at("scorer"));
  *this = std::move(next);
}

std::string_view to_string(ActionMode mode) {
  switch (mode) {
    case ActionMode::kGreedy: return "greedy";
    case ActionMode::kSample: return "sample";
    case ActionMode::kExpert: return "expert";
  }
  return "greedy";
}

ActionMode parse_action_mode(std::string_view text) {
  if (text == "greedy") return ActionMode::kGreedy;
  if (text == "sample") return ActionMode::kSample;
  if (text == "expert") return ActionMode::kExpert;
  throw Error(ErrorKind::kInvalidConfig, "unknown action mode '" + std::string(text) + "'");
}

int EpisodeLog::collision_count() const {
  int n = 0;
  for (const StepRecord& s : steps) n += static_cast<int>(s.collisions.size());
  return n;
}

namespace {

nlohmann::ordered_json loss_json(const LossBreakdown& l) {
  nlohmann::ordered_json j;
  j["nav"] = l.nav;
  j["pose"] = l.pose;
  j["traj"] = l.traj;
  j["coll"] = l.coll;
  j["prox"] = l.prox;
  j["total"] = l.total;
  return j;
}

nlohmann::ordered_json log_body(const EpisodeLog& log) {
  nlohmann::ordered_json j;
  j["episode"] = log.episode_id;
  j["goal"] = {log.goal.x, log.goal.y};
  j["final"] = {log.final_position.x, log.final_position.y};
  j["termination"] = log.termination;
  j["goal_reached_step"] = log.goal_reached_step;
  j["forecast_calls"] = log.forecast_calls;
  j["interpret_calls"] = log.interpret_calls;
  j["collisions"] = log.collision_count();
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (const StepRecord& s : log.steps) {
    nlohmann::ordered_json r;
    r["decision"] = s.decision;
    r["t"] = s.t;
    r["pose"] = {s.agent.x, s.agent.y, s.agent.heading};
    r["chosen"] = s.chosen_node;
    r["entropy"] = s.entropy;
    r["detections"] = s.detections;
    r["tracks"] = s.live_tracks;
    nlohmann::ordered_json events = nlohmann::ordered_json::array();
    for (const CollisionEvent& e : s.collisions) events.push_back({e.step, e.pedestrian_id});
    r["collision_events"] = std::move(events);
    if (s.loss) r["loss"] = loss_json(*s.loss);
    steps.push_back(std::move(r));
  }
  j["steps"] = std::move(steps);
  return j;
}

}  // namespace

nlohmann::ordered_json EpisodeLog::to_json() const {
  nlohmann::ordered_json j = log_body(*this);
  j["hash"] = hex64(fnv1a64(j.dump()));
  return j;
}

std::string EpisodeLog::content_hash() const { return hex64(fnv1a64(log_body(*this).dump())); }

// ---------------------------------------------------------------------------

EpisodeRunner::EpisodeRunner(const Episode& episode, const Models& models, const AgentOptions& options,
                             std::uint64_t seed)
    : episode_(episode),
      models_(models),
      options_(options),
      field_(episode.map, episode.goal),
      noise_rng_(derive_seed(seed, 1)),
      policy_rng_(derive_seed(seed, 2)),
      state_(initial_state(episode)),
      tokens_(tokenize_instruction(episode.instruction.text)) {
  options_.intrinsics.validate();
  if (options_.window_frames < kMinTrackFrames) {
    throw Error(ErrorKind::kInvalidConfig, "window must span at least 3 frames");
  }
  if (options_.max_decisions <= 0) throw Error(ErrorKind::kInvalidConfig, "decision budget must be positive");
  log_.episode_id = episode.id;
  log_.goal = episode.goal;
  log_.final_position = state_.agent.position();
  if (distance(state_.agent.position(), episode.goal) < options_.goal_threshold) log_.goal_reached_step = 0;
}

Decision& EpisodeRunner::prepare() {
  if (finished_) throw Error(ErrorKind::kInvalidConfig, "episode already finished");
  const WorldMap& map = *episode_.map;
  const FeatureToggles& feat = options_.features;
  Decision d;
  d.index = decisions_;
  d.t = state_.t;
  d.agent = state_.agent;

  const PanoramicObservation obs = observe(state_, episode_, options_.intrinsics, options_.noise_sigma, noise_rng_);
  d.detections = obs.detection_count();
  const std::vector<WaypointCandidate> candidates = waypoint_candidates(map, state_.agent);
  std::vector<Eigen::VectorXd> features;
  features.reserve(candidates.size());
  for (const WaypointCandidate& c : candidates) {
    features.push_back(static_sector_feature(obs.sectors[static_cast<std::size_t>(c.bearing_index)], feat.sensing));
  }
  update_graph(graph_, state_.agent, candidates, features, panorama_feature(obs, feat.sensing), decisions_);
  clear_current_humans(graph_);

  if (d.detections > 0) {
    WindowResult window = collect_window(episode_, state_, obs, options_.window_frames, options_.intrinsics,
                                         options_.noise_sigma, feat.sensing, noise_rng_);
    state_ = window.end_state;
    d.pause_collisions = std::move(window.collisions);
    std::vector<HumanFeature> humans;
    for (const Track& track : window.window.tracks) {
      TrackObservation obs_track;
      obs_track.track_id = track.id;
      obs_track.source_id = track.source_id;
      obs_track.history = history_from_track(track, state_.dt);
      obs_track.forecast = forecast_track(obs_track.history, models_.forecasters);
      ++log_.forecast_calls;
      obs_track.description = interpret(obs_track.history, track.truth_label, options_.interpreter);
      ++log_.interpret_calls;
      for (int k = 0; k < kHorizon; ++k) {
        obs_track.forecast_world[static_cast<std::size_t>(k)] =
            agent_to_world(d.agent, obs_track.forecast.forecast.positions[static_cast<std::size_t>(k)]);
      }

      HumanFeature& h = obs_track.feature;
      h.id = track.id;
      h.position = agent_to_world(d.agent, track.frames.back().position);
      if (!feat.geo) {
        h.geo = Eigen::VectorXd::Zero(kGeoFeatureDim);
      } else if (feat.past_oriented) {
        h.geo = forecast_track(obs_track.history, models_.past_encoder).geo;
      } else {
        h.geo = obs_track.forecast.geo;
      }
      h.sem = feat.sem ? encode_text(obs_track.description.text) : Eigen::VectorXd::Zero(kSemFeatureDim);

      if (options_.collect_targets) {
        const auto it = std::find_if(episode_.pedestrians.begin(), episode_.pedestrians.end(),
                                     [&](const Pedestrian& p) { return p.id == track.source_id; });
        if (it != episode_.pedestrians.end()) {
          ForecastSample sample;
          sample.history = obs_track.history;
          const TrackFrame& last = track.frames.back();
          for (int k = 0; k < kHorizon; ++k) {
            const PedestrianState ps = pedestrian_state_at(it->script, last.step + k + 1, state_.dt);
            sample.future_positions[static_cast<std::size_t>(k)] = world_to_agent(d.agent, ps.position);
            sample.future_keypoints[static_cast<std::size_t>(k)] =
                project_skeleton(d.agent, last.sector, skeleton_at(ps, it->body_scale), it->body_scale,
                                 options_.intrinsics);
          }
          obs_track.target = std::move(sample);
        }
      }
      humans.push_back(h);
      d.tracks.push_back(std::move(obs_track));
    }
    assign_humans(graph_, humans);
  }

  refresh_fused(graph_, models_.scorer.params(), models_.scorer.fusion);
  d.dist = score(graph_, tokens_, models_.scorer, &d.cache);
  for (int id : d.dist.actions) d.action_positions.push_back(graph_.node(id).position);
  d.expert = expert_choice(d);
  decision_ = std::move(d);
  prepared_ = true;
  return decision_;
}

int EpisodeRunner::expert_choice(const Decision& d) const {
  if (distance(d.agent.position(), episode_.goal) < options_.goal_threshold) return d.dist.stop_index();
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < d.action_positions.size(); ++i) {
    const double g = field_.at(d.action_positions[i]);
    if (g < best_d) {
      best_d = g;
      best = static_cast<int>(i);
    }
  }
  return best;
}

int EpisodeRunner::choose(const Decision& d) {
  switch (options_.mode) {
    case ActionMode::kGreedy: return d.dist.argmax();
    case ActionMode::kExpert: return d.expert >= 0 ? d.expert : d.dist.stop_index();
    case ActionMode::kSample: {
      const double u = policy_rng_.uniform();
      double acc = 0.0;
      for (int i = 0; i < d.dist.size(); ++i) {
        acc += d.dist.probs[i];
        if (u < acc) return i;
      }
      return d.dist.size() - 1;
    }
  }
  return d.dist.stop_index();
}

void EpisodeRunner::act(int choice, std::optional<LossBreakdown> loss) {
  if (!prepared_) throw Error(ErrorKind::kInvalidConfig, "act() called without prepare()");
  prepared_ = false;
  const Decision& d = decision_;
  if (choice < 0 || choice >= d.dist.size()) throw Error(ErrorKind::kInvalidConfig, "choice out of range");

  StepRecord rec;
  rec.decision = d.index;
  rec.t = d.t;
  rec.agent = d.agent;
  rec.entropy = d.dist.entropy();
  rec.detections = d.detections;
  rec.live_tracks = static_cast<int>(d.tracks.size());
  rec.collisions = d.pause_collisions;
  rec.loss = loss;
  ++decisions_;

  if (choice == d.dist.stop_index()) {
    rec.chosen_node = -1;
    log_.steps.push_back(std::move(rec));
    finished_ = true;
    log_.termination = "stop";
  } else {
    rec.chosen_node = d.dist.actions[static_cast<std::size_t>(choice)];
    StepOutcome out = step_agent(episode_, state_, d.action_positions[static_cast<std::size_t>(choice)]);
    state_ = std::move(out.state);
    rec.collisions.insert(rec.collisions.end(), out.collisions.begin(), out.collisions.end());
    log_.steps.push_back(std::move(rec));
    const bool near_goal = distance(state_.agent.position(), episode_.goal) < options_.goal_threshold;
    if (near_goal && log_.goal_reached_step < 0) log_.goal_reached_step = decisions_;
    if (near_goal && options_.terminate_on_goal) {
      finished_ = true;
      log_.termination = "goal";
    } else if (decisions_ >= options_.max_decisions) {
      finished_ = true;
      log_.termination = "budget";
    }
  }
  log_.final_position = state_.agent.position();
}

EpisodeLog navigate_episode(const Episode& episode, const Models& models, const AgentOptions& options,
                            std::uint64_t seed) {
  EpisodeRunner runner(episode, models, options, seed);
  while (!runner.finished()) {
    Decision& d = runner.prepare();
    runner.act(runner.choose(d));
  }
  return runner.take_log();
}

}  // namespace hcsg
