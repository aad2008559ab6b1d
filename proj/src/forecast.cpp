#include "hcsg/forecast.hpp"

#include <algorithm>
#include <map>

namespace hcsg {

namespace {

Eigen::MatrixXd sigmoid_of(const Eigen::MatrixXd& a) {
  return a.unaryExpr([](double v) { return sigmoid(v); });
}

}  // namespace

LstmState lstm_cell(const Eigen::VectorXd& x, const Eigen::VectorXd& h, const Eigen::VectorXd& c,
                    const Eigen::MatrixXd& w, const Eigen::MatrixXd& u, const Eigen::VectorXd& b) {
  const Eigen::Index hd = h.size();
  if (w.rows() != 4 * hd || u.rows() != 4 * hd || u.cols() != hd || b.size() != 4 * hd || w.cols() != x.size() ||
      c.size() != hd) {
    throw Error(ErrorKind::kShapeMismatch, "lstm_cell operands have inconsistent shapes");
  }
  LstmCache cache;
  lstm_forward(w, u, b, x, h, c, cache);
  return {cache.h.col(0), cache.c.col(0)};
}

void lstm_forward(const Eigen::Ref<const Eigen::MatrixXd>& w, const Eigen::Ref<const Eigen::MatrixXd>& u,
                  const Eigen::Ref<const Eigen::VectorXd>& b, const Eigen::MatrixXd& x, const Eigen::MatrixXd& h_prev,
                  const Eigen::MatrixXd& c_prev, LstmCache& cache) {
  const Eigen::Index hd = u.cols();
  Eigen::MatrixXd a = w * x + u * h_prev;
  a.colwise() += b;
  cache.x = x;
  cache.h_prev = h_prev;
  cache.c_prev = c_prev;
  cache.i = sigmoid_of(a.topRows(hd));
  cache.f = sigmoid_of(a.middleRows(hd, hd));
  cache.o = sigmoid_of(a.middleRows(2 * hd, hd));
  cache.g = a.bottomRows(hd).array().tanh().matrix();
  cache.c = cache.f.cwiseProduct(c_prev) + cache.i.cwiseProduct(cache.g);
  cache.tanh_c = cache.c.array().tanh().matrix();
  cache.h = cache.o.cwiseProduct(cache.tanh_c);
}

void lstm_backward(const Eigen::Ref<const Eigen::MatrixXd>& w, const Eigen::Ref<const Eigen::MatrixXd>& u,
                   const LstmCache& cache, const Eigen::MatrixXd& dh, const Eigen::MatrixXd& dc, MatMap dw, MatMap du,
                   VecMap db, Eigen::MatrixXd& dx, Eigen::MatrixXd& dh_prev, Eigen::MatrixXd& dc_prev) {
  const Eigen::Index hd = u.cols();
  const Eigen::Index batch = dh.cols();
  const auto one = Eigen::ArrayXXd::Ones(hd, batch);

  const Eigen::ArrayXXd d_o = dh.array() * cache.tanh_c.array();
  const Eigen::ArrayXXd d_c =
      dc.array() + dh.array() * cache.o.array() * (one - cache.tanh_c.array().square());
  const Eigen::ArrayXXd d_i = d_c * cache.g.array();
  const Eigen::ArrayXXd d_g = d_c * cache.i.array();
  const Eigen::ArrayXXd d_f = d_c * cache.c_prev.array();

  Eigen::MatrixXd da(4 * hd, batch);
  da.topRows(hd) = (d_i * cache.i.array() * (one - cache.i.array())).matrix();
  da.middleRows(hd, hd) = (d_f * cache.f.array() * (one - cache.f.array())).matrix();
  da.middleRows(2 * hd, hd) = (d_o * cache.o.array() * (one - cache.o.array())).matrix();
  da.bottomRows(hd) = (d_g * (one - cache.g.array().square())).matrix();

  dw.noalias() += da * cache.x.transpose();
  du.noalias() += da * cache.h_prev.transpose();
  db += da.rowwise().sum();
  dx.noalias() = w.transpose() * da;
  dh_prev.noalias() = u.transpose() * da;
  dc_prev = (d_c * cache.f.array()).matrix();
}

// ---------------------------------------------------------------------------

SequenceForecaster::SequenceForecaster(int input_dim, std::uint64_t seed, int hidden)
    : input_dim_(input_dim), hidden_(hidden) {
  if (input_dim <= 0 || hidden <= 0) throw Error(ErrorKind::kShapeMismatch, "forecaster dimensions must be positive");
  enc_w = params_.add("encoder.w", 4 * hidden, input_dim);
  enc_u = params_.add("encoder.u", 4 * hidden, hidden);
  enc_b = params_.add("encoder.b", 4 * hidden, 1);
  dec_w = params_.add("decoder.w", 4 * hidden, input_dim);
  dec_u = params_.add("decoder.u", 4 * hidden, hidden);
  dec_b = params_.add("decoder.b", 4 * hidden, 1);
  head_w = params_.add("head.w", input_dim, hidden);
  head_b = params_.add("head.b", input_dim, 1);

  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int block : {enc_w, enc_u, dec_w, dec_u}) fill_uniform(params_, block, bound, rng);
  for (int block : {enc_b, dec_b}) params_.vec(block).segment(hidden, hidden).setOnes();
}

void SequenceForecaster::forward(const std::vector<Eigen::MatrixXd>& inputs, Pass& pass) const {
  if (inputs.empty()) throw Error(ErrorKind::kEmptyInput, "no input frames");
  const Eigen::Index batch = inputs.front().cols();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hidden_, batch);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(hidden_, batch);
  pass.encoder.resize(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (inputs[t].rows() != input_dim_ || inputs[t].cols() != batch) {
      throw Error(ErrorKind::kShapeMismatch, "forecaster input frame has the wrong shape");
    }
    lstm_forward(params_.mat(enc_w), params_.mat(enc_u), params_.vec(enc_b), inputs[t], h, c, pass.encoder[t]);
    h = pass.encoder[t].h;
    c = pass.encoder[t].c;
  }
  pass.decoder.resize(kHorizon);
  pass.outputs.assign(kHorizon + 1, Eigen::MatrixXd());
  pass.outputs[0] = inputs.back();
  const auto hw = params_.mat(head_w);
  const auto hb = params_.vec(head_b);
  for (int k = 1; k <= kHorizon; ++k) {
    LstmCache& cell = pass.decoder[static_cast<std::size_t>(k - 1)];
    lstm_forward(params_.mat(dec_w), params_.mat(dec_u), params_.vec(dec_b), pass.outputs[static_cast<std::size_t>(k - 1)],
                 h, c, cell);
    h = cell.h;
    c = cell.c;
    Eigen::MatrixXd delta = hw * h;
    delta.colwise() += hb;
    pass.outputs[static_cast<std::size_t>(k)] = pass.outputs[static_cast<std::size_t>(k - 1)] + delta;
  }
}

void SequenceForecaster::backward(const Pass& pass, const std::vector<Eigen::MatrixXd>& d_outputs,
                                  ParamStore& grad) const {
  if (!grad.same_layout(params_)) throw Error(ErrorKind::kShapeMismatch, "gradient layout differs from parameters");
  if (d_outputs.size() != static_cast<std::size_t>(kHorizon)) {
    throw Error(ErrorKind::kShapeMismatch, "expected one output gradient per horizon step");
  }
  const Eigen::Index batch = pass.outputs[0].cols();
  const auto hw = params_.mat(head_w);
  Eigen::MatrixXd dy = d_outputs[kHorizon - 1];
  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(hidden_, batch);
  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(hidden_, batch);
  Eigen::MatrixXd dx, dh_prev, dc_prev;
  for (int k = kHorizon; k >= 1; --k) {
    const LstmCache& cell = pass.decoder[static_cast<std::size_t>(k - 1)];
    grad.mat(head_w).noalias() += dy * cell.h.transpose();
    grad.vec(head_b) += dy.rowwise().sum();
    dh.noalias() += hw.transpose() * dy;
    lstm_backward(params_.mat(dec_w), params_.mat(dec_u), cell, dh, dc, grad.mat(dec_w), grad.mat(dec_u),
                  grad.vec(dec_b), dx, dh_prev, dc_prev);
    // outputs[k-1] feeds both the residual and the decoder input of step k.
    Eigen::MatrixXd d_prev = dy + dx;
    if (k >= 2) d_prev += d_outputs[static_cast<std::size_t>(k - 2)];
    dy = std::move(d_prev);
    dh = dh_prev;
    dc = dc_prev;
  }
  // dy now refers to the last input frame, which is data.
  for (std::size_t t = pass.encoder.size(); t-- > 0;) {
    lstm_backward(params_.mat(enc_w), params_.mat(enc_u), pass.encoder[t], dh, dc, grad.mat(enc_w), grad.mat(enc_u),
                  grad.vec(enc_b), dx, dh_prev, dc_prev);
    dh = dh_prev;
    dc = dc_prev;
  }
}

Eigen::MatrixXd SequenceForecaster::encode(const std::vector<Eigen::MatrixXd>& inputs) const {
  const Eigen::Index batch = inputs.empty() ? 0 : inputs.front().cols();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hidden_, batch);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(hidden_, batch);
  LstmCache cache;
  for (const auto& x : inputs) {
    lstm_forward(params_.mat(enc_w), params_.mat(enc_u), params_.vec(enc_b), x, h, c, cache);
    h = cache.h;
    c = cache.c;
  }
  return h;
}

// ---------------------------------------------------------------------------

TrackHistory history_from_track(const Track& track, double dt) {
  TrackHistory out;
  out.dt = dt;
  for (const TrackFrame& f : track.frames) {
    out.positions.push_back(f.position);
    out.keypoints.push_back(f.keypoints);
  }
  return out;
}

ForecasterPair::ForecasterPair(std::uint64_t seed)
    : trajectory(kTrajInputDim, derive_seed(seed, 1)), pose(kPoseInputDim, derive_seed(seed, 2)) {}

nlohmann::ordered_json ForecasterPair::to_json() const {
  nlohmann::ordered_json j;
  j["trajectory"] = trajectory.params().to_json();
  j["pose"] = pose.params().to_json();
  return j;
}

void ForecasterPair::load_json(const nlohmann::json& j) {
  ParamStore t = trajectory.params();
  ParamStore p = pose.params();
  t.load_json(j.at("trajectory"));
  p.load_json(j.at("pose"));
  trajectory.params() = std::move(t);
  pose.params() = std::move(p);
}

namespace {

void check_history(const TrackHistory& track) {
  if (track.positions.size() < static_cast<std::size_t>(kMinTrackFrames)) {
    throw Error(ErrorKind::kTrackTooShort, "a track needs at least 3 frames");
  }
  if (track.keypoints.size() != track.positions.size()) {
    throw Error(ErrorKind::kShapeMismatch, "positions and keypoints differ in length");
  }
}

std::vector<Eigen::MatrixXd> trajectory_inputs(const std::vector<const TrackHistory*>& tracks) {
  const std::size_t m = tracks.front()->positions.size();
  std::vector<Eigen::MatrixXd> inputs(m, Eigen::MatrixXd(kTrajInputDim, static_cast<Eigen::Index>(tracks.size())));
  for (std::size_t b = 0; b < tracks.size(); ++b) {
    const Vec2 last = tracks[b]->positions.back();
    for (std::size_t t = 0; t < m; ++t) {
      const Vec2 r = tracks[b]->positions[t] - last;
      inputs[t](0, static_cast<Eigen::Index>(b)) = r.x;
      inputs[t](1, static_cast<Eigen::Index>(b)) = r.y;
    }
  }
  return inputs;
}

std::vector<Eigen::MatrixXd> pose_inputs(const std::vector<const TrackHistory*>& tracks) {
  const std::size_t m = tracks.front()->keypoints.size();
  std::vector<Eigen::MatrixXd> inputs(m, Eigen::MatrixXd(kPoseInputDim, static_cast<Eigen::Index>(tracks.size())));
  for (std::size_t b = 0; b < tracks.size(); ++b) {
    for (std::size_t t = 0; t < m; ++t) {
      for (int q = 0; q < kPoseInputDim; ++q) {
        inputs[t](q, static_cast<Eigen::Index>(b)) = tracks[b]->keypoints[t][static_cast<std::size_t>(q)];
      }
    }
  }
  return inputs;
}

// Batch indices grouped by observed length, in first-appearance order.
std::vector<std::vector<std::size_t>> group_by_length(const std::vector<ForecastSample>& batch) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    check_history(batch[i].history);
    groups[batch[i].history.positions.size()].push_back(i);
  }
  std::vector<std::vector<std::size_t>> out;
  for (auto& [len, idx] : groups) out.push_back(std::move(idx));
  return out;
}

}  // namespace

ForecastResult forecast_track(const TrackHistory& track, const ForecasterPair& models) {
  check_history(track);
  const std::vector<const TrackHistory*> one{&track};
  ForecastResult out;
  out.geo.resize(kGeoFeatureDim);

  SequenceForecaster::Pass pass;
  models.trajectory.forward(trajectory_inputs(one), pass);
  const Vec2 last = track.positions.back();
  Vec2 prev = last;
  for (int k = 0; k < kHorizon; ++k) {
    const auto& y = pass.outputs[static_cast<std::size_t>(k + 1)];
    const Vec2 p{last.x + y(0, 0), last.y + y(1, 0)};
    out.forecast.positions[static_cast<std::size_t>(k)] = p;
    out.forecast.velocities[static_cast<std::size_t>(k)] = (p - prev) / track.dt;
    prev = p;
  }
  out.geo.head(kHiddenDim) = pass.encoder.back().h.col(0);

  models.pose.forward(pose_inputs(one), pass);
  for (int k = 0; k < kHorizon; ++k) {
    const auto& y = pass.outputs[static_cast<std::size_t>(k + 1)];
    for (int q = 0; q < kPoseInputDim; ++q) out.forecast.keypoints[static_cast<std::size_t>(k)][static_cast<std::size_t>(q)] = y(q, 0);
  }
  out.geo.tail(kHiddenDim) = pass.encoder.back().h.col(0);
  return out;
}

// ---------------------------------------------------------------------------

double pose_loss(const std::vector<double>& pred, const std::vector<double>& gt, double gamma1) {
  if (pred.size() != gt.size() || pred.size() % 3 != 0) {
    throw Error(ErrorKind::kShapeMismatch, "pose_loss expects equal-length (u, v, conf) triples");
  }
  if (pred.empty()) return 0.0;
  const std::size_t n = pred.size() / 3;
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double du = pred[3 * k] - gt[3 * k];
    const double dv = pred[3 * k + 1] - gt[3 * k + 1];
    const double dconf = pred[3 * k + 2] - gt[3 * k + 2];
    sum += du * du + dv * dv + gamma1 * dconf * dconf;
  }
  return sum / static_cast<double>(n);
}

double pose_loss(const std::vector<KeypointFrame>& pred, const std::vector<KeypointFrame>& gt, double gamma1) {
  if (pred.size() != gt.size()) throw Error(ErrorKind::kShapeMismatch, "pose_loss frame counts differ");
  std::vector<double> a;
  std::vector<double> b;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    a.insert(a.end(), pred[i].begin(), pred[i].end());
    b.insert(b.end(), gt[i].begin(), gt[i].end());
  }
  return pose_loss(a, b, gamma1);
}

double traj_loss(const std::vector<Vec2>& pred_pos, const std::vector<Vec2>& pred_vel, const std::vector<Vec2>& gt_pos,
                 const std::vector<Vec2>& gt_vel, double gamma2) {
  const std::size_t t = pred_pos.size();
  if (pred_vel.size() != t || gt_pos.size() != t || gt_vel.size() != t) {
    throw Error(ErrorKind::kShapeMismatch, "traj_loss expects equal horizons");
  }
  if (t == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < t; ++k) {
    sum += (pred_pos[k] - gt_pos[k]).squared_norm() + gamma2 * (pred_vel[k] - gt_vel[k]).squared_norm();
  }
  return sum / static_cast<double>(t);
}

std::vector<Vec2> finite_difference_velocities(const Vec2& anchor, const std::vector<Vec2>& positions, double dt) {
  std::vector<Vec2> out;
  Vec2 prev = anchor;
  for (const Vec2& p : positions) {
    out.push_back((p - prev) / dt);
    prev = p;
  }
  return out;
}

double trajectory_batch_loss(const SequenceForecaster& model, const std::vector<ForecastSample>& batch, double gamma2,
                             ParamStore* grad) {
  if (batch.empty()) throw Error(ErrorKind::kEmptyInput, "empty forecast batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double inv_t = 1.0 / kHorizon;
  double total = 0.0;
  for (const auto& group : group_by_length(batch)) {
    std::vector<const TrackHistory*> tracks;
    for (std::size_t i : group) tracks.push_back(&batch[i].history);
    SequenceForecaster::Pass pass;
    model.forward(trajectory_inputs(tracks), pass);
    const auto cols = static_cast<Eigen::Index>(group.size());
    std::vector<Eigen::MatrixXd> d_out(kHorizon, Eigen::MatrixXd::Zero(kTrajInputDim, cols));
    for (Eigen::Index b = 0; b < cols; ++b) {
      const ForecastSample& s = batch[group[static_cast<std::size_t>(b)]];
      const Vec2 last = s.history.positions.back();
      const double dt = s.history.dt;
      Eigen::Vector2d y_prev = pass.outputs[0].col(b);
      Eigen::Vector2d g_prev(0.0, 0.0);
      double loss = 0.0;
      for (int k = 0; k < kHorizon; ++k) {
        const Eigen::Vector2d y = pass.outputs[static_cast<std::size_t>(k + 1)].col(b);
        const Vec2 gp = s.future_positions[static_cast<std::size_t>(k)] - last;
        const Eigen::Vector2d g(gp.x, gp.y);
        const Eigen::Vector2d ep = y - g;
        const Eigen::Vector2d ev = (y - y_prev) / dt - (g - g_prev) / dt;
        loss += ep.squaredNorm() + gamma2 * ev.squaredNorm();
        if (grad) {
          const double scale = 2.0 * inv_t * inv_b;
          d_out[static_cast<std::size_t>(k)].col(b) += scale * (ep + gamma2 * ev / dt);
          if (k >= 1) d_out[static_cast<std::size_t>(k - 1)].col(b) -= scale * gamma2 * ev / dt;
        }
        y_prev = y;
        g_prev = g;
      }
      total += loss * inv_t * inv_b;
    }
    if (grad) model.backward(pass, d_out, *grad);
  }
  return total;
}

double pose_batch_loss(const SequenceForecaster& model, const std::vector<ForecastSample>& batch, double gamma1,
                       ParamStore* grad) {
  if (batch.empty()) throw Error(ErrorKind::kEmptyInput, "empty forecast batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double inv_n = 1.0 / (kHorizon * kNumJoints);
  double total = 0.0;
  for (const auto& group : group_by_length(batch)) {
    std::vector<const TrackHistory*> tracks;
    for (std::size_t i : group) tracks.push_back(&batch[i].history);
    SequenceForecaster::Pass pass;
    model.forward(pose_inputs(tracks), pass);
    const auto cols = static_cast<Eigen::Index>(group.size());
    std::vector<Eigen::MatrixXd> d_out(kHorizon, Eigen::MatrixXd::Zero(kPoseInputDim, cols));
    for (Eigen::Index b = 0; b < cols; ++b) {
      const ForecastSample& s = batch[group[static_cast<std::size_t>(b)]];
      double loss = 0.0;
      for (int k = 0; k < kHorizon; ++k) {
        const auto& y = pass.outputs[static_cast<std::size_t>(k + 1)];
        const KeypointFrame& g = s.future_keypoints[static_cast<std::size_t>(k)];
        for (int q = 0; q < kPoseInputDim; ++q) {
          const double w = (q % 3 == 2) ? gamma1 : 1.0;
          const double e = y(q, b) - g[static_cast<std::size_t>(q)];
          loss += w * e * e;
          if (grad) d_out[static_cast<std::size_t>(k)](q, b) = 2.0 * w * e * inv_n * inv_b;
        }
      }
      total += loss * inv_n * inv_b;
    }
    if (grad) model.backward(pass, d_out, *grad);
  }
  return total;
}

ForecasterOptimizer::ForecasterOptimizer(const ForecasterPair& models)
    : trajectory(models.trajectory.params().size()), pose(models.pose.params().size()) {}

LossBreakdown train_step(const std::vector<ForecastSample>& batch, ForecasterPair& models, ForecasterOptimizer& optim,
                         double lr, double gamma1, double gamma2, double loss_weight) {
  ParamStore g_traj = models.trajectory.params().zeros_like();
  ParamStore g_pose = models.pose.params().zeros_like();
  LossBreakdown out;
  out.traj = trajectory_batch_loss(models.trajectory, batch, gamma2, &g_traj);
  out.pose = pose_batch_loss(models.pose, batch, gamma1, &g_pose);
  if (!g_traj.all_finite() || !g_pose.all_finite()) {
    throw Error(ErrorKind::kNonFiniteGradient, "forecaster gradient is not finite");
  }
  for (double& v : g_traj.values()) v *= loss_weight;
  for (double& v : g_pose.values()) v *= loss_weight;
  optim.trajectory.step(models.trajectory.params(), g_traj, lr);
  optim.pose.step(models.pose.params(), g_pose, lr);
  out.total = out.pose + out.traj;
  return out;
}

double train_trajectory_step(const std::vector<ForecastSample>& batch, SequenceForecaster& model, Adam& optim,
                             double lr, double gamma2) {
  ParamStore g = model.params().zeros_like();
  const double loss = trajectory_batch_loss(model, batch, gamma2, &g);
  optim.step(model.params(), g, lr);
  return loss;
}

std::vector<ForecastSample> constant_velocity_samples(int count, int frames, double sigma, double max_speed, Rng& rng,
                                                      double dt) {
  const CameraIntrinsics intrinsics;
  const Pose2 viewer{0.0, 0.0, 0.0};
  std::vector<ForecastSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    const Vec2 start{rng.uniform(1.0, 4.0), rng.uniform(-3.0, 3.0)};
    const double speed = rng.uniform(0.0, max_speed);
    const double heading = rng.uniform(-kPi, kPi);
    const Vec2 vel{speed * std::cos(heading), speed * std::sin(heading)};
    const double phase0 = rng.uniform();

    ForecastSample s;
    s.history.dt = dt;
    auto keypoints_at = [&](const Vec2& world, double travelled, int sector) {
      PedestrianState ps{world, heading, std::fmod(phase0 + travelled / kStrideLength, 1.0)};
      return project_skeleton(viewer, sector, skeleton_at(ps, 1.0), 1.0, intrinsics);
    };
    int sector = 0;
    for (int t = 0; t < frames + kHorizon; ++t) {
      const Vec2 world = start + vel * (t * dt);
      if (t < frames) sector = sector_of_relative_bearing(std::atan2(world.y, world.x));
      const KeypointFrame kp = keypoints_at(world, speed * t * dt, sector);
      // Agent frame with the viewer at the origin facing +x: lateral axis points right.
      const Vec2 local = world_to_agent(viewer, world);
      if (t < frames) {
        const double nx = sigma > 0.0 ? sigma * rng.gaussian() : 0.0;
        const double ny = sigma > 0.0 ? sigma * rng.gaussian() : 0.0;
        s.history.positions.push_back({local.x + nx, local.y + ny});
        s.history.keypoints.push_back(kp);
      } else {
        s.future_positions[static_cast<std::size_t>(t - frames)] = local;
        s.future_keypoints[static_cast<std::size_t>(t - frames)] = kp;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

double average_displacement_error(const SequenceForecaster& model, const std::vector<ForecastSample>& samples) {
  if (samples.empty()) throw Error(ErrorKind::kEmptyInput, "no samples");
  double total = 0.0;
  for (const auto& group : group_by_length(samples)) {
    std::vector<const TrackHistory*> tracks;
    for (std::size_t i : group) tracks.push_back(&samples[i].history);
    SequenceForecaster::Pass pass;
    model.forward(trajectory_inputs(tracks), pass);
    for (std::size_t b = 0; b < group.size(); ++b) {
      const ForecastSample& s = samples[group[b]];
      const Vec2 last = s.history.positions.back();
      double ade = 0.0;
      for (int k = 0; k < kHorizon; ++k) {
        const auto& y = pass.outputs[static_cast<std::size_t>(k + 1)];
        const Vec2 p{last.x + y(0, static_cast<Eigen::Index>(b)), last.y + y(1, static_cast<Eigen::Index>(b))};
        ade += distance(p, s.future_positions[static_cast<std::size_t>(k)]);
      }
      total += ade / kHorizon;
    }
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace hcsg
