#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hcsg/nn.hpp"
#include "hcsg/perception.hpp"

namespace hcsg {

inline constexpr int kHiddenDim = 64;
inline constexpr int kHorizon = 3;
inline constexpr int kTrajInputDim = 2;
inline constexpr int kPoseInputDim = kKeypointValues;
inline constexpr int kGeoFeatureDim = 2 * kHiddenDim;

using KeypointFrame = std::array<double, kKeypointValues>;

// ---------------------------------------------------------------------------
// Single LSTM cell. Gate rows are stacked [input; forget; output; candidate].

struct LstmState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

LstmState lstm_cell(const Eigen::VectorXd& x, const Eigen::VectorXd& h, const Eigen::VectorXd& c,
                    const Eigen::MatrixXd& w, const Eigen::MatrixXd& u, const Eigen::VectorXd& b);

/// Cached activations of one batched cell evaluation (columns are samples).
struct LstmCache {
  Eigen::MatrixXd x, h_prev, c_prev;
  Eigen::MatrixXd i, f, o, g, c, tanh_c, h;
};

void lstm_forward(const Eigen::Ref<const Eigen::MatrixXd>& w, const Eigen::Ref<const Eigen::MatrixXd>& u,
                  const Eigen::Ref<const Eigen::VectorXd>& b, const Eigen::MatrixXd& x, const Eigen::MatrixXd& h_prev,
                  const Eigen::MatrixXd& c_prev, LstmCache& cache);

/// Accumulates weight gradients and returns (dx, dh_prev, dc_prev) via the out-params.
void lstm_backward(const Eigen::Ref<const Eigen::MatrixXd>& w, const Eigen::Ref<const Eigen::MatrixXd>& u,
                   const LstmCache& cache, const Eigen::MatrixXd& dh, const Eigen::MatrixXd& dc, MatMap dw, MatMap du,
                   VecMap db, Eigen::MatrixXd& dx, Eigen::MatrixXd& dh_prev, Eigen::MatrixXd& dc_prev);

// ---------------------------------------------------------------------------
// Encoder-decoder forecaster

/// Encoder LSTM over the observed frames; a decoder LSTM then runs kHorizon
/// autoregressive steps from the encoder's final state, each emitting a delta
/// added to the previous output (the first step starts from the last input).
class SequenceForecaster {
 public:
  SequenceForecaster() = default;
  SequenceForecaster(int input_dim, std::uint64_t seed, int hidden = kHiddenDim);

  int input_dim() const { return input_dim_; }
  int hidden() const { return hidden_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct Pass {
    std::vector<LstmCache> encoder;
    std::vector<LstmCache> decoder;
    std::vector<Eigen::MatrixXd> outputs;  // kHorizon + 1 entries; [0] is the last input
  };

  /// inputs: one (input_dim x batch) matrix per observed frame.
  void forward(const std::vector<Eigen::MatrixXd>& inputs, Pass& pass) const;
  /// d_outputs: gradients for outputs[1..kHorizon]. Accumulates into grad.
  void backward(const Pass& pass, const std::vector<Eigen::MatrixXd>& d_outputs, ParamStore& grad) const;

  /// Encoder final hidden state for a batch (columns).
  Eigen::MatrixXd encode(const std::vector<Eigen::MatrixXd>& inputs) const;

  // Block indices.
  int enc_w = -1, enc_u = -1, enc_b = -1;
  int dec_w = -1, dec_u = -1, dec_b = -1;
  int head_w = -1, head_b = -1;

 private:
  int input_dim_ = 0;
  int hidden_ = 0;
  ParamStore params_;
};

struct TrackHistory {
  std::vector<Vec2> positions;            // agent-centric, meters
  std::vector<KeypointFrame> keypoints;   // normalized (u, v, conf) x 17
  double dt = kDefaultDt;
};

TrackHistory history_from_track(const Track& track, double dt);

struct Forecast {
  std::array<Vec2, kHorizon> positions{};
  std::array<Vec2, kHorizon> velocities{};
  std::array<KeypointFrame, kHorizon> keypoints{};
};

struct ForecasterPair {
  SequenceForecaster trajectory;
  SequenceForecaster pose;

  ForecasterPair() = default;
  explicit ForecasterPair(std::uint64_t seed);

  nlohmann::ordered_json to_json() const;
  void load_json(const nlohmann::json& j);
};

struct ForecastResult {
  Forecast forecast;
  Eigen::VectorXd geo;  // kGeoFeatureDim: [trajectory hidden ; pose hidden]
};

/// Throws Error(kTrackTooShort) when fewer than 3 frames are given.
ForecastResult forecast_track(const TrackHistory& track, const ForecasterPair& models);

// ---------------------------------------------------------------------------
// Losses

/// Mean over keypoint terms of squared coordinate error plus gamma1 times the
/// squared confidence error. Inputs are flat (u, v, conf) triples.
double pose_loss(const std::vector<double>& pred, const std::vector<double>& gt, double gamma1);
double pose_loss(const std::vector<KeypointFrame>& pred, const std::vector<KeypointFrame>& gt, double gamma1);

/// Mean over the horizon of squared position error plus gamma2 times the squared velocity error.
double traj_loss(const std::vector<Vec2>& pred_pos, const std::vector<Vec2>& pred_vel, const std::vector<Vec2>& gt_pos,
                 const std::vector<Vec2>& gt_vel, double gamma2);

/// Backward differences (p_t - p_{t-1}) / dt with p_0 = `anchor`.
std::vector<Vec2> finite_difference_velocities(const Vec2& anchor, const std::vector<Vec2>& positions, double dt);

struct LossBreakdown {
  double nav = 0.0;
  double pose = 0.0;
  double traj = 0.0;
  double coll = 0.0;
  double prox = 0.0;
  double total = 0.0;
};

// ---------------------------------------------------------------------------
// Training

struct ForecastSample {
  TrackHistory history;
  std::array<Vec2, kHorizon> future_positions{};
  std::array<KeypointFrame, kHorizon> future_keypoints{};
};

/// Mean trajectory loss over the batch; adds its gradient into `grad` when non-null.
double trajectory_batch_loss(const SequenceForecaster& model, const std::vector<ForecastSample>& batch, double gamma2,
                             ParamStore* grad);
/// Mean pose loss over the batch; adds its gradient into `grad` when non-null.
double pose_batch_loss(const SequenceForecaster& model, const std::vector<ForecastSample>& batch, double gamma1,
                       ParamStore* grad);

struct ForecasterOptimizer {
  Adam trajectory;
  Adam pose;

  ForecasterOptimizer() = default;
  explicit ForecasterOptimizer(const ForecasterPair& models);
};

/// One Adam update of both forecasters on a batch; gradients are scaled by
/// `loss_weight`. Returns the pre-update (unweighted) pose and traj losses.
/// A non-finite gradient throws Error(kNonFiniteGradient) with no parameter touched.
LossBreakdown train_step(const std::vector<ForecastSample>& batch, ForecasterPair& models, ForecasterOptimizer& optim,
                         double lr, double gamma1, double gamma2, double loss_weight = 1.0);

/// Trajectory-only variant used for synthetic pretraining and the learning checks.
double train_trajectory_step(const std::vector<ForecastSample>& batch, SequenceForecaster& model, Adam& optim,
                             double lr, double gamma2);

/// Constant-velocity walkers: M observed frames plus kHorizon true future
/// frames. Observed positions carry Gaussian noise `sigma`; futures are exact.
/// Keypoints are a fixed upright skeleton seen from the side.
std::vector<ForecastSample> constant_velocity_samples(int count, int frames, double sigma, double max_speed, Rng& rng,
                                                      double dt = kDefaultDt);

/// Mean over samples of the mean displacement error over the horizon.
double average_displacement_error(const SequenceForecaster& model, const std::vector<ForecastSample>& samples);

}  // namespace hcsg
