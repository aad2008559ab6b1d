#include "hcsg/gradcheck.hpp"

#include <algorithm>

#include "hcsg/forecast.hpp"
#include "hcsg/policy.hpp"
#include "hcsg/topo.hpp"
#include "hcsg/train.hpp"

namespace hcsg {

namespace {

Eigen::VectorXd random_vector(int n, Rng& rng, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

GradCheckResult check_forecaster(int input_dim, bool pose, Rng& rng, std::size_t probes) {
  SequenceForecaster model(input_dim, rng.next_u64());
  // The head starts at zero, which would leave the decoder with no gradient.
  fill_uniform(model.params(), model.head_w, 0.2, rng);
  fill_uniform(model.params(), model.head_b, 0.05, rng);
  const auto batch = constant_velocity_samples(4, kDefaultWindowFrames, 0.01, 1.5, rng);
  Objective obj;
  obj.value = [&] {
    return pose ? pose_batch_loss(model, batch, 0.5, nullptr) : trajectory_batch_loss(model, batch, 0.5, nullptr);
  };
  obj.gradient = [&](std::vector<double>& g) {
    ParamStore grad = model.params().zeros_like();
    if (pose) {
      pose_batch_loss(model, batch, 0.5, &grad);
    } else {
      trajectory_batch_loss(model, batch, 0.5, &grad);
    }
    g = grad.values();
  };
  const auto idx = sample_probes(model.params().size(), probes, rng);
  return grad_check(model.params().values(), obj, idx);
}

GradCheckResult check_fusion(Rng& rng, std::size_t probes) {
  ParamStore params;
  const FusionLayer layer = FusionLayer::add_to(params);
  layer.init(params, rng);
  fill_uniform(params, layer.b1, 0.1, rng);
  fill_uniform(params, layer.b2, 0.1, rng);
  Eigen::MatrixXd input(kFusionInputDim, 5);
  for (int c = 0; c < input.cols(); ++c) input.col(c) = random_vector(kFusionInputDim, rng);
  Eigen::MatrixXd weights(kNodeFeatureDim, 5);
  for (int c = 0; c < weights.cols(); ++c) weights.col(c) = random_vector(kNodeFeatureDim, rng);
  Objective obj;
  obj.value = [&] { return layer.forward(params, input).cwiseProduct(weights).sum(); };
  obj.gradient = [&](std::vector<double>& g) {
    FusionLayer::Cache cache;
    layer.forward(params, input, &cache);
    ParamStore grad = params.zeros_like();
    layer.backward(params, cache, weights, grad);
    g = grad.values();
  };
  const auto idx = sample_probes(params.size(), probes, rng);
  return grad_check(params.values(), obj, idx);
}

struct ScorerFixture {
  Scorer scorer;
  TopoGraph graph;
  InstructionTokens tokens;
  Pose2 agent;
  std::vector<Vec2> action_positions;
  std::vector<std::array<Vec2, kHorizon>> humans;
};

ScorerFixture scorer_fixture(Rng& rng) {
  ScorerFixture f{Scorer(rng.next_u64()), {}, tokenize_instruction("Walk past the person who is reading a book and stop next to the sofa."), {}, {}, {}};
  auto step = [&](const Pose2& pose, std::int64_t t) {
    std::vector<WaypointCandidate> cands;
    std::vector<Eigen::VectorXd> feats;
    for (int k = 0; k < 6; ++k) {
      const double bearing = pose.heading + k * kPi / 3.0 + rng.uniform(-0.2, 0.2);
      const double r = rng.uniform(1.5, 3.0);
      cands.push_back({pose.position() + Vec2{std::cos(bearing), std::sin(bearing)} * r, 2 * k, r});
      feats.push_back(random_vector(kStaticFeatureDim, rng, 0.5));
    }
    update_graph(f.graph, pose, cands, feats, random_vector(kStaticFeatureDim, rng, 0.5), t);
  };
  step({0.0, 0.0, 0.0}, 0);
  f.agent = {1.2, 0.4, 0.3};
  step(f.agent, 1);
  std::vector<HumanFeature> humans;
  for (int j = 0; j < 3; ++j) {
    const int target = f.graph.actions()[static_cast<std::size_t>(j)];
    humans.push_back({j, f.graph.node(target).position + Vec2{0.2, -0.1},
                      random_vector(kGeoFeatureDim, rng, 0.5), random_vector(kSemFeatureDim, rng, 0.5)});
  }
  assign_humans(f.graph, humans);
  refresh_fused(f.graph, f.scorer.params(), f.scorer.fusion);
  for (int id : f.graph.actions()) f.action_positions.push_back(f.graph.node(id).position);
  // One forecast crossing the first action's path, one passing near the second.
  const Vec2 o = f.agent.position();
  const Vec2 m0 = (o + f.action_positions[0]) * 0.5;
  const Vec2 m1 = (o + f.action_positions[1]) * 0.5;
  f.humans.push_back({m0 + Vec2{0.6, 0.0}, m0 + Vec2{0.3, 0.1}, m0 + Vec2{0.05, 0.2}});
  f.humans.push_back({m1 + Vec2{0.0, 0.9}, m1 + Vec2{0.0, 0.8}, m1 + Vec2{0.1, 0.75}});
  return f;
}

GradCheckResult check_scorer(bool social, Rng& rng, std::size_t probes) {
  ScorerFixture f = scorer_fixture(rng);
  const int expert = 1;
  SocialConfig cfg;
  ParamStore& params = f.scorer.params();
  Objective obj;
  obj.value = [&] {
    const Distribution d = score(f.graph, f.tokens, f.scorer);
    double v = nav_loss(d, expert);
    if (social) v += expected_social_penalty(d, f.agent, f.action_positions, f.humans, cfg).total();
    return v;
  };
  obj.gradient = [&](std::vector<double>& g) {
    ScoreCache cache;
    const Distribution d = score(f.graph, f.tokens, f.scorer, &cache);
    SocialPenalty pen;
    if (social) pen = expected_social_penalty(d, f.agent, f.action_positions, f.humans, cfg);
    ParamStore grad = params.zeros_like();
    score_backward(f.graph, f.tokens, f.scorer, cache, policy_logit_gradient(d, expert, pen), grad);
    g = grad.values();
  };
  // Unused token columns have identically zero gradient; probe the used ones.
  std::vector<bool> eligible(params.size(), true);
  const auto& tb = params.blocks()[static_cast<std::size_t>(f.scorer.tokens)];
  for (int c = 0; c < tb.cols; ++c) {
    const bool used = std::find(f.tokens.ids.begin(), f.tokens.ids.end(), c) != f.tokens.ids.end();
    for (int r = 0; r < tb.rows; ++r) eligible[tb.offset + static_cast<std::size_t>(c * tb.rows + r)] = used;
  }
  const auto idx = sample_probes(params.size(), probes, rng, eligible);
  return grad_check(params.values(), obj, idx);
}

}  // namespace

std::vector<GradientReport> gradient_suite(std::uint64_t seed, std::size_t probes) {
  std::vector<GradientReport> out;
  Rng rng(seed);
  out.push_back({"forecast.trajectory", check_forecaster(kTrajInputDim, false, rng, probes)});
  out.push_back({"forecast.pose", check_forecaster(kPoseInputDim, true, rng, probes)});
  out.push_back({"fusion", check_fusion(rng, probes)});
  out.push_back({"scorer.nav", check_scorer(false, rng, probes)});
  out.push_back({"scorer.social", check_scorer(true, rng, probes)});
  return out;
}

}  // namespace hcsg
