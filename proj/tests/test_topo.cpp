#include "hcsg/policy.hpp"
#include "hcsg/topo.hpp"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "hcsg/gradcheck.hpp"

namespace hcsg {
namespace {

Eigen::VectorXd random_vec(int n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
  return v;
}

HumanFeature random_human(int id, Rng& rng) {
  return {id, {rng.uniform(0, 5), rng.uniform(0, 5)}, random_vec(kGeoFeatureDim, rng), random_vec(kSemFeatureDim, rng)};
}

std::vector<WaypointCandidate> three_candidates(const Vec2& at) {
  return {{at + Vec2{3, 0}, 0, 3.0}, {at + Vec2{0, 3}, 3, 3.0}, {at + Vec2{-3, 0}, 6, 3.0}};
}

std::vector<Eigen::VectorXd> features(std::size_t n, double value) {
  return std::vector<Eigen::VectorXd>(n, Eigen::VectorXd::Constant(kStaticFeatureDim, value));
}

TEST(UpdateGraph, EmptyGraphPlusThreeCandidates) {
  TopoGraph g;
  update_graph(g, {0, 0, 0}, three_candidates({0, 0}), features(3, 0.1), Eigen::VectorXd::Zero(kStaticFeatureDim), 0);
  EXPECT_EQ(g.nodes().size(), 4u);
  EXPECT_EQ(g.edges().size(), 3u);
  EXPECT_EQ(g.actions().size(), 3u);
  for (int a : g.actions()) {
    EXPECT_TRUE(g.has_edge(g.current(), a));
    EXPECT_EQ(g.node(a).kind, NodeKind::kCandidate);
  }
  for (const auto& [key, len] : g.edges()) EXPECT_GT(len, 0.0);
}

TEST(UpdateGraph, CandidateNearVisitedNodeMerges) {
  TopoGraph g;
  update_graph(g, {0, 0, 0}, three_candidates({0, 0}), features(3, 0.1), Eigen::VectorXd::Zero(kStaticFeatureDim), 0);
  const int start = g.current();
  // Move to the first candidate; one new candidate lands 0.3 m from the start node.
  const Vec2 here{3, 0};
  std::vector<WaypointCandidate> next = {{{0.3, 0.0}, 6, 2.7}, {{6, 0}, 0, 3.0}};
  update_graph(g, {here.x, here.y, 0}, next, features(2, 0.2), Eigen::VectorXd::Zero(kStaticFeatureDim), 1);
  EXPECT_EQ(g.nodes().size(), 5u);
  EXPECT_EQ(g.node(start).kind, NodeKind::kVisited);
  EXPECT_EQ(g.node(start).position, (Vec2{0, 0}));
  EXPECT_NE(std::find(g.actions().begin(), g.actions().end(), start), g.actions().end());
  EXPECT_EQ(g.node(g.current()).kind, NodeKind::kCurrent);
}

TEST(UpdateGraph, Idempotent) {
  TopoGraph a;
  update_graph(a, {1, 1, 0.3}, three_candidates({1, 1}), features(3, 0.4), Eigen::VectorXd::Ones(kStaticFeatureDim), 2);
  TopoGraph b = a;
  update_graph(b, {1, 1, 0.3}, three_candidates({1, 1}), features(3, 0.4), Eigen::VectorXd::Ones(kStaticFeatureDim), 2);
  EXPECT_TRUE(a == b);
}

TEST(UpdateGraph, CurrentComponentContainsAllCandidates) {
  TopoGraph g;
  Rng rng(3);
  Pose2 pose{0, 0, 0};
  for (int step = 0; step < 6; ++step) {
    std::vector<WaypointCandidate> cands;
    for (int k = 0; k < 5; ++k) {
      const double a = rng.uniform(-kPi, kPi);
      cands.push_back({pose.position() + Vec2{std::cos(a), std::sin(a)} * 2.0, k, 2.0});
    }
    update_graph(g, pose, cands, features(cands.size(), 0.0), Eigen::VectorXd::Zero(kStaticFeatureDim), step);
    const auto dist = g.geodesic_from(g.current());
    for (const TopoNode& n : g.nodes()) {
      if (n.kind == NodeKind::kCandidate) EXPECT_TRUE(std::isfinite(dist[static_cast<std::size_t>(n.id)]));
    }
    const Vec2 next = g.node(g.actions().front()).position;
    pose = {next.x, next.y, 0.0};
  }
}

TEST(Geodesic, SumsEdgeLengths) {
  TopoGraph g;
  const int a = g.add_node({0, 0}, NodeKind::kCurrent, 0);
  const int b = g.add_node({3, 0}, NodeKind::kCandidate, 0);
  const int c = g.add_node({3, 4}, NodeKind::kCandidate, 0);
  const int d = g.add_node({9, 9}, NodeKind::kCandidate, 0);
  g.add_edge(a, b);
  g.add_edge(b, c);
  const auto dist = g.geodesic_from(a);
  EXPECT_EQ(dist[static_cast<std::size_t>(a)], 0.0);
  EXPECT_NEAR(dist[static_cast<std::size_t>(c)], 7.0, 1e-12);
  EXPECT_TRUE(std::isinf(dist[static_cast<std::size_t>(d)]));
}

struct FusionFixture {
  ParamStore params;
  FusionLayer layer;
  FusionFixture() {
    layer = FusionLayer::add_to(params);
    Rng rng(8);
    layer.init(params, rng);
    fill_uniform(params, layer.b1, 0.1, rng);
  }
};

TEST(Fuse, NoHumansUsesZeroSummary) {
  FusionFixture f;
  Rng rng(1);
  const Eigen::VectorXd s = random_vec(kStaticFeatureDim, rng);
  Eigen::VectorXd z(kFusionInputDim);
  z << s, Eigen::VectorXd::Zero(kHumanFeatureDim);
  const Eigen::VectorXd expect = f.layer.forward(f.params, z).col(0);
  EXPECT_EQ(fuse(s, {}, f.params, f.layer), expect);
  EXPECT_EQ(human_summary({}), Eigen::VectorXd::Zero(kHumanFeatureDim));
}

TEST(Fuse, ThreeIdenticalHumansEqualOne) {
  FusionFixture f;
  Rng rng(2);
  const Eigen::VectorXd s = random_vec(kStaticFeatureDim, rng);
  HumanFeature h = random_human(1, rng);
  HumanFeature h2 = h, h3 = h;
  h2.id = 2;
  h3.id = 3;
  EXPECT_LT((fuse(s, {h, h2, h3}, f.params, f.layer) - fuse(s, {h}, f.params, f.layer)).norm(), 1e-12);
}

TEST(Fuse, HumanPermutationIsBitIdentical) {
  FusionFixture f;
  Rng rng(3);
  const Eigen::VectorXd s = random_vec(kStaticFeatureDim, rng);
  std::vector<HumanFeature> humans;
  for (int i = 0; i < 5; ++i) humans.push_back(random_human(10 - i, rng));
  const Eigen::VectorXd base = fuse(s, humans, f.params, f.layer);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<HumanFeature> shuffled = humans;
    for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
      std::swap(shuffled[i], shuffled[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
    }
    EXPECT_EQ(fuse(s, shuffled, f.params, f.layer), base);
  }
}

TEST(Fuse, SummaryIsMeanOfGeoPlusSem) {
  Rng rng(4);
  const HumanFeature a = random_human(1, rng);
  const HumanFeature b = random_human(2, rng);
  const Eigen::VectorXd expect = 0.5 * ((a.geo + a.sem) + (b.geo + b.sem));
  EXPECT_LT((human_summary({a, b}) - expect).norm(), 1e-12);
}

TEST(Fuse, DimensionMismatch) {
  FusionFixture f;
  try {
    fuse(Eigen::VectorXd::Zero(10), {}, f.params, f.layer);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimensionMismatch);
  }
  Rng rng(1);
  HumanFeature h = random_human(1, rng);
  h.sem = Eigen::VectorXd::Zero(5);
  EXPECT_THROW(fuse(Eigen::VectorXd::Zero(kStaticFeatureDim), {h}, f.params, f.layer), Error);
}

TopoGraph scored_graph(Rng& rng) {
  TopoGraph g;
  std::vector<Eigen::VectorXd> feats;
  for (int i = 0; i < 3; ++i) feats.push_back(random_vec(kStaticFeatureDim, rng));
  update_graph(g, {0, 0, 0}, three_candidates({0, 0}), feats, random_vec(kStaticFeatureDim, rng), 0);
  return g;
}

TEST(Score, SoftmaxNormalized) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Scorer scorer(rng.next_u64());
    TopoGraph g = scored_graph(rng);
    std::vector<HumanFeature> humans = {random_human(1, rng), random_human(2, rng)};
    assign_humans(g, humans);
    refresh_fused(g, scorer.params(), scorer.fusion);
    const Distribution d = score(g, tokenize_instruction("Go around the person reading and wait near the sofa."), scorer);
    EXPECT_EQ(d.size(), 4);
    EXPECT_NEAR(d.probs.sum(), 1.0, 1e-9);
    EXPECT_GE(d.probs.minCoeff(), 0.0);
  }
}

TEST(Score, StopOnlyWithoutCandidates) {
  const Scorer scorer(1);
  TopoGraph g;
  update_graph(g, {0, 0, 0}, {}, {}, Eigen::VectorXd::Zero(kStaticFeatureDim), 0);
  refresh_fused(g, scorer.params(), scorer.fusion);
  const Distribution d = score(g, tokenize_instruction("stop"), scorer);
  ASSERT_EQ(d.size(), 1);
  EXPECT_EQ(d.stop_index(), 0);
  EXPECT_NEAR(d.probs[0], 1.0, 1e-15);
}

TEST(Score, ZeroHeadIsUniform) {
  Rng rng(6);
  Scorer scorer(2);
  scorer.params().mat(scorer.ffn_w2).setZero();
  scorer.params().vec(scorer.ffn_b2).setZero();
  TopoGraph g = scored_graph(rng);
  refresh_fused(g, scorer.params(), scorer.fusion);
  const Distribution d = score(g, tokenize_instruction("Head to the sofa and stop there."), scorer);
  for (int i = 0; i < d.size(); ++i) EXPECT_NEAR(d.probs[i], 0.25, 1e-15);
}

TEST(Score, ArgmaxInvariantToPositiveHeadScale) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Scorer scorer(rng.next_u64());
    TopoGraph g = scored_graph(rng);
    refresh_fused(g, scorer.params(), scorer.fusion);
    const InstructionTokens tok = tokenize_instruction("Walk past the person and stop next to the bed.");
    const int before = score(g, tok, scorer).argmax();
    const double c = rng.uniform(0.1, 10.0);
    scorer.params().mat(scorer.ffn_w2) *= c;
    scorer.params().vec(scorer.ffn_b2) *= c;
    EXPECT_EQ(score(g, tok, scorer).argmax(), before);
  }
}

TEST(Score, HumanOrderDoesNotChangeScores) {
  Rng rng(9);
  const Scorer scorer(3);
  TopoGraph a = scored_graph(rng);
  TopoGraph b = a;
  std::vector<HumanFeature> humans = {random_human(4, rng), random_human(2, rng), random_human(7, rng)};
  assign_humans(a, humans);
  std::reverse(humans.begin(), humans.end());
  assign_humans(b, humans);
  refresh_fused(a, scorer.params(), scorer.fusion);
  refresh_fused(b, scorer.params(), scorer.fusion);
  const InstructionTokens tok = tokenize_instruction("Head to the lamp and stop there.");
  EXPECT_EQ(score(a, tok, scorer).probs, score(b, tok, scorer).probs);
}

// Fusion reduced to relu(static) and a head reading feature 0, so node H
// (feature 0 large) is the high-scoring node.
Scorer transparent_scorer() {
  Scorer s(4);
  ParamStore& p = s.params();
  p.mat(s.fusion.w1).setZero();
  p.mat(s.fusion.w1).topLeftCorner(kNodeFeatureDim, kNodeFeatureDim).setIdentity();
  p.vec(s.fusion.b1).setZero();
  p.mat(s.fusion.w2).setZero();
  p.mat(s.fusion.w2).leftCols(kNodeFeatureDim).setIdentity();
  p.vec(s.fusion.b2).setZero();
  p.mat(s.ffn_w1).setIdentity();
  p.vec(s.ffn_b1).setZero();
  p.mat(s.ffn_w2).setZero();
  p.mat(s.ffn_w2)(0, 0) = 1.0;
  p.vec(s.ffn_b2).setZero();
  p.vec(s.stop).setZero();
  return s;
}

TEST(Score, DistanceBiasFavoursCandidateNearHighScoringNode) {
  TopoGraph g;
  const int c = g.add_node({0, 0}, NodeKind::kCurrent, 0);
  const int h = g.add_node({3, 0}, NodeKind::kVisited, 0);
  const int near = g.add_node({3, 1}, NodeKind::kCandidate, 0);
  const int far = g.add_node({0, -7}, NodeKind::kCandidate, 0);
  g.add_edge(c, h);
  g.add_edge(h, near);
  g.add_edge(c, near);
  g.add_edge(c, far);
  g.set_current(c);
  g.set_actions({near, far});
  g.node(h).static_feature[0] = 4.0;
  g.node(near).static_feature[1] = 0.1;
  g.node(far).static_feature[1] = 0.1;
  ASSERT_NEAR(g.geodesic_from(near)[static_cast<std::size_t>(h)], 1.0, 1e-12);
  ASSERT_NEAR(g.geodesic_from(far)[static_cast<std::size_t>(h)], 10.0, 1e-12);

  Scorer scorer = transparent_scorer();
  refresh_fused(g, scorer.params(), scorer.fusion);
  const InstructionTokens none;
  scorer.set_alpha(0.0);
  const double p0 = score(g, none, scorer).probs[0];
  scorer.set_alpha(20.0);
  const double p_large = score(g, none, scorer).probs[0];
  EXPECT_GT(p_large, p0);
}

TEST(Score, RequiresCurrentNode) {
  const Scorer scorer(1);
  TopoGraph g;
  EXPECT_THROW(score(g, {}, scorer), Error);
}

TEST(AssignHumans, NearestNodeWins) {
  TopoGraph g;
  update_graph(g, {0, 0, 0}, three_candidates({0, 0}), features(3, 0.0), Eigen::VectorXd::Zero(kStaticFeatureDim), 0);
  Rng rng(1);
  HumanFeature h = random_human(1, rng);
  h.position = Vec2{3.2, 0.0};
  assign_humans(g, {h});
  const int a = g.nearest_node({3, 0}, 0.1);
  EXPECT_EQ(g.node(a).human_count, 1);
  EXPECT_EQ(g.node(a).human_summary, h.geo + h.sem);
  for (const TopoNode& n : g.nodes()) {
    if (n.id != a) EXPECT_EQ(n.human_count, 0);
  }
}

TEST(AssignHumans, TieGoesToLowerId) {
  TopoGraph g;
  update_graph(g, {0, 0, 0}, {{{2, 0}, 0, 2.0}, {{0, 2}, 3, 2.0}}, features(2, 0.0),
               Eigen::VectorXd::Zero(kStaticFeatureDim), 0);
  Rng rng(1);
  HumanFeature h = random_human(1, rng);
  h.position = Vec2{2, 2};  // exactly 2 m from both candidates
  assign_humans(g, {h});
  const int lo = std::min(g.actions()[0], g.actions()[1]);
  const int hi = std::max(g.actions()[0], g.actions()[1]);
  EXPECT_EQ(g.node(lo).human_count, 1);
  EXPECT_EQ(g.node(hi).human_count, 0);
}

TEST(AssignHumans, NoHumansKeepsSummaries) {
  TopoGraph g;
  update_graph(g, {0, 0, 0}, three_candidates({0, 0}), features(3, 0.0), Eigen::VectorXd::Zero(kStaticFeatureDim), 0);
  Rng rng(1);
  assign_humans(g, {random_human(1, rng)});
  const TopoGraph before = g;
  assign_humans(g, {});
  EXPECT_TRUE(g == before);
}

TEST(Tokens, HashedIdsAndLengthCap) {
  const InstructionTokens t = tokenize_instruction("Head to the sofa");
  ASSERT_EQ(t.ids.size(), 4u);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : std::string("sofa")) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  EXPECT_EQ(t.ids[3], static_cast<int>(h % 1024));
  std::string longer;
  for (int i = 0; i < 60; ++i) longer += "word" + std::to_string(i) + " ";
  const InstructionTokens capped = tokenize_instruction(longer);
  EXPECT_EQ(capped.ids.size(), 40u);
  for (int id : capped.ids) {
    EXPECT_GE(id, 0);
    EXPECT_LT(id, 1024);
  }
}

TEST(Gradients, FusionAndScorerMatchFiniteDifferences) {
  for (const GradientReport& r : gradient_suite(17, 20)) {
    if (r.path.rfind("forecast", 0) == 0) continue;
    EXPECT_GE(r.result.probes, 20u) << r.path;
    EXPECT_LT(r.result.max_relative_error, 1e-4) << r.path;
  }
}

}  // namespace
}  // namespace hcsg
