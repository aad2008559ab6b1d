#include "hcsg/eval.hpp"

#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "hcsg/benchmark.hpp"
#include "hcsg/scenario_io.hpp"

namespace hcsg {
namespace {

EpisodeLog log_with(double final_distance, int collisions) {
  EpisodeLog log;
  log.goal = {10.0, 5.0};
  log.final_position = {10.0 + final_distance, 5.0};
  StepRecord s;
  for (int i = 0; i < collisions; ++i) s.collisions.push_back({i, i});
  log.steps.push_back(s);
  return log;
}

TEST(Metrics, HandComputedFixture) {
  const MetricsReport r = compute_metrics({log_with(1, 0), log_with(2, 2), log_with(5, 0)}, 3.0);
  EXPECT_NEAR(r.ne, 8.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.sr, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.cr, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.tcr, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(r.episodes, 3u);
}

TEST(Metrics, AllAtGoal) {
  const MetricsReport r = compute_metrics({log_with(0, 0), log_with(0, 0)});
  EXPECT_EQ(r.sr, 1.0);
  EXPECT_EQ(r.cr, 0.0);
  EXPECT_EQ(r.tcr, 0.0);
  EXPECT_EQ(r.ne, 0.0);
}

TEST(Metrics, EveryEpisodeCollides) {
  const MetricsReport r = compute_metrics({log_with(0, 1), log_with(0.5, 1), log_with(9, 1)});
  EXPECT_EQ(r.cr, 1.0);
  EXPECT_EQ(r.sr, 0.0);
}

TEST(Metrics, ThresholdIsStrict) {
  EXPECT_EQ(compute_metrics({log_with(3.0, 0)}, 3.0).sr, 0.0);
  EXPECT_EQ(compute_metrics({log_with(2.999, 0)}, 3.0).sr, 1.0);
}

TEST(Metrics, EmptyInputThrows) {
  try {
    compute_metrics({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyInput);
  }
}

TEST(Metrics, OrderInvariantAndBounded) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EpisodeLog> logs;
    for (int i = rng.uniform_int(1, 12); i > 0; --i) logs.push_back(log_with(rng.uniform(0, 8), rng.uniform_int(0, 3)));
    const MetricsReport a = compute_metrics(logs);
    std::reverse(logs.begin(), logs.end());
    std::rotate(logs.begin(), logs.begin() + static_cast<std::ptrdiff_t>(logs.size() / 2), logs.end());
    const MetricsReport b = compute_metrics(logs);
    EXPECT_NEAR(a.ne, b.ne, 1e-12);
    EXPECT_EQ(a.sr, b.sr);
    EXPECT_EQ(a.cr, b.cr);
    EXPECT_EQ(a.tcr, b.tcr);
    EXPECT_LE(a.sr + a.cr, 1.0 + 1e-12);
    EXPECT_GE(a.tcr, a.cr);
  }
}

TEST(Median, OddEvenAndEmpty) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_THROW(median({}), Error);
}

TEST(Benchmark, DeterministicAndSplitsDisjoint) {
  const auto a = generate_benchmark(12, Split::kSeen, 5);
  const auto b = generate_benchmark(12, Split::kSeen, 5);
  EXPECT_EQ(benchmark_hash(a), benchmark_hash(b));
  const auto u = generate_benchmark(12, Split::kUnseen, 5);

  std::set<std::uint64_t> seen;
  for (const Episode& e : a) seen.insert(e.map->layout_hash());
  for (const Episode& e : u) EXPECT_EQ(seen.count(e.map->layout_hash()), 0u) << e.id;

  const auto families_seen = layout_family(Split::kSeen);
  const auto families_unseen = layout_family(Split::kUnseen);
  auto family_of = [](const Episode& e) {
    const std::string& id = e.map->id();
    const std::size_t end = id.rfind('-');
    const std::size_t begin = id.rfind('-', end - 1);
    return id.substr(begin + 1, end - begin - 1);
  };
  for (const Episode& e : a) {
    EXPECT_NE(std::find(families_seen.begin(), families_seen.end(), family_of(e)), families_seen.end()) << e.map->id();
  }
  for (const Episode& e : u) {
    EXPECT_NE(std::find(families_unseen.begin(), families_unseen.end(), family_of(e)), families_unseen.end())
        << e.map->id();
  }
  for (const std::string& f : families_seen) {
    EXPECT_EQ(std::find(families_unseen.begin(), families_unseen.end(), f), families_unseen.end());
  }
}

TEST(Benchmark, TwoHundredEpisodesValidate) {
  for (Split split : {Split::kSeen, Split::kUnseen}) {
    const auto eps = generate_benchmark(200, split, 0);
    ASSERT_EQ(eps.size(), 200u);
    std::set<std::string> ids;
    for (const Episode& e : eps) {
      EXPECT_NO_THROW(validate_episode(e)) << e.id;
      EXPECT_GE(e.pedestrians.size(), 1u);
      EXPECT_LE(e.pedestrians.size(), 4u);
      EXPECT_EQ(e.split, split);
      ids.insert(e.id);
    }
    EXPECT_EQ(ids.size(), 200u);
  }
}

TEST(Benchmark, ZeroEpisodesRejected) { EXPECT_THROW(generate_benchmark(0, Split::kSeen, 0), Error); }

TEST(Evaluate, InvariantsOnGeneratedBenchmarks) {
  const Models models(4);
  for (Split split : {Split::kSeen, Split::kUnseen}) {
    for (ActionMode mode : {ActionMode::kGreedy, ActionMode::kExpert}) {
      AgentOptions o;
      o.mode = mode;
      o.max_decisions = 15;
      const auto logs = evaluate(models, generate_benchmark(8, split, 21), o, 1);
      const MetricsReport r = compute_metrics(logs);
      EXPECT_LE(r.sr + r.cr, 1.0 + 1e-12);
      EXPECT_GE(r.tcr, r.cr);
      EXPECT_GE(r.ne, 0.0);
    }
  }
}

TEST(Evaluate, DeterministicAcrossRunsAndWorkers) {
  const Models models(8);
  const auto eps = generate_benchmark(6, Split::kUnseen, 2);
  AgentOptions o;
  o.mode = ActionMode::kSample;
  o.max_decisions = 10;
  o.noise_sigma = 0.02;
  const auto a = evaluate(models, eps, o, 99);
  const auto b = evaluate(models, eps, o, 99);
  const auto c = evaluate(models, eps, o, 99, 3);
  EXPECT_EQ(logs_jsonl(a), logs_jsonl(b));
  EXPECT_EQ(logs_hash(a), logs_hash(c));
  for (std::size_t i = 0; i < eps.size(); ++i) EXPECT_EQ(a[i].episode_id, eps[i].id);
}

TEST(Toggles, KnownAndUnknown) {
  for (const std::string& t : ablation_toggles()) {
    TrainConfig c;
    EXPECT_NO_THROW(apply_toggle(c, t));
    EXPECT_NE(c.hash(), TrainConfig{}.hash()) << t;
  }
  TrainConfig c;
  EXPECT_THROW(apply_toggle(c, "sonar-only"), Error);
}

TEST(Ablation, EmptyToggleSetIsTheFullModel) {
  AblationPlan plan;
  plan.base.iterations = 25;
  plan.base.pretrain_steps = 3;
  plan.base.pretrain_tracks = 8;
  plan.seeds = {6};
  const auto train_eps = generate_benchmark(3, Split::kSeen, 1);
  const auto eval_eps = generate_benchmark(4, Split::kUnseen, 1);
  const auto rows = run_ablation(plan, train_eps, eval_eps);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].variant, "full");

  TrainConfig c = plan.base;
  c.seed = 6;
  const TrainResult trained = train(c, train_eps);
  const auto logs = evaluate(trained.models, eval_eps, eval_options(c), derive_seed(6, 0xe7a1));
  const MetricsReport direct = compute_metrics(logs, c.goal_threshold);
  EXPECT_EQ(rows[0].runs[0].logs_hash, logs_hash(logs));
  EXPECT_EQ(rows[0].median.ne, direct.ne);
  EXPECT_EQ(rows[0].median.sr, direct.sr);
  EXPECT_EQ(rows[0].median.cr, direct.cr);
  EXPECT_EQ(rows[0].median.tcr, direct.tcr);

  const auto again = run_ablation(plan, train_eps, eval_eps);
  EXPECT_EQ(ablation_csv(again, "h"), ablation_csv(rows, "h"));
}

TEST(Reports, CarryConfigHash) {
  const MetricsReport r = compute_metrics({log_with(1, 0)}, 3.0, "seen", "full");
  EXPECT_EQ(metrics_csv({r}, "cafe").rfind("# config_hash=cafe\n", 0), 0u);
  EXPECT_NE(metrics_markdown({r}, "cafe").find("config_hash=cafe"), std::string::npos);
  EXPECT_NE(metrics_markdown({r}, "cafe").find("| full | seen | 1 |"), std::string::npos);
}

}  // namespace
}  // namespace hcsg
