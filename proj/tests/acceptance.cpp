// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hcsg/benchmark.hpp"
#include "hcsg/cli.hpp"
#include "hcsg/eval.hpp"
#include "hcsg/gradcheck.hpp"
#include "hcsg/perception.hpp"
#include "hcsg/scenario_io.hpp"
#include "hcsg/train.hpp"

namespace fs = std::filesystem;
using namespace hcsg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

bool close(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol; }

// 1 --------------------------------------------------------------------------

Outcome formulas() {
  std::vector<std::string> bad;
  auto check = [&](const char* name, double got, double want) {
    if (!close(got, want)) bad.push_back(std::string(name) + "=" + fmt("%.15g", got));
  };
  check("pose.same", pose_loss(std::vector<double>{0.3, 0.4, 0.9}, std::vector<double>{0.3, 0.4, 0.9}, 0.5), 0.0);
  check("pose.a", pose_loss(std::vector<double>{1.0, 0.0, 0.8}, std::vector<double>{0.0, 0.0, 1.0}, 0.5), 1.02);
  check("pose.b",
        pose_loss(std::vector<double>{1.0, 0.0, 1.0, 0.0, 2.0, 1.0}, std::vector<double>{0, 0, 1, 0, 0, 1}, 0.5), 2.5);
  check("traj.same", traj_loss({{1, 2}}, {{0, 1}}, {{1, 2}}, {{0, 1}}, 0.5), 0.0);
  check("traj.a", traj_loss({{0.5, 0}}, {{1, 0}}, {{0, 0}}, {{0, 0}}, 0.5), 0.75);
  check("traj.b", traj_loss({{0.5, 0}, {0, 0.5}}, {{1, 1}, {2, 2}}, {{0, 0}, {0, 0}}, {{1, 1}, {2, 2}}, 0.5), 0.25);
  check("coll.0", collision_loss(0, 1.0), 0.0);
  check("coll.2", collision_loss(2, 1.0, 3.0), 6.0);
  check("coll.half", collision_loss(1, 0.5), 1.5);
  check("prox.none", proximity_loss({}, 1.0), 0.0);
  check("prox.1m", proximity_loss({{{1.0, 0.0}, 0.0}}, 1.0), 1.0);
  check("prox.floor", proximity_loss({{{0.1, 0.0}, 0.0}}, 1.0), 16.0);
  check("prox.behind", proximity_loss({{{-1.0, 0.0}, kPi}}, 1.0), 0.25);
  const LossBreakdown c{0.7, 1.1, 0.4, 3.0, 0.25, 0.0};
  check("total.t0", total_loss(c, 0, 10).total, 0.7 + 1.1 + 0.4 + 3.0 + 0.25);
  check("total.floor", total_loss(c, 25, 10).total, 0.1 * (1.1 + 0.4) + 3.0 + 0.25 + 0.7);
  check("total.zero", total_loss(LossBreakdown{}, 3, 10).total, 0.0);
  const SocialConfig defaults;
  if (kCollisionPenalty != 3.0 || defaults.delta != 3.0) bad.push_back("delta");
  if (kSafetyRadius != 1.0 || defaults.safety_radius != 1.0) bad.push_back("r_s");
  if (kProximityFloor != 0.0625 || defaults.epsilon != 0.0625) bad.push_back("eps_p");
  std::string detail = "16 examples, constants delta=3 r_s=1 eps_p=0.0625";
  for (const auto& b : bad) detail += " mismatch:" + b;
  return {bad.empty(), detail};
}

// 2 --------------------------------------------------------------------------

Outcome gradients() {
  double worst = 0.0;
  std::size_t min_probes = std::numeric_limits<std::size_t>::max();
  std::string detail;
  for (const GradientReport& r : gradient_suite(7, 24)) {
    worst = std::max(worst, r.result.max_relative_error);
    min_probes = std::min(min_probes, r.result.probes);
    detail += r.path + "=" + fmt("%.2e", r.result.max_relative_error) + " ";
  }
  return {worst < 1e-4 && min_probes >= 20, detail + "probes>=" + std::to_string(min_probes)};
}

// 3 --------------------------------------------------------------------------

Outcome backprojection() {
  Rng rng(3);
  const CameraIntrinsics cam;
  double worst = 0.0;
  int done = 0;
  while (done < 100) {
    const Pose2 agent{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-kPi, kPi)};
    const int k = rng.uniform_int(0, kNumSectors - 1);
    const double bearing = sector_bearing(agent, k) + rng.uniform(-0.45, 0.45) * kSectorWidth;
    const double range = rng.uniform(0.5, kDetectionRange);
    const Vec2 world = agent.position() + Vec2{std::cos(bearing), std::sin(bearing)} * range;
    double u = 0, v = 0, d = 0;
    if (!project_point(agent, k, world, rng.uniform(0.0, 1.8), cam, u, v, d)) continue;
    const Vec2 back = agent_to_world(agent, backproject(u, v, d, cam, sector_bearing(agent, k), agent.heading));
    worst = std::max(worst, distance(back, world));
    ++done;
  }
  return {worst < 1e-6, "100 points, max error " + fmt("%.2e", worst) + " m"};
}

// 4 --------------------------------------------------------------------------

double ade_after_training(std::uint64_t seed, double sigma) {
  Rng rng(derive_seed(seed, 0xade));
  const auto train = constant_velocity_samples(100, kDefaultWindowFrames, sigma, 1.5, rng);
  const auto held_out = constant_velocity_samples(200, kDefaultWindowFrames, sigma, 1.5, rng);
  SequenceForecaster model(kTrajInputDim, seed);
  Adam optim(model.params().size());
  for (int i = 0; i < 400; ++i) train_trajectory_step(train, model, optim, 3e-3, 0.5);
  return average_displacement_error(model, held_out);
}

Outcome forecaster_learning() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> clean, noisy;
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
    clean.push_back(ade_after_training(seed, 0.0));
    noisy.push_back(ade_after_training(seed, 0.01));
  }
  const double mc = median(clean);
  const double mn = median(noisy);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {mc < 0.05 && mn < 0.03 && s < 120.0,
          "held-out ADE median " + fmt("%.4f", mc) + " m (noise-free), " + fmt("%.4f", mn) + " m (sigma 0.01)"};
}

// 5 --------------------------------------------------------------------------

// Exact optimum by breadth-first search over (cell, diagonal count): each
// layer holds the fewest straight moves for a fixed number of diagonal moves.
std::optional<double> bfs_length(const WorldMap& map, const Vec2& start, const Vec2& goal) {
  const int cols = map.cols();
  const int rows = map.rows();
  std::vector<char> blocked(static_cast<std::size_t>(cols * rows), 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      bool b = false;
      for (int dr = -2; dr <= 2 && !b; ++dr) {
        for (int dc = -2; dc <= 2 && !b; ++dc) b = dr * dr + dc * dc <= 4 && map.occupied({c + dc, r + dr});
      }
      blocked[static_cast<std::size_t>(r * cols + c)] = b;
    }
  }
  auto free = [&](int c, int r) {
    return c >= 0 && r >= 0 && c < cols && r < rows && !blocked[static_cast<std::size_t>(r * cols + c)];
  };
  const GridCell s = map.cell_of(start);
  const GridCell g = map.cell_of(goal);
  if (!free(s.col, s.row) || !free(g.col, g.row)) return std::nullopt;
  const int n = cols * rows;
  constexpr int kUnseen = std::numeric_limits<int>::max();
  std::vector<int> layer(static_cast<std::size_t>(n), kUnseen);
  layer[static_cast<std::size_t>(s.row * cols + s.col)] = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int d = 0; kGridResolution * std::sqrt(2.0) * d <= best; ++d) {
    // Straight-move BFS within the layer; seeds carry different counts, so
    // expand in order of count with one bucket per value.
    std::vector<std::vector<int>> buckets;
    for (int i = 0; i < n; ++i) {
      const int v = layer[static_cast<std::size_t>(i)];
      if (v == kUnseen) continue;
      if (static_cast<int>(buckets.size()) <= v) buckets.resize(static_cast<std::size_t>(v) + 1);
      buckets[static_cast<std::size_t>(v)].push_back(i);
    }
    for (std::size_t k = 0; k < buckets.size(); ++k) {
      for (std::size_t q = 0; q < buckets[k].size(); ++q) {
        const int i = buckets[k][q];
        if (layer[static_cast<std::size_t>(i)] != static_cast<int>(k)) continue;
        const int c = i % cols, r = i / cols;
        const int step[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto& st : step) {
          const int nc = c + st[0], nr = r + st[1];
          if (!free(nc, nr)) continue;
          const int j = nr * cols + nc;
          if (layer[static_cast<std::size_t>(j)] > static_cast<int>(k) + 1) {
            layer[static_cast<std::size_t>(j)] = static_cast<int>(k) + 1;
            if (buckets.size() <= k + 1) buckets.resize(k + 2);
            buckets[k + 1].push_back(j);
          }
        }
      }
    }
    const int at_goal = layer[static_cast<std::size_t>(g.row * cols + g.col)];
    if (at_goal != kUnseen) best = std::min(best, grid_path_length(at_goal, d));
    // Next layer: one diagonal move, no corner cutting.
    std::vector<int> next(static_cast<std::size_t>(n), kUnseen);
    bool any = false;
    for (int i = 0; i < n; ++i) {
      const int v = layer[static_cast<std::size_t>(i)];
      if (v == kUnseen) continue;
      const int c = i % cols, r = i / cols;
      for (int dc : {-1, 1}) {
        for (int dr : {-1, 1}) {
          if (!free(c + dc, r + dr) || !free(c + dc, r) || !free(c, r + dr)) continue;
          int& slot = next[static_cast<std::size_t>((r + dr) * cols + c + dc)];
          slot = std::min(slot, v);
          any = true;
        }
      }
    }
    if (!any) break;
    layer = std::move(next);
  }
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

Outcome oracle_equivalence() {
  Rng rng(55);
  int agree = 0;
  int reachable = 0;
  for (int m = 0; m < 50; ++m) {
    std::vector<Rect> obs;
    for (int k = rng.uniform_int(0, 4); k > 0; --k) {
      const double x = rng.uniform(0.0, 7.0);
      const double y = rng.uniform(0.0, 7.0);
      obs.push_back({x, y, std::min(8.0, x + rng.uniform(0.3, 4.0)), std::min(8.0, y + rng.uniform(0.3, 4.0))});
    }
    const WorldMap map("acc-" + std::to_string(m), Rect{0, 0, 8, 8}, obs, {});
    const Vec2 a{rng.uniform(0.3, 7.7), rng.uniform(0.3, 7.7)};
    const Vec2 b{rng.uniform(0.3, 7.7), rng.uniform(0.3, 7.7)};
    const std::optional<double> oracle = bfs_length(map, a, b);
    std::optional<double> got;
    try {
      got = shortest_path(map, a, b).length;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNoPath) throw;
    }
    if (oracle) ++reachable;
    if (oracle.has_value() == got.has_value() && (!oracle || *oracle == *got)) ++agree;
  }
  return {agree == 50, std::to_string(agree) + "/50 maps exact (" + std::to_string(reachable) + " reachable)"};
}

// 6 --------------------------------------------------------------------------

EpisodeLog fixture_log(double final_distance, int collisions) {
  EpisodeLog log;
  log.goal = {0.0, 0.0};
  log.final_position = {0.0, final_distance};
  StepRecord s;
  for (int i = 0; i < collisions; ++i) s.collisions.push_back({i, 1});
  log.steps.push_back(s);
  return log;
}

Outcome metric_fixture() {
  const MetricsReport r = compute_metrics({fixture_log(1, 0), fixture_log(2, 2), fixture_log(5, 0)}, 3.0);
  const bool fixture = close(r.ne, 8.0 / 3.0) && close(r.sr, 1.0 / 3.0) && close(r.cr, 1.0 / 3.0) &&
                       close(r.tcr, 2.0 / 3.0);
  bool invariants = true;
  int benchmarks = 0;
  const Models models(0);
  for (Split split : {Split::kSeen, Split::kUnseen}) {
    for (ActionMode mode : {ActionMode::kExpert, ActionMode::kGreedy, ActionMode::kSample}) {
      AgentOptions o;
      o.mode = mode;
      o.max_decisions = 20;
      const MetricsReport m = compute_metrics(evaluate(models, generate_benchmark(10, split, 9), o, 4));
      invariants = invariants && m.sr + m.cr <= 1.0 + 1e-12 && m.tcr >= m.cr;
      ++benchmarks;
    }
  }
  return {fixture && invariants, "NE=" + fmt("%.6f", r.ne) + " SR=" + fmt("%.6f", r.sr) + " CR=" + fmt("%.6f", r.cr) +
                                     " TCR=" + fmt("%.6f", r.tcr) + "; invariants on " + std::to_string(benchmarks) +
                                     " evaluated benchmarks"};
}

// 7, 8 -----------------------------------------------------------------------

struct AblationOutcome {
  Outcome social;
  Outcome semantic;
};

AblationOutcome ablation() {
  AblationPlan plan;
  plan.base.iterations = 6000;
  plan.base.social.lambda_c = 0.3;
  plan.base.social.lambda_p = 0.3;
  plan.seeds = {0, 1, 2};
  plan.variants = {{"full", {}}, {"coll-off+prox-off", {"coll-off", "prox-off"}}, {"sem-off", {"sem-off"}}};
  const auto train_eps = generate_benchmark(200, Split::kSeen, 0);
  const auto eval_eps = generate_benchmark(200, Split::kUnseen, derive_seed(0, 0xe1));
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<AblationRow> rows = run_ablation(plan, train_eps, eval_eps);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  std::printf("%s", ablation_markdown(rows, plan.base.hash()).c_str());
  std::fflush(stdout);
  const MetricsReport& full = rows[0].median;
  const MetricsReport& social_off = rows[1].median;
  const MetricsReport& sem_off = rows[2].median;

  AblationOutcome out;
  const bool cr_lower = full.cr <= 0.8 * social_off.cr && full.cr < social_off.cr;
  out.social.pass = cr_lower && full.sr >= social_off.sr && minutes < 30.0;
  out.social.detail = "CR " + fmt("%.3f", full.cr) + " vs " + fmt("%.3f", social_off.cr) + " (<= 0.8x required), SR " +
                      fmt("%.3f", full.sr) + " vs " + fmt("%.3f", social_off.sr) + ", " + fmt("%.1f", minutes) +
                      " min";
  out.semantic.pass = full.cr <= sem_off.cr && full.sr >= sem_off.sr;
  out.semantic.detail = "CR " + fmt("%.3f", full.cr) + " vs " + fmt("%.3f", sem_off.cr) + ", SR " +
                        fmt("%.3f", full.sr) + " vs " + fmt("%.3f", sem_off.sr);
  return out;
}

// 9 --------------------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> artifacts(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), root).string(), read_file(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream sink;
  return dispatch(args, sink, sink);
}

Outcome determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path base = fs::temp_directory_path() / "hcsg_acceptance_determinism";
  fs::remove_all(base);
  const fs::path cfg = base / "config.json";
  fs::create_directories(base);
  write_file_atomic(cfg, R"({"iterations": 300})");
  for (const char* run : {"a", "b"}) {
    const std::string out = (base / run).string();
    if (cli({"gen", "--split", "unseen", "--n", "20", "--seed", "3", "--out", out + "/gen"}) != 0) return {false, "gen failed"};
    if (cli({"train", "--config", cfg.string(), "--n", "10", "--seed", "3", "--out", out + "/train"}) != 0) {
      return {false, "train failed"};
    }
  }
  // Evaluate each run's own checkpoint.
  for (const char* run : {"a", "b"}) {
    fs::path models;
    for (const auto& e : fs::recursive_directory_iterator(base / run / "train")) {
      if (e.path().filename().string().rfind("models-", 0) == 0) models = e.path();
    }
    if (cli({"eval", "--checkpoint", models.string(), "--config", cfg.string(), "--split", "unseen", "--n", "30",
             "--seed", "3", "--out", (base / run / "eval").string()}) != 0) {
      return {false, "eval failed"};
    }
  }
  const auto a = artifacts(base / "a");
  const auto b = artifacts(base / "b");
  const bool same = a == b && !a.empty();
  fs::remove_all(base);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {same && s < 300.0, std::to_string(a.size()) + " artifacts (benchmark, checkpoint, curves, logs, reports) " +
                    (same ? "byte-identical" : "differ")};
}

}  // namespace

// Optional arguments select criteria by number; default is all of them.
int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  std::vector<std::pair<int, Outcome>> results;
  auto record = [&](int id, const std::function<Outcome()>& f) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.detail += " [" + fmt("%.1f", s) + " s]";
    std::printf("criterion %d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    results.emplace_back(id, o);
  };
  record(1, formulas);
  record(2, gradients);
  record(3, backprojection);
  record(4, forecaster_learning);
  record(5, oracle_equivalence);
  record(6, metric_fixture);
  AblationOutcome ab;
  record(7, [&] {
    ab = ablation();
    return ab.social;
  });
  record(8, [&] { return ab.social.detail.empty() ? ablation().semantic : ab.semantic; });
  record(9, determinism);

  std::printf("\nsummary\n");
  bool all = true;
  for (const auto& [id, o] : results) {
    std::printf("criterion %d: %s\n", id, o.pass ? "PASS" : "FAIL");
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
