#include "hcsg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "hcsg/benchmark.hpp"
#include "hcsg/eval.hpp"
#include "hcsg/gradcheck.hpp"
#include "hcsg/render.hpp"
#include "hcsg/scenario_io.hpp"

namespace hcsg {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::string scenario;
  std::string checkpoint;
  std::string out = "runs";
  std::string split = "seen";
  std::string mode = "greedy";
  std::string episode;
  std::string interpreter_url;
  std::optional<std::uint64_t> seed;
  std::size_t n = 0;
  std::size_t train_n = 40;
  int runs = 3;
  int workers = 1;
  int iterations = -1;
  std::size_t probes = 24;
  std::vector<std::string> toggles;
};

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::kInvalidConfig, what); }

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) config_error(std::string(what) + " not found: " + path);
}

nlohmann::json parse_json_file(const std::string& path, const char* what) {
  require_file(path, what);
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    config_error(std::string(what) + " " + path + " is not valid JSON: " + e.what());
  }
}

std::uint64_t seed_or(const Flags& f, std::uint64_t fallback) { return f.seed.value_or(fallback); }

TrainConfig load_config(const Flags& f) {
  TrainConfig c;
  if (!f.config.empty()) c = TrainConfig::from_json(parse_json_file(f.config, "config file"));
  if (f.seed) c.seed = *f.seed;
  if (f.iterations >= 0) c.iterations = f.iterations;
  for (const std::string& t : f.toggles) {
    std::stringstream ss(t);
    for (std::string part; std::getline(ss, part, '+');) apply_toggle(c, part);
  }
  c.validate();
  return c;
}

InterpreterConfig interpreter_config(const Flags& f) {
  InterpreterConfig ic = InterpreterConfig::from_environment();
  if (!f.interpreter_url.empty()) {
    ic.kind = InterpreterKind::kRemote;
    ic.endpoint = f.interpreter_url;
  }
  ic.validate();
  return ic;
}

std::vector<Episode> episodes_for(const Flags& f, std::size_t default_n, std::uint64_t seed) {
  if (!f.scenario.empty()) {
    require_file(f.scenario, "scenario file");
    return load_benchmark(f.scenario);
  }
  return generate_benchmark(f.n > 0 ? f.n : default_n, parse_split(f.split), seed);
}

std::string digest(const nlohmann::ordered_json& j) { return hex64(fnv1a64(j.dump())); }

fs::path run_dir(const Flags& f, const std::string& hash) {
  const fs::path dir = fs::path(f.out) / hash;
  fs::create_directories(dir);
  return dir;
}

void write_artifact(std::ostream& out, const fs::path& path, const std::string& content) {
  write_file_atomic(path, content);
  out << "wrote " << path.string() << "\n";
}

int cmd_gen(const Flags& f, std::ostream& out) {
  const std::size_t n = f.n > 0 ? f.n : 100;
  const Split split = parse_split(f.split);
  const std::uint64_t seed = seed_or(f, 0);
  nlohmann::ordered_json key = {{"command", "gen"}, {"split", f.split}, {"n", n}, {"seed", seed}};
  const std::string hash = digest(key);
  const std::vector<Episode> episodes = generate_benchmark(n, split, seed);
  write_artifact(out, run_dir(f, hash) / ("benchmark-" + hash + ".json"), benchmark_to_json(episodes).dump(1) + "\n");
  return kExitOk;
}

int cmd_train(const Flags& f, std::ostream& out) {
  const TrainConfig config = load_config(f);
  const InterpreterConfig interp = interpreter_config(f);
  std::vector<Episode> episodes;
  if (f.scenario.empty()) {
    episodes = generate_benchmark(f.n > 0 ? f.n : f.train_n, Split::kSeen, config.seed);
  } else {
    episodes = episodes_for(f, 0, 0);
  }
  nlohmann::ordered_json key = {{"command", "train"}, {"config", config.to_json()},
                                {"benchmark", benchmark_hash(episodes)}};
  const std::string hash = digest(key);
  const fs::path dir = run_dir(f, hash);
  const TrainResult result = train(config, episodes, interp, [&](int it, const LossBreakdown& l) {
    if ((it + 1) % 100 == 0) out << "iteration " << it + 1 << " total " << l.total << "\n";
  });
  write_artifact(out, dir / ("config-" + hash + ".json"), config.to_json().dump(1) + "\n");
  write_artifact(out, dir / ("models-" + hash + ".json"), result.models.to_json().dump() + "\n");
  write_artifact(out, dir / ("curves-" + hash + ".csv"), curves_csv(result.curve, hash));
  return kExitOk;
}

Models load_models(const Flags& f) {
  const nlohmann::json j = parse_json_file(f.checkpoint, "checkpoint");
  // Layout donor only; every tensor is overwritten.
  Models m(0);
  try {
    m.load_json(j);
  } catch (const Error& e) {
    config_error("checkpoint " + f.checkpoint + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    config_error("checkpoint " + f.checkpoint + ": " + e.what());
  }
  return m;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  if (f.checkpoint.empty()) config_error("--checkpoint is required");
  const TrainConfig config = load_config(f);
  const Models models = load_models(f);
  AgentOptions options = eval_options(config);
  options.mode = parse_action_mode(f.mode);
  options.interpreter = interpreter_config(f);
  const std::uint64_t seed = seed_or(f, 0);
  const std::vector<Episode> episodes = episodes_for(f, 100, seed);
  nlohmann::ordered_json key = {{"command", "eval"},
                                {"config", config.to_json()},
                                {"mode", f.mode},
                                {"checkpoint", hex64(fnv1a64(read_file(f.checkpoint)))},
                                {"benchmark", benchmark_hash(episodes)},
                                {"seed", seed}};
  const std::string hash = digest(key);
  const fs::path dir = run_dir(f, hash);
  const std::vector<EpisodeLog> logs = evaluate(models, episodes, options, seed, f.workers);
  std::string tag;
  for (const std::string& t : f.toggles) tag += (tag.empty() ? "" : "+") + t;
  const MetricsReport report =
      compute_metrics(logs, config.goal_threshold, std::string(to_string(episodes.front().split)), tag.empty() ? "full" : tag);
  write_artifact(out, dir / ("logs-" + hash + ".jsonl"), logs_jsonl(logs));
  write_artifact(out, dir / ("metrics-" + hash + ".csv"), metrics_csv({report}, hash));
  write_artifact(out, dir / ("metrics-" + hash + ".md"), metrics_markdown({report}, hash));
  out << metrics_markdown({report}, hash);
  return kExitOk;
}

int cmd_ablate(const Flags& f, std::ostream& out) {
  Flags base_flags = f;
  base_flags.toggles.clear();
  AblationPlan plan;
  plan.base = load_config(base_flags);
  plan.workers = f.workers;
  plan.interpreter = interpreter_config(f);
  if (f.runs < 1) config_error("--runs must be positive");
  const std::uint64_t seed = seed_or(f, plan.base.seed);
  for (int i = 0; i < f.runs; ++i) plan.seeds.push_back(seed + static_cast<std::uint64_t>(i));
  plan.variants.push_back({"full", {}});
  for (const std::string& t : f.toggles) {
    AblationVariant v{t, {}};
    std::stringstream ss(t);
    for (std::string part; std::getline(ss, part, '+');) v.toggles.push_back(part);
    plan.variants.push_back(std::move(v));
  }
  const std::vector<Episode> train_episodes = generate_benchmark(f.train_n, Split::kSeen, seed);
  const std::vector<Episode> eval_episodes = episodes_for(f, 200, derive_seed(seed, 0xe1));
  nlohmann::ordered_json variants = nlohmann::ordered_json::array();
  for (const auto& v : plan.variants) variants.push_back(v.name);
  nlohmann::ordered_json key = {{"command", "ablate"},      {"config", plan.base.to_json()},
                                {"variants", variants},     {"seeds", plan.seeds},
                                {"train", benchmark_hash(train_episodes)},
                                {"eval", benchmark_hash(eval_episodes)}};
  const std::string hash = digest(key);
  const fs::path dir = run_dir(f, hash);
  const std::vector<AblationRow> rows = run_ablation(plan, train_episodes, eval_episodes);
  write_artifact(out, dir / ("ablation-" + hash + ".csv"), ablation_csv(rows, hash));
  write_artifact(out, dir / ("ablation-" + hash + ".md"), ablation_markdown(rows, hash));
  out << ablation_markdown(rows, hash);
  return kExitOk;
}

int cmd_gradcheck(const Flags& f, std::ostream& out) {
  const auto reports = gradient_suite(seed_or(f, 0), f.probes);
  bool ok = true;
  for (const GradientReport& r : reports) {
    out << std::left << std::setw(22) << r.path << " max_rel_err " << std::scientific << std::setprecision(3)
        << r.result.max_relative_error << " probes " << r.result.probes << "\n";
    ok = ok && r.result.max_relative_error < 1e-4;
  }
  out << (ok ? "all gradients match\n" : "gradient mismatch\n");
  return ok ? kExitOk : kExitRuntime;
}

int cmd_replay(const Flags& f, std::ostream& out) {
  const TrainConfig config = load_config(f);
  const std::uint64_t seed = seed_or(f, 0);
  Models models(config.seed, config.alpha);
  AgentOptions options = eval_options(config);
  options.mode = parse_action_mode(f.mode);
  options.interpreter = interpreter_config(f);
  std::string model_key = "untrained";
  if (!f.checkpoint.empty()) {
    models = load_models(f);
    model_key = hex64(fnv1a64(read_file(f.checkpoint)));
  }
  const std::vector<Episode> episodes = episodes_for(f, 5, seed);
  nlohmann::ordered_json key = {{"command", "replay"}, {"config", config.to_json()}, {"mode", f.mode},
                                {"models", model_key},  {"benchmark", benchmark_hash(episodes)},
                                {"seed", seed},         {"episode", f.episode}};
  const std::string hash = digest(key);
  const fs::path dir = run_dir(f, hash);
  bool any = false;
  for (const Episode& e : episodes) {
    if (!f.episode.empty() && e.id != f.episode) continue;
    any = true;
    EpisodeRunner runner(e, models, options, derive_seed(seed, e.seed));
    while (!runner.finished()) {
      Decision& d = runner.prepare();
      runner.act(runner.choose(d));
    }
    const nlohmann::ordered_json graph = runner.graph().snapshot();
    const EpisodeLog log = runner.take_log();
    write_artifact(out, dir / (e.id + "-" + hash + ".svg"), render_episode_svg(e, log));
    write_artifact(out, dir / (e.id + "-" + hash + ".json"), log.to_json().dump(1) + "\n");
    write_artifact(out, dir / (e.id + "-graph-" + hash + ".json"), graph.dump(1) + "\n");
  }
  if (!any) config_error("no episode with id '" + f.episode + "'");
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Human-aware topological navigation toolkit", "hcsg"};
  app.require_subcommand(1);
  Flags f;

  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", f.seed, "Random seed (nonnegative)"); };
  auto add_out = [&](CLI::App* sub) { sub->add_option("--out", f.out, "Output directory")->capture_default_str(); };
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "Training configuration JSON");
    sub->add_option("--toggle", f.toggles, "Ablation toggle (repeatable; join with '+')")
        ->check(CLI::Validator(
            [](std::string& s) {
              const auto& known = ablation_toggles();
              std::stringstream ss(s);
              for (std::string part; std::getline(ss, part, '+');) {
                if (std::find(known.begin(), known.end(), part) == known.end()) return "unknown toggle '" + part + "'";
              }
              return std::string();
            },
            "TOGGLE[+TOGGLE]"));
  };
  auto add_episodes = [&](CLI::App* sub) {
    sub->add_option("--scenario", f.scenario, "Benchmark JSON (generated from --split/--n/--seed when absent)");
    sub->add_option("--split", f.split, "seen | unseen")->check(CLI::IsMember({"seen", "unseen"}))->capture_default_str();
    sub->add_option("--n", f.n, "Number of episodes to generate");
  };
  auto add_interpreter = [&](CLI::App* sub) {
    sub->add_option("--interpreter-url", f.interpreter_url, "Remote interpreter endpoint (else HCSG_INTERPRETER_URL)");
  };

  CLI::App* gen = app.add_subcommand("gen", "Generate a benchmark file");
  gen->add_option("--split", f.split, "seen | unseen")->check(CLI::IsMember({"seen", "unseen"}))->capture_default_str();
  gen->add_option("--n", f.n, "Number of episodes (default 100)");
  add_seed(gen);
  add_out(gen);

  CLI::App* tr = app.add_subcommand("train", "Train forecasters and the planner");
  add_config(tr);
  add_seed(tr);
  tr->add_option("--scenario", f.scenario, "Training benchmark JSON (seen split generated when absent)");
  tr->add_option("--n", f.n, "Generated training episodes (default 40)");
  tr->add_option("--iterations", f.iterations, "Override the iteration count");
  add_interpreter(tr);
  add_out(tr);

  CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", f.checkpoint, "Model checkpoint JSON")->required();
  add_config(ev);
  add_seed(ev);
  add_episodes(ev);
  ev->add_option("--mode", f.mode, "greedy | sample | expert")->check(CLI::IsMember({"greedy", "sample", "expert"}));
  ev->add_option("--workers", f.workers, "Parallel episode workers")->check(CLI::PositiveNumber);
  add_interpreter(ev);
  add_out(ev);

  CLI::App* ab = app.add_subcommand("ablate", "Train and evaluate ablation variants over matched seeds");
  add_config(ab);
  add_seed(ab);
  add_episodes(ab);
  ab->get_option("--split")->default_str("unseen");
  ab->add_option("--runs", f.runs, "Seeds per variant (seed, seed+1, ...)")->capture_default_str();
  ab->add_option("--train-n", f.train_n, "Generated training episodes")->capture_default_str();
  ab->add_option("--workers", f.workers, "Parallel episode workers")->check(CLI::PositiveNumber);
  add_interpreter(ab);
  add_out(ab);

  CLI::App* gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  add_seed(gc);
  gc->add_option("--probes", f.probes, "Probes per path")->capture_default_str();

  CLI::App* rp = app.add_subcommand("replay", "Render episodes to SVG with their logs");
  add_config(rp);
  add_seed(rp);
  add_episodes(rp);
  rp->add_option("--checkpoint", f.checkpoint, "Model checkpoint JSON (untrained models when absent)");
  rp->add_option("--episode", f.episode, "Only this episode id");
  rp->add_option("--mode", f.mode, "greedy | sample | expert")->check(CLI::IsMember({"greedy", "sample", "expert"}));
  add_interpreter(rp);
  add_out(rp);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    err << "run with --help for usage\n";
    return kExitConfig;
  }

  try {
    if (ab->parsed() && f.scenario.empty() && !ab->count("--split")) f.split = "unseen";
    if (gen->parsed()) return cmd_gen(f, out);
    if (tr->parsed()) return cmd_train(f, out);
    if (ev->parsed()) return cmd_eval(f, out);
    if (ab->parsed()) return cmd_ablate(f, out);
    if (gc->parsed()) return cmd_gradcheck(f, out);
    if (rp->parsed()) return cmd_replay(f, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    const bool config = e.kind() == ErrorKind::kInvalidConfig || e.kind() == ErrorKind::kInvalidScenario;
    return config ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace hcsg
