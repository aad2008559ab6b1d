#include "hcsg/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>
#include <thread>

namespace hcsg {

MetricsReport compute_metrics(const std::vector<EpisodeLog>& logs, double delta_th, const std::string& split,
                              const std::string& ablation) {
  if (logs.empty()) throw Error(ErrorKind::kEmptyInput, "no episode logs to score");
  MetricsReport r;
  r.episodes = logs.size();
  r.split = split;
  r.ablation = ablation;
  double ne = 0.0;
  std::size_t success = 0;
  std::size_t collided = 0;
  std::size_t events = 0;
  for (const EpisodeLog& log : logs) {
    const double d = log.final_distance();
    const std::size_t c = static_cast<std::size_t>(log.collision_count());
    ne += d;
    events += c;
    if (c > 0) ++collided;
    if (d < delta_th && c == 0) ++success;
  }
  const double n = static_cast<double>(logs.size());
  r.ne = ne / n;
  r.sr = static_cast<double>(success) / n;
  r.cr = static_cast<double>(collided) / n;
  r.tcr = static_cast<double>(events) / n;
  return r;
}

std::vector<EpisodeLog> evaluate(const Models& models, const std::vector<Episode>& episodes,
                                 const AgentOptions& options, std::uint64_t seed, int workers) {
  if (workers < 1) throw Error(ErrorKind::kInvalidConfig, "worker count must be positive");
  std::vector<EpisodeLog> logs(episodes.size());
  auto run = [&](std::size_t k) { logs[k] = navigate_episode(episodes[k], models, options, derive_seed(seed, episodes[k].seed)); };
  if (workers == 1 || episodes.size() < 2) {
    for (std::size_t k = 0; k < episodes.size(); ++k) run(k);
    return logs;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = static_cast<std::size_t>(w); k < episodes.size(); k += static_cast<std::size_t>(workers)) {
          run(k);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return logs;
}

AgentOptions eval_options(const TrainConfig& config) {
  AgentOptions o;
  o.mode = ActionMode::kGreedy;
  o.max_decisions = config.max_decisions;
  o.window_frames = config.window_frames;
  o.noise_sigma = config.noise_sigma;
  o.goal_threshold = config.goal_threshold;
  o.features = config.features;
  return o;
}

const std::vector<std::string>& ablation_toggles() {
  static const std::vector<std::string> kToggles = {"geo-off",  "sem-off",  "past-oriented", "coll-off",
                                                    "prox-off", "rgb-only", "depth-only"};
  return kToggles;
}

void apply_toggle(TrainConfig& config, const std::string& toggle) {
  if (toggle == "geo-off") config.features.geo = false;
  else if (toggle == "sem-off") config.features.sem = false;
  else if (toggle == "past-oriented") config.features.past_oriented = true;
  else if (toggle == "coll-off") config.social.lambda_c = 0.0;
  else if (toggle == "prox-off") config.social.lambda_p = 0.0;
  else if (toggle == "rgb-only") config.features.sensing.depth = false;
  else if (toggle == "depth-only") config.features.sensing.rgb = false;
  else throw Error(ErrorKind::kInvalidConfig, "unknown toggle '" + toggle + "'");
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::kEmptyInput, "median of nothing");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<AblationRow> run_ablation(const AblationPlan& plan, const std::vector<Episode>& train_episodes,
                                      const std::vector<Episode>& eval_episodes) {
  if (plan.seeds.empty()) throw Error(ErrorKind::kInvalidConfig, "ablation needs at least one seed");
  if (eval_episodes.empty()) throw Error(ErrorKind::kEmptyInput, "ablation needs evaluation episodes");
  std::vector<AblationVariant> variants = plan.variants;
  if (variants.empty()) variants.push_back({"full", {}});
  for (const AblationVariant& v : variants) {
    TrainConfig probe = plan.base;
    for (const std::string& t : v.toggles) apply_toggle(probe, t);
  }
  const std::string split = std::string(to_string(eval_episodes.front().split));

  std::vector<AblationRow> rows;
  for (const AblationVariant& v : variants) {
    AblationRow row;
    row.variant = v.name;
    std::vector<double> ne, sr, tcr, cr;
    for (std::uint64_t seed : plan.seeds) {
      TrainConfig config = plan.base;
      for (const std::string& t : v.toggles) apply_toggle(config, t);
      config.seed = seed;
      AblationRun run;
      run.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      const TrainResult trained = train(config, train_episodes, plan.interpreter);
      const auto t1 = std::chrono::steady_clock::now();
      AgentOptions options = eval_options(config);
      options.interpreter = plan.interpreter;
      const std::vector<EpisodeLog> logs =
          evaluate(trained.models, eval_episodes, options, derive_seed(seed, 0xe7a1), plan.workers);
      const auto t2 = std::chrono::steady_clock::now();
      run.train_seconds = std::chrono::duration<double>(t1 - t0).count();
      run.eval_seconds = std::chrono::duration<double>(t2 - t1).count();
      run.report = compute_metrics(logs, config.goal_threshold, split, v.name);
      run.logs_hash = logs_hash(logs);
      ne.push_back(run.report.ne);
      sr.push_back(run.report.sr);
      tcr.push_back(run.report.tcr);
      cr.push_back(run.report.cr);
      row.runs.push_back(std::move(run));
    }
    row.median.ne = median(ne);
    row.median.sr = median(sr);
    row.median.tcr = median(tcr);
    row.median.cr = median(cr);
    row.median.episodes = eval_episodes.size();
    row.median.split = split;
    row.median.ablation = v.name;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string logs_hash(const std::vector<EpisodeLog>& logs) {
  std::string all;
  for (const EpisodeLog& log : logs) all += log.content_hash();
  return hex64(fnv1a64(all));
}

std::string logs_jsonl(const std::vector<EpisodeLog>& logs) {
  std::string out;
  for (const EpisodeLog& log : logs) out += log.to_json().dump() + "\n";
  return out;
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void csv_row(std::ostringstream& out, const MetricsReport& r) {
  out << r.ablation << ',' << r.split << ',' << r.episodes << ',' << format_double(r.ne) << ',' << format_double(r.sr)
      << ',' << format_double(r.tcr) << ',' << format_double(r.cr) << '\n';
}

void md_row(std::ostringstream& out, const MetricsReport& r) {
  out << "| " << (r.ablation.empty() ? "-" : r.ablation) << " | " << r.split << " | " << r.episodes << " | "
      << fixed(r.ne) << " | " << fixed(r.sr) << " | " << fixed(r.tcr) << " | " << fixed(r.cr) << " |\n";
}

constexpr const char* kCsvHeader = "variant,split,episodes,NE,SR,TCR,CR\n";
constexpr const char* kMdHeader =
    "| variant | split | episodes | NE | SR | TCR | CR |\n|---|---|---|---|---|---|---|\n";

}  // namespace

std::string metrics_csv(const std::vector<MetricsReport>& reports, const std::string& config_hash) {
  std::ostringstream out;
  out << "# config_hash=" << config_hash << '\n' << kCsvHeader;
  for (const MetricsReport& r : reports) csv_row(out, r);
  return out.str();
}

std::string metrics_markdown(const std::vector<MetricsReport>& reports, const std::string& config_hash) {
  std::ostringstream out;
  out << "<!-- config_hash=" << config_hash << " -->\n\n" << kMdHeader;
  for (const MetricsReport& r : reports) md_row(out, r);
  return out.str();
}

std::string ablation_csv(const std::vector<AblationRow>& rows, const std::string& config_hash) {
  std::ostringstream out;
  out << "# config_hash=" << config_hash << '\n';
  out << "variant,seed,split,episodes,NE,SR,TCR,CR,logs_hash\n";
  for (const AblationRow& row : rows) {
    for (const AblationRun& run : row.runs) {
      const MetricsReport& r = run.report;
      out << row.variant << ',' << run.seed << ',' << r.split << ',' << r.episodes << ',' << format_double(r.ne) << ','
          << format_double(r.sr) << ',' << format_double(r.tcr) << ',' << format_double(r.cr) << ','
          << run.logs_hash << '\n';
    }
    const MetricsReport& m = row.median;
    out << row.variant << ",median," << m.split << ',' << m.episodes << ',' << format_double(m.ne) << ','
        << format_double(m.sr) << ',' << format_double(m.tcr) << ',' << format_double(m.cr) << ",\n";
  }
  return out.str();
}

std::string ablation_markdown(const std::vector<AblationRow>& rows, const std::string& config_hash) {
  std::ostringstream out;
  out << "<!-- config_hash=" << config_hash << " -->\n\nMedian over seeds.\n\n" << kMdHeader;
  for (const AblationRow& row : rows) md_row(out, row.median);
  return out.str();
}

}  // namespace hcsg
