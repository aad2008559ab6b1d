#include "hcsg/semantic.hpp"

#include <cctype>
#include <cstdlib>
#include <regex>
#include <semaphore>

#include <httplib.h>

namespace hcsg {

std::string_view to_string(DescriptionSource source) {
  switch (source) {
    case DescriptionSource::kRule: return "rule";
    case DescriptionSource::kRemote: return "remote";
    case DescriptionSource::kFallback: return "fallback";
  }
  return "rule";
}

std::string InterpreterConfig::default_prompt() {
  return "Describe in one sentence what this person is doing and whether they are moving, "
         "so that a robot passing by can keep a comfortable distance.";
}

InterpreterConfig InterpreterConfig::from_environment() {
  InterpreterConfig config;
  if (const char* url = std::getenv("HCSG_INTERPRETER_URL"); url != nullptr && *url != '\0') {
    config.kind = InterpreterKind::kRemote;
    config.endpoint = url;
  }
  return config;
}

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

bool parse_url(const std::string& url, ParsedUrl& out) {
  static const std::regex kPattern(R"(^(http://[A-Za-z0-9.\-]+(:[0-9]{1,5})?)(/[^\s]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kPattern)) return false;
  out.origin = m[1].str();
  out.path = m[3].matched ? m[3].str() : "/";
  return true;
}

// Caps concurrent remote requests per process.
std::counting_semaphore<4>& remote_slots() {
  static std::counting_semaphore<4> slots(4);
  return slots;
}

}  // namespace

void InterpreterConfig::validate() const {
  if (kind != InterpreterKind::kRemote) return;
  ParsedUrl parsed;
  if (!parse_url(endpoint, parsed)) throw Error(ErrorKind::kInvalidConfig, "invalid interpreter URL '" + endpoint + "'");
  if (!(timeout_s > 0.0)) throw Error(ErrorKind::kInvalidConfig, "interpreter timeout must be positive");
}

double track_speed(const TrackHistory& track) {
  if (track.positions.size() < 2) return 0.0;
  const double elapsed = static_cast<double>(track.positions.size() - 1) * track.dt;
  return distance(track.positions.front(), track.positions.back()) / elapsed;
}

std::string motion_clause(double speed, const InterpreterConfig& config) {
  if (speed < config.still_speed) return "standing still";
  if (speed < config.slow_speed) return "walking slowly";
  return "walking quickly";
}

std::string rule_based_description(const TrackHistory& track, const std::string& truth_label,
                                   const InterpreterConfig& config) {
  return "A person is " + truth_label + ", " + motion_clause(track_speed(track), config) + ".";
}

nlohmann::ordered_json remote_request(const TrackHistory& track, const std::string& prompt) {
  nlohmann::ordered_json frames = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < track.positions.size(); ++i) {
    nlohmann::ordered_json f;
    f["x"] = track.positions[i].x;
    f["y"] = track.positions[i].y;
    f["keypoints"] = std::vector<double>(track.keypoints[i].begin(), track.keypoints[i].end());
    f["t"] = static_cast<double>(i) * track.dt;
    frames.push_back(std::move(f));
  }
  nlohmann::ordered_json j;
  j["track"] = std::move(frames);
  j["prompt"] = prompt;
  return j;
}

ActivityDescription interpret(const TrackHistory& track, const std::string& truth_label,
                              const InterpreterConfig& config) {
  const std::string rule = rule_based_description(track, truth_label, config);
  if (config.kind == InterpreterKind::kRuleBased) return {rule, DescriptionSource::kRule};

  ParsedUrl parsed;
  if (!parse_url(config.endpoint, parsed)) return {rule, DescriptionSource::kFallback};
  try {
    remote_slots().acquire();
    struct Release {
      ~Release() { remote_slots().release(); }
    } release;
    httplib::Client client(parsed.origin);
    const auto timeout = std::chrono::duration<double>(config.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    auto res = client.Post(parsed.path, remote_request(track, config.prompt).dump(), "application/json");
    if (!res || res->status != 200) return {rule, DescriptionSource::kFallback};
    const auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("description") ||
        !body["description"].is_string()) {
      return {rule, DescriptionSource::kFallback};
    }
    std::string text = body["description"].get<std::string>();
    if (text.empty()) return {rule, DescriptionSource::kFallback};
    return {std::move(text), DescriptionSource::kRemote};
  } catch (const std::exception&) {
    return {rule, DescriptionSource::kFallback};
  }
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Eigen::VectorXd encode_text(const std::string& text) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(kSemFeatureDim);
  for (const std::string& tok : tokenize(text)) v[static_cast<Eigen::Index>(fnv1a64(tok) % kSemFeatureDim)] += 1.0;
  // Sum of squares in index order keeps the norm bit-stable.
  double sq = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) sq += v[i] * v[i];
  if (sq > 0.0) v /= std::sqrt(sq);
  return v;
}

}  // namespace hcsg
