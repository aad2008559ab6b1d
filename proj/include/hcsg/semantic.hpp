#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hcsg/forecast.hpp"

namespace hcsg {

inline constexpr int kSemFeatureDim = 128;

enum class DescriptionSource { kRule, kRemote, kFallback };
std::string_view to_string(DescriptionSource source);

struct ActivityDescription {
  std::string text;
  DescriptionSource source = DescriptionSource::kRule;
};

enum class InterpreterKind { kRuleBased, kRemote };

struct InterpreterConfig {
  InterpreterKind kind = InterpreterKind::kRuleBased;
  std::string endpoint;  // http://host[:port]/path
  double timeout_s = 5.0;
  std::string prompt = default_prompt();
  double still_speed = 0.1;  // m/s
  double slow_speed = 0.8;   // m/s

  static std::string default_prompt();
  /// Remote kind with the endpoint from HCSG_INTERPRETER_URL when that is set;
  /// rule-based otherwise.
  static InterpreterConfig from_environment();
  /// Throws Error(kInvalidConfig) for a Remote config without a valid URL.
  void validate() const;
};

/// Mean speed over the window: net displacement over the elapsed time.
double track_speed(const TrackHistory& track);
std::string motion_clause(double speed, const InterpreterConfig& config);

/// "A person is {label}, {motion clause}."
std::string rule_based_description(const TrackHistory& track, const std::string& truth_label,
                                   const InterpreterConfig& config);

/// Never throws for remote failures: any transport, status or schema problem
/// yields the rule-based text tagged kFallback.
ActivityDescription interpret(const TrackHistory& track, const std::string& truth_label,
                              const InterpreterConfig& config);

/// Request body sent to the remote interpreter.
nlohmann::ordered_json remote_request(const TrackHistory& track, const std::string& prompt);

/// Lowercased alphanumeric runs.
std::vector<std::string> tokenize(const std::string& text);

/// Hashed bag of tokens (FNV-1a mod 128), L2-normalized; zero for no tokens.
Eigen::VectorXd encode_text(const std::string& text);

}  // namespace hcsg
