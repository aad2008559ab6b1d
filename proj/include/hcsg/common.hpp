#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hcsg {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  bool operator==(const Vec2&) const = default;

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double squared_norm() const { return x * x + y * y; }
  double norm() const { return std::sqrt(squared_norm()); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Planar pose: position in meters, heading in radians (counter-clockwise from +x).
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Vec2 position() const { return {x, y}; }
  bool operator==(const Pose2&) const = default;
};

/// Wraps an angle into [-pi, pi].
double wrap_angle(double a);

/// Closest point on segment [a, b] to p.
Vec2 closest_point_on_segment(const Vec2& a, const Vec2& b, const Vec2& p);

// Agent-centric frame: x forward along the heading, y lateral positive to the
// agent's right (matches the camera's u axis).
Vec2 world_to_agent(const Pose2& agent, const Vec2& world);
Vec2 agent_to_world(const Pose2& agent, const Vec2& local);

enum class ErrorKind {
  kNoPath,
  kNonPositiveDepth,
  kTrackTooShort,
  kShapeMismatch,
  kDimensionMismatch,
  kNonFiniteGradient,
  kNonFiniteLoss,
  kExpertNotAvailable,
  kEmptyInput,
  kInvalidScenario,
  kInvalidConfig,
  kIo,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Seeded random stream. The engine is std::mt19937_64; the conversions to
/// uniform and Gaussian variates are spelled out here so that sequences are
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  double gaussian();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent stream seed (seed xor index, then mixed).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Writes via a sibling temp file and rename so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Shortest round-trip decimal rendering of a double.
std::string format_double(double value);

}  // namespace hcsg
