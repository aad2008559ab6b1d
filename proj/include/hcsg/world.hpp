#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hcsg/common.hpp"

namespace hcsg {

inline constexpr double kGridResolution = 0.1;
inline constexpr double kDefaultDt = 0.25;
inline constexpr double kAgentSpeed = 1.0;
inline constexpr double kAgentRadius = 0.2;
inline constexpr double kCollisionRadius = 0.5;
inline constexpr double kStrideLength = 0.7;
inline constexpr double kCandidateClearance = 0.3;
inline constexpr int kNumBearings = 12;
inline constexpr std::array<double, 4> kCandidateRadii = {0.75, 1.5, 2.25, 3.0};
inline constexpr int kNumJoints = 17;

struct Rect {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool contains(const Vec2& p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  bool contains(const Rect& r) const {
    return r.min_x >= min_x && r.max_x <= max_x && r.min_y >= min_y && r.max_y <= max_y;
  }
  bool operator==(const Rect&) const = default;
};

/// Fixed object vocabulary; the index is the histogram slot used by perception.
const std::vector<std::string>& object_classes();
std::optional<int> object_class_index(const std::string& label);

struct MapObject {
  std::string id;
  std::string label;
  Vec2 position;
};

struct GridCell {
  int col = 0;
  int row = 0;
  bool operator==(const GridCell&) const = default;
};

/// Static 2D environment: bounds, rectangular obstacles rasterized to a 0.1 m
/// occupancy grid, and labeled point objects. A cell is occupied iff its
/// center lies inside some obstacle. Everything outside the bounds counts as
/// occupied.
class WorldMap {
 public:
  WorldMap(std::string id, Rect bounds, std::vector<Rect> obstacles, std::vector<MapObject> objects);

  const std::string& id() const { return id_; }
  const Rect& bounds() const { return bounds_; }
  const std::vector<Rect>& obstacles() const { return obstacles_; }
  const std::vector<MapObject>& objects() const { return objects_; }

  int cols() const { return cols_; }
  int rows() const { return rows_; }
  bool in_grid(const GridCell& c) const { return c.col >= 0 && c.row >= 0 && c.col < cols_ && c.row < rows_; }
  GridCell cell_of(const Vec2& p) const;
  Vec2 cell_center(const GridCell& c) const;
  bool occupied(const GridCell& c) const;
  bool occupied_at(const Vec2& p) const { return occupied(cell_of(p)); }
  bool free_at(const Vec2& p) const { return bounds_.contains(p) && !occupied_at(p); }
  /// Blocked for an agent of kAgentRadius: occupied, or an occupied cell center within the radius.
  bool inflated_blocked(const GridCell& c) const;

  /// True when the point is free and no occupied cell center lies closer than `radius`.
  bool has_clearance(const Vec2& p, double radius) const;

  /// Stable digest of the geometry; used to compare layouts.
  std::uint64_t layout_hash() const;

 private:
  std::size_t index(const GridCell& c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c.col);
  }

  std::string id_;
  Rect bounds_;
  std::vector<Rect> obstacles_;
  std::vector<MapObject> objects_;
  int cols_ = 0;
  int rows_ = 0;
  std::vector<std::uint8_t> occupancy_;
  std::vector<std::uint8_t> inflated_;
};

// ---------------------------------------------------------------------------
// Pedestrians

struct StandScript {
  Vec2 position;
  double heading = 0.0;
};

/// Walks back and forth between two endpoints.
struct PaceScript {
  Vec2 a;
  Vec2 b;
  double speed = 1.0;
};

/// Follows a polyline; loops back to the first vertex when `loop`, otherwise
/// reverses at the ends.
struct WalkPathScript {
  std::vector<Vec2> polyline;
  double speed = 1.0;
  bool loop = false;
};

/// Stands on a ring around `center`, facing it.
struct GroupDiscussScript {
  Vec2 center;
  double radius = 0.8;
  int member_index = 0;
  int group_size = 3;
};

using PedestrianMotion = std::variant<StandScript, PaceScript, WalkPathScript, GroupDiscussScript>;

struct PedestrianScript {
  PedestrianMotion motion;
  std::string activity_label;
};

struct PedestrianState {
  Vec2 position;
  double heading = 0.0;
  double gait_phase = 0.0;
  bool operator==(const PedestrianState&) const = default;
};

/// Pure function of (script, t, dt).
PedestrianState pedestrian_state_at(const PedestrianScript& script, std::int64_t t, double dt);

struct Keypoint {
  Vec2 position;
  double visibility = 1.0;
};

using Skeleton = std::array<Keypoint, kNumJoints>;

/// COCO-ordered 17-joint skeleton in world coordinates.
Skeleton skeleton_at(const PedestrianState& state, double body_scale);
/// Height above the floor of joint `joint` for a body of the given scale.
double joint_height(int joint, double body_scale);
/// Height of the detection box center.
inline double body_center_height(double body_scale) { return 0.9 * body_scale; }

// ---------------------------------------------------------------------------
// Episodes

struct Instruction {
  std::string template_id;
  std::map<std::string, std::string> slots;
  std::string text;
};

struct Pedestrian {
  int id = 0;
  PedestrianScript script;
  double body_scale = 1.0;
};

enum class Split { kSeen, kUnseen };
std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct Episode {
  std::string id;
  std::shared_ptr<const WorldMap> map;
  Pose2 start;
  Vec2 goal;
  Instruction instruction;
  std::vector<Pedestrian> pedestrians;
  Split split = Split::kSeen;
  std::uint64_t seed = 0;
};

/// Templates referencing the pedestrian slots "person" and "person2" and the
/// object slot "goal".
std::string render_instruction(const std::string& template_id,
                               const std::map<std::string, std::string>& slots,
                               const std::vector<Pedestrian>& pedestrians);
std::vector<std::string> instruction_templates();
std::vector<std::string> referenced_pedestrian_slots(const std::string& template_id);

/// Throws Error(kInvalidScenario) when an invariant of the episode does not hold.
void validate_episode(const Episode& episode);

struct SimState {
  std::int64_t t = 0;
  double dt = kDefaultDt;
  Pose2 agent;
  std::vector<PedestrianState> pedestrians;
  bool operator==(const SimState&) const = default;
};

struct CollisionEvent {
  std::int64_t step = 0;
  int pedestrian_id = 0;
  bool operator==(const CollisionEvent&) const = default;
};

struct StepOutcome {
  SimState state;
  std::vector<CollisionEvent> collisions;
};

SimState initial_state(const Episode& episode, double dt = kDefaultDt);

/// Advances the world by `steps` with the agent frozen in place.
StepOutcome hold_agent(const Episode& episode, const SimState& state, int steps);

/// Moves the agent straight to `target` at kAgentSpeed, one dt sub-step at a
/// time. A collision event is emitted for each sub-step at which the agent
/// enters contact (center distance < kCollisionRadius) with a pedestrian it
/// was not touching at the previous sub-step. Motion is never blocked.
StepOutcome step_agent(const Episode& episode, const SimState& state, const Vec2& target);

// ---------------------------------------------------------------------------
// Geometry queries

/// True iff the segment crosses no occupied cell (0.05 m ray march).
bool line_of_sight(const WorldMap& map, const Vec2& a, const Vec2& b);

struct PathResult {
  std::vector<Vec2> path;
  double length = 0.0;
  int straight_moves = 0;
  int diagonal_moves = 0;
};

/// 8-connected Dijkstra over the agent-radius inflated grid, no corner cutting.
/// Throws Error(kNoPath) when the goal cannot be reached.
PathResult shortest_path(const WorldMap& map, const Vec2& start, const Vec2& goal);

/// Grid length of a move sequence.
inline double grid_path_length(int straight, int diagonal) {
  return kGridResolution * (static_cast<double>(straight) + static_cast<double>(diagonal) * std::sqrt(2.0));
}

/// Geodesic distance-to-goal over the inflated grid.
class DistanceField {
 public:
  DistanceField(std::shared_ptr<const WorldMap> map, const Vec2& goal);

  /// Distance from p to the goal; +inf when unreachable. Points in blocked
  /// cells snap to the nearest reachable cell within 0.5 m.
  double at(const Vec2& p) const;

 private:
  std::shared_ptr<const WorldMap> map_;
  std::vector<double> dist_;
};

struct WaypointCandidate {
  Vec2 position;
  int bearing_index = 0;
  double radius = 0.0;
};

/// For each of 12 bearings (30 deg apart, relative to the heading) the farthest
/// radius in {0.75, 1.5, 2.25, 3.0} m reached before the ray first fails the
/// clearance or line-of-sight test.
std::vector<WaypointCandidate> waypoint_candidates(const WorldMap& map, const Pose2& agent);

}  // namespace hcsg
