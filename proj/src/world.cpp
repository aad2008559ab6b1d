#include "hcsg/world.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <sstream>

namespace hcsg {

namespace {

constexpr double kEps = 1e-9;

int grid_extent(double lo, double hi) {
  return static_cast<int>(std::ceil((hi - lo) / kGridResolution - 1e-9));
}

bool point_in_any(const std::vector<Rect>& rects, const Vec2& p) {
  for (const Rect& r : rects) {
    if (r.contains(p)) return true;
  }
  return false;
}

}  // namespace

const std::vector<std::string>& object_classes() {
  static const std::vector<std::string> kClasses = {
      "sofa",     "chair",   "table",      "bed",       "plant",    "tv",
      "sink",     "fridge",  "bookshelf",  "desk",      "lamp",     "cabinet",
      "toilet",   "bathtub", "oven",       "washer",    "wardrobe", "piano",
      "painting", "mirror",  "door",       "stairs",    "counter",  "fireplace",
      "vase",     "clock",   "printer",    "whiteboard", "bench",   "rug",
  };
  return kClasses;
}

std::optional<int> object_class_index(const std::string& label) {
  const auto& classes = object_classes();
  auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) return std::nullopt;
  return static_cast<int>(it - classes.begin());
}

// ---------------------------------------------------------------------------
// WorldMap

WorldMap::WorldMap(std::string id, Rect bounds, std::vector<Rect> obstacles, std::vector<MapObject> objects)
    : id_(std::move(id)), bounds_(bounds), obstacles_(std::move(obstacles)), objects_(std::move(objects)) {
  if (!(bounds_.max_x > bounds_.min_x && bounds_.max_y > bounds_.min_y)) {
    throw Error(ErrorKind::kInvalidScenario, "map " + id_ + ": empty bounds");
  }
  for (const Rect& r : obstacles_) {
    if (!(r.max_x > r.min_x && r.max_y > r.min_y) || !bounds_.contains(r)) {
      throw Error(ErrorKind::kInvalidScenario, "map " + id_ + ": obstacle outside bounds or degenerate");
    }
  }
  cols_ = grid_extent(bounds_.min_x, bounds_.max_x);
  rows_ = grid_extent(bounds_.min_y, bounds_.max_y);
  occupancy_.assign(static_cast<std::size_t>(cols_) * static_cast<std::size_t>(rows_), 0);
  for (int row = 0; row < rows_; ++row) {
    for (int col = 0; col < cols_; ++col) {
      const GridCell c{col, row};
      occupancy_[index(c)] = point_in_any(obstacles_, cell_center(c)) ? 1 : 0;
    }
  }

  // Inflation by the agent radius; out-of-grid cells count as occupied.
  const int reach = static_cast<int>(std::ceil(kAgentRadius / kGridResolution));
  inflated_.assign(occupancy_.size(), 0);
  for (int row = 0; row < rows_; ++row) {
    for (int col = 0; col < cols_; ++col) {
      bool blocked = false;
      for (int dr = -reach; dr <= reach && !blocked; ++dr) {
        for (int dc = -reach; dc <= reach && !blocked; ++dc) {
          const double d = kGridResolution * std::sqrt(static_cast<double>(dr * dr + dc * dc));
          if (d > kAgentRadius + kEps) continue;
          blocked = occupied(GridCell{col + dc, row + dr});
        }
      }
      inflated_[index(GridCell{col, row})] = blocked ? 1 : 0;
    }
  }

  for (const MapObject& obj : objects_) {
    if (!object_class_index(obj.label)) {
      throw Error(ErrorKind::kInvalidScenario, "map " + id_ + ": unknown object class '" + obj.label + "'");
    }
    if (!free_at(obj.position)) {
      throw Error(ErrorKind::kInvalidScenario, "map " + id_ + ": object " + obj.id + " not in free space");
    }
  }
}

GridCell WorldMap::cell_of(const Vec2& p) const {
  return GridCell{static_cast<int>(std::floor((p.x - bounds_.min_x) / kGridResolution)),
                  static_cast<int>(std::floor((p.y - bounds_.min_y) / kGridResolution))};
}

Vec2 WorldMap::cell_center(const GridCell& c) const {
  return {bounds_.min_x + (c.col + 0.5) * kGridResolution, bounds_.min_y + (c.row + 0.5) * kGridResolution};
}

bool WorldMap::occupied(const GridCell& c) const {
  if (!in_grid(c)) return true;
  return occupancy_[index(c)] != 0;
}

bool WorldMap::inflated_blocked(const GridCell& c) const {
  if (!in_grid(c)) return true;
  return inflated_[index(c)] != 0;
}

bool WorldMap::has_clearance(const Vec2& p, double radius) const {
  if (!free_at(p)) return false;
  const GridCell center = cell_of(p);
  const int reach = static_cast<int>(std::ceil(radius / kGridResolution)) + 1;
  for (int dr = -reach; dr <= reach; ++dr) {
    for (int dc = -reach; dc <= reach; ++dc) {
      const GridCell c{center.col + dc, center.row + dr};
      if (!occupied(c)) continue;
      if (distance(cell_center(c), p) < radius - 1e-6) return false;
    }
  }
  return true;
}

std::uint64_t WorldMap::layout_hash() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << bounds_.min_x << ',' << bounds_.min_y << ',' << bounds_.max_x << ',' << bounds_.max_y << ';';
  for (const Rect& r : obstacles_) ss << r.min_x << ',' << r.min_y << ',' << r.max_x << ',' << r.max_y << ';';
  return fnv1a64(ss.str());
}

// ---------------------------------------------------------------------------
// Pedestrians

namespace {

// Position/heading along a polyline of total length `total` at arc length s in [0, total].
PedestrianState along_polyline(const std::vector<Vec2>& pts, double s, bool reverse) {
  PedestrianState st;
  double remaining = s;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 seg = pts[i + 1] - pts[i];
    const double len = seg.norm();
    if (len <= 0.0) continue;
    if (remaining <= len || i + 2 == pts.size()) {
      const double r = std::min(remaining, len);
      st.position = pts[i] + seg * (r / len);
      const Vec2 dir = reverse ? seg * -1.0 : seg;
      st.heading = std::atan2(dir.y, dir.x);
      return st;
    }
    remaining -= len;
  }
  st.position = pts.back();
  return st;
}

double polyline_length(const std::vector<Vec2>& pts) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) total += distance(pts[i], pts[i + 1]);
  return total;
}

// Reduces t modulo the period when the period is a whole number of steps, so
// that states repeat exactly.
std::int64_t reduce_step(std::int64_t t, double period_distance, double speed, double dt) {
  const double period_steps = period_distance / (speed * dt);
  const double rounded = std::round(period_steps);
  if (rounded >= 1.0 && std::abs(period_steps - rounded) < 1e-9) {
    return t % static_cast<std::int64_t>(rounded);
  }
  return t;
}

// Back-and-forth traversal of a polyline with length L; s >= 0.
PedestrianState ping_pong(const std::vector<Vec2>& pts, double length, double s) {
  if (length <= 0.0) return along_polyline(pts, 0.0, false);
  // Endpoints belong to the leg that just finished; the start point is the end
  // of the previous period's return leg, so t = 0 and t = period agree.
  if (s <= 0.0) s = 2.0 * length;
  const double legs = std::ceil(s / length) - 1.0;
  const double r = s - legs * length;
  const bool backward = std::fmod(legs, 2.0) != 0.0;
  if (!backward) return along_polyline(pts, r, false);
  std::vector<Vec2> rev(pts.rbegin(), pts.rend());
  return along_polyline(rev, r, false);
}

}  // namespace

PedestrianState pedestrian_state_at(const PedestrianScript& script, std::int64_t t, double dt) {
  return std::visit(
      [&](const auto& m) -> PedestrianState {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, StandScript>) {
          return PedestrianState{m.position, m.heading, 0.0};
        } else if constexpr (std::is_same_v<T, PaceScript>) {
          const double length = distance(m.a, m.b);
          const std::int64_t tr = reduce_step(t, 2.0 * length, m.speed, dt);
          const double s = m.speed * static_cast<double>(tr) * dt;
          PedestrianState st = ping_pong({m.a, m.b}, length, s);
          st.gait_phase = std::fmod(s / kStrideLength, 1.0);
          return st;
        } else if constexpr (std::is_same_v<T, WalkPathScript>) {
          std::vector<Vec2> pts = m.polyline;
          if (m.loop) pts.push_back(pts.front());
          const double length = polyline_length(pts);
          const double period = m.loop ? length : 2.0 * length;
          const std::int64_t tr = reduce_step(t, period, m.speed, dt);
          const double s = m.speed * static_cast<double>(tr) * dt;
          PedestrianState st;
          if (m.loop) {
            st = along_polyline(pts, length > 0.0 ? std::fmod(s, length) : 0.0, false);
          } else {
            st = ping_pong(pts, length, s);
          }
          st.gait_phase = std::fmod(s / kStrideLength, 1.0);
          return st;
        } else {
          const double angle = 2.0 * kPi * m.member_index / std::max(1, m.group_size);
          const Vec2 pos = m.center + Vec2{std::cos(angle), std::sin(angle)} * m.radius;
          return PedestrianState{pos, wrap_angle(angle + kPi), 0.0};
        }
      },
      script.motion);
}

namespace {

struct JointTemplate {
  double forward;
  double left;
  double height;
  double swing;  // forward displacement amplitude; sign encodes side/limb phase
};

// COCO order. Left leg and right arm swing in phase; their partners anti-phase.
constexpr std::array<JointTemplate, kNumJoints> kTemplate = {{
    {0.10, 0.00, 1.60, 0.0},    // nose
    {0.08, 0.03, 1.64, 0.0},    // left eye
    {0.08, -0.03, 1.64, 0.0},   // right eye
    {0.00, 0.07, 1.62, 0.0},    // left ear
    {0.00, -0.07, 1.62, 0.0},   // right ear
    {0.00, 0.20, 1.45, 0.0},    // left shoulder
    {0.00, -0.20, 1.45, 0.0},   // right shoulder
    {0.00, 0.24, 1.15, -0.08},  // left elbow
    {0.00, -0.24, 1.15, 0.08},  // right elbow
    {0.05, 0.26, 0.90, -0.18},  // left wrist
    {0.05, -0.26, 0.90, 0.18},  // right wrist
    {0.00, 0.12, 0.95, 0.0},    // left hip
    {0.00, -0.12, 0.95, 0.0},   // right hip
    {0.00, 0.12, 0.50, 0.15},   // left knee
    {0.00, -0.12, 0.50, -0.15}, // right knee
    {0.00, 0.12, 0.08, 0.30},   // left ankle
    {0.00, -0.12, 0.08, -0.30}, // right ankle
}};

}  // namespace

Skeleton skeleton_at(const PedestrianState& state, double body_scale) {
  const double swing = std::sin(2.0 * kPi * state.gait_phase);
  const double c = std::cos(state.heading);
  const double s = std::sin(state.heading);
  Skeleton out;
  for (int j = 0; j < kNumJoints; ++j) {
    const JointTemplate& jt = kTemplate[static_cast<std::size_t>(j)];
    const double f = (jt.forward + jt.swing * swing) * body_scale;
    const double l = jt.left * body_scale;
    out[static_cast<std::size_t>(j)].position = {state.position.x + f * c - l * s, state.position.y + f * s + l * c};
    out[static_cast<std::size_t>(j)].visibility = 1.0;
  }
  return out;
}

double joint_height(int joint, double body_scale) {
  return kTemplate.at(static_cast<std::size_t>(joint)).height * body_scale;
}

// ---------------------------------------------------------------------------
// Episodes and instructions

std::string_view to_string(Split split) { return split == Split::kSeen ? "seen" : "unseen"; }

Split parse_split(std::string_view text) {
  if (text == "seen") return Split::kSeen;
  if (text == "unseen") return Split::kUnseen;
  throw Error(ErrorKind::kInvalidConfig, "unknown split '" + std::string(text) + "'");
}

namespace {

struct TemplateSpec {
  const char* id;
  const char* pattern;
  std::vector<std::string> people;
};

const std::vector<TemplateSpec>& template_specs() {
  static const std::vector<TemplateSpec> kSpecs = {
      {"goal_only", "Head to the {goal} and stop there.", {}},
      {"pass_person", "Walk past the person who is {person} and stop next to the {goal}.", {"person"}},
      {"avoid_person", "Go around the person {person} and wait near the {goal}.", {"person"}},
      {"wait_person", "Wait for the person {person} to clear the way, then go to the {goal}.", {"person"}},
      {"two_people", "Move past the person {person} and the person {person2}, then stop by the {goal}.",
       {"person", "person2"}},
  };
  return kSpecs;
}

const TemplateSpec& find_template(const std::string& id) {
  for (const auto& spec : template_specs()) {
    if (id == spec.id) return spec;
  }
  throw Error(ErrorKind::kInvalidScenario, "unknown instruction template '" + id + "'");
}

const Pedestrian* find_pedestrian(const std::vector<Pedestrian>& peds, const std::string& id_text) {
  for (const auto& p : peds) {
    if (std::to_string(p.id) == id_text) return &p;
  }
  return nullptr;
}

}  // namespace

std::vector<std::string> instruction_templates() {
  std::vector<std::string> ids;
  for (const auto& spec : template_specs()) ids.emplace_back(spec.id);
  return ids;
}

std::vector<std::string> referenced_pedestrian_slots(const std::string& template_id) {
  return find_template(template_id).people;
}

std::string render_instruction(const std::string& template_id, const std::map<std::string, std::string>& slots,
                               const std::vector<Pedestrian>& pedestrians) {
  const TemplateSpec& spec = find_template(template_id);
  std::string text = spec.pattern;
  auto substitute = [&](const std::string& slot, const std::string& value) {
    const std::string key = "{" + slot + "}";
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key)) text.replace(pos, key.size(), value);
  };
  auto goal = slots.find("goal");
  if (goal == slots.end()) throw Error(ErrorKind::kInvalidScenario, "instruction missing slot 'goal'");
  substitute("goal", goal->second);
  for (const auto& person : spec.people) {
    auto it = slots.find(person);
    if (it == slots.end()) throw Error(ErrorKind::kInvalidScenario, "instruction missing slot '" + person + "'");
    const Pedestrian* p = find_pedestrian(pedestrians, it->second);
    if (p == nullptr) throw Error(ErrorKind::kInvalidScenario, "instruction references unknown pedestrian " + it->second);
    substitute(person, p->script.activity_label);
  }
  return text;
}

namespace {

bool segment_free(const WorldMap& map, const Vec2& a, const Vec2& b) {
  const double len = distance(a, b);
  const int n = std::max(1, static_cast<int>(std::ceil(len / 0.05)));
  for (int i = 0; i <= n; ++i) {
    if (!map.free_at(a + (b - a) * (static_cast<double>(i) / n))) return false;
  }
  return true;
}

void validate_pedestrian(const WorldMap& map, const Pedestrian& ped) {
  const std::string who = "pedestrian " + std::to_string(ped.id);
  if (ped.script.activity_label.empty()) throw Error(ErrorKind::kInvalidScenario, who + ": empty activity label");
  if (!(ped.body_scale > 0.0 && ped.body_scale <= 2.0)) throw Error(ErrorKind::kInvalidScenario, who + ": bad body scale");
  auto check_speed = [&](double v) {
    if (!(v > 0.0 && v <= 2.0)) throw Error(ErrorKind::kInvalidScenario, who + ": speed outside (0, 2]");
  };
  auto check_free = [&](const Vec2& p) {
    if (!map.free_at(p)) throw Error(ErrorKind::kInvalidScenario, who + ": script position in occupied space");
  };
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, StandScript>) {
          check_free(m.position);
        } else if constexpr (std::is_same_v<T, PaceScript>) {
          check_speed(m.speed);
          if (!segment_free(map, m.a, m.b)) throw Error(ErrorKind::kInvalidScenario, who + ": pace segment blocked");
        } else if constexpr (std::is_same_v<T, WalkPathScript>) {
          check_speed(m.speed);
          if (m.polyline.size() < 2) throw Error(ErrorKind::kInvalidScenario, who + ": polyline needs two vertices");
          std::vector<Vec2> pts = m.polyline;
          if (m.loop) pts.push_back(pts.front());
          for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            if (!segment_free(map, pts[i], pts[i + 1])) throw Error(ErrorKind::kInvalidScenario, who + ": path blocked");
          }
        } else {
          if (m.group_size < 1 || m.member_index < 0 || m.member_index >= m.group_size || !(m.radius > 0.0)) {
            throw Error(ErrorKind::kInvalidScenario, who + ": bad group parameters");
          }
          check_free(pedestrian_state_at(ped.script, 0, kDefaultDt).position);
        }
      },
      ped.script.motion);
}

}  // namespace

void validate_episode(const Episode& episode) {
  if (!episode.map) throw Error(ErrorKind::kInvalidScenario, episode.id + ": missing map");
  const WorldMap& map = *episode.map;
  if (!map.has_clearance(episode.start.position(), kCandidateClearance)) {
    throw Error(ErrorKind::kInvalidScenario, episode.id + ": start not in free space");
  }
  if (!map.has_clearance(episode.goal, kCandidateClearance)) {
    throw Error(ErrorKind::kInvalidScenario, episode.id + ": goal not in free space");
  }
  try {
    const PathResult path = shortest_path(map, episode.start.position(), episode.goal);
    if (path.length < 2.0) throw Error(ErrorKind::kInvalidScenario, episode.id + ": start-goal geodesic below 2 m");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kNoPath) throw Error(ErrorKind::kInvalidScenario, episode.id + ": goal unreachable");
    throw;
  }
  for (std::size_t i = 0; i < episode.pedestrians.size(); ++i) {
    for (std::size_t j = i + 1; j < episode.pedestrians.size(); ++j) {
      if (episode.pedestrians[i].id == episode.pedestrians[j].id) {
        throw Error(ErrorKind::kInvalidScenario, episode.id + ": duplicate pedestrian id");
      }
    }
    validate_pedestrian(map, episode.pedestrians[i]);
  }
  const std::string rendered =
      render_instruction(episode.instruction.template_id, episode.instruction.slots, episode.pedestrians);
  if (rendered != episode.instruction.text) {
    throw Error(ErrorKind::kInvalidScenario, episode.id + ": instruction text does not match its template");
  }
  for (const auto& slot : referenced_pedestrian_slots(episode.instruction.template_id)) {
    const Pedestrian* p = find_pedestrian(episode.pedestrians, episode.instruction.slots.at(slot));
    if (rendered.find(p->script.activity_label) == std::string::npos) {
      throw Error(ErrorKind::kInvalidScenario, episode.id + ": instruction omits a referenced pedestrian");
    }
  }
}

// ---------------------------------------------------------------------------
// Simulation

SimState initial_state(const Episode& episode, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::kInvalidConfig, "dt must be positive");
  SimState s;
  s.t = 0;
  s.dt = dt;
  s.agent = episode.start;
  s.pedestrians.reserve(episode.pedestrians.size());
  for (const auto& p : episode.pedestrians) s.pedestrians.push_back(pedestrian_state_at(p.script, 0, dt));
  return s;
}

namespace {

void advance_pedestrians(const Episode& episode, SimState& s) {
  s.t += 1;
  for (std::size_t i = 0; i < episode.pedestrians.size(); ++i) {
    s.pedestrians[i] = pedestrian_state_at(episode.pedestrians[i].script, s.t, s.dt);
  }
}

void record_contacts(const Episode& episode, const SimState& before, const SimState& after,
                     std::vector<CollisionEvent>& events) {
  for (std::size_t i = 0; i < episode.pedestrians.size(); ++i) {
    const bool was = distance(before.agent.position(), before.pedestrians[i].position) < kCollisionRadius;
    const bool is = distance(after.agent.position(), after.pedestrians[i].position) < kCollisionRadius;
    if (is && !was) events.push_back({after.t, episode.pedestrians[i].id});
  }
}

}  // namespace

StepOutcome hold_agent(const Episode& episode, const SimState& state, int steps) {
  StepOutcome out{state, {}};
  for (int i = 0; i < steps; ++i) {
    const SimState before = out.state;
    advance_pedestrians(episode, out.state);
    record_contacts(episode, before, out.state, out.collisions);
  }
  return out;
}

StepOutcome step_agent(const Episode& episode, const SimState& state, const Vec2& target) {
  StepOutcome out{state, {}};
  const Vec2 start = state.agent.position();
  const Vec2 delta = target - start;
  const double length = delta.norm();
  if (length <= 0.0) return out;
  const double step_len = kAgentSpeed * state.dt;
  const int substeps = static_cast<int>(std::ceil(length / step_len - 1e-9));
  const double heading = std::atan2(delta.y, delta.x);
  for (int k = 1; k <= substeps; ++k) {
    const SimState before = out.state;
    advance_pedestrians(episode, out.state);
    const double travelled = std::min(length, step_len * k);
    const Vec2 p = (k == substeps) ? target : start + delta * (travelled / length);
    out.state.agent = Pose2{p.x, p.y, heading};
    record_contacts(episode, before, out.state, out.collisions);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Geometry queries

bool line_of_sight(const WorldMap& map, const Vec2& a, const Vec2& b) {
  const double len = distance(a, b);
  const int n = std::max(1, static_cast<int>(std::ceil(len / 0.05)));
  for (int i = 0; i <= n; ++i) {
    const Vec2 p = a + (b - a) * (static_cast<double>(i) / n);
    if (!map.bounds().contains(p) || map.occupied_at(p)) return false;
  }
  return true;
}

namespace {

struct Move {
  int dc;
  int dr;
  bool diagonal;
};

constexpr std::array<Move, 8> kMoves = {{
    {1, 0, false}, {-1, 0, false}, {0, 1, false}, {0, -1, false},
    {1, 1, true},  {1, -1, true},  {-1, 1, true}, {-1, -1, true},
}};

bool can_move(const WorldMap& map, const GridCell& from, const Move& m) {
  const GridCell to{from.col + m.dc, from.row + m.dr};
  if (map.inflated_blocked(to)) return false;
  if (m.diagonal) {
    if (map.inflated_blocked(GridCell{from.col + m.dc, from.row})) return false;
    if (map.inflated_blocked(GridCell{from.col, from.row + m.dr})) return false;
  }
  return true;
}

struct DijkstraResult {
  std::vector<double> dist;
  std::vector<int> parent;
  std::vector<int> straight;
  std::vector<int> diagonal;
};

DijkstraResult run_dijkstra(const WorldMap& map, const GridCell& source, std::optional<GridCell> target) {
  const int cols = map.cols();
  const std::size_t n = static_cast<std::size_t>(cols) * static_cast<std::size_t>(map.rows());
  DijkstraResult r;
  r.dist.assign(n, std::numeric_limits<double>::infinity());
  r.parent.assign(n, -1);
  r.straight.assign(n, 0);
  r.diagonal.assign(n, 0);
  auto idx = [cols](const GridCell& c) { return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c.col); };
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  r.dist[idx(source)] = 0.0;
  open.push({0.0, idx(source)});
  const double diag = kGridResolution * std::sqrt(2.0);
  const std::size_t target_idx = target ? idx(*target) : n;
  while (!open.empty()) {
    auto [d, u] = open.top();
    open.pop();
    if (d > r.dist[u]) continue;
    if (u == target_idx) break;
    const GridCell cu{static_cast<int>(u % static_cast<std::size_t>(cols)), static_cast<int>(u / static_cast<std::size_t>(cols))};
    for (const Move& m : kMoves) {
      if (!can_move(map, cu, m)) continue;
      const std::size_t v = idx(GridCell{cu.col + m.dc, cu.row + m.dr});
      const double nd = d + (m.diagonal ? diag : kGridResolution);
      if (nd < r.dist[v]) {
        r.dist[v] = nd;
        r.parent[v] = static_cast<int>(u);
        r.straight[v] = r.straight[u] + (m.diagonal ? 0 : 1);
        r.diagonal[v] = r.diagonal[u] + (m.diagonal ? 1 : 0);
        open.push({nd, v});
      }
    }
  }
  return r;
}

}  // namespace

PathResult shortest_path(const WorldMap& map, const Vec2& start, const Vec2& goal) {
  const GridCell s = map.cell_of(start);
  const GridCell g = map.cell_of(goal);
  if (map.inflated_blocked(s)) throw Error(ErrorKind::kNoPath, "start inside inflated obstacle");
  if (map.inflated_blocked(g)) throw Error(ErrorKind::kNoPath, "goal inside inflated obstacle");
  const DijkstraResult r = run_dijkstra(map, s, g);
  const std::size_t gi = static_cast<std::size_t>(g.row) * static_cast<std::size_t>(map.cols()) + static_cast<std::size_t>(g.col);
  if (!std::isfinite(r.dist[gi])) throw Error(ErrorKind::kNoPath, "goal unreachable");

  PathResult out;
  out.straight_moves = r.straight[gi];
  out.diagonal_moves = r.diagonal[gi];
  out.length = grid_path_length(out.straight_moves, out.diagonal_moves);
  std::vector<Vec2> cells;
  for (int v = static_cast<int>(gi); v >= 0; v = r.parent[static_cast<std::size_t>(v)]) {
    const auto uv = static_cast<std::size_t>(v);
    cells.push_back(map.cell_center(GridCell{static_cast<int>(uv % static_cast<std::size_t>(map.cols())),
                                             static_cast<int>(uv / static_cast<std::size_t>(map.cols()))}));
  }
  std::reverse(cells.begin(), cells.end());
  out.path.push_back(start);
  for (std::size_t i = 1; i + 1 < cells.size(); ++i) out.path.push_back(cells[i]);
  out.path.push_back(goal);
  return out;
}

DistanceField::DistanceField(std::shared_ptr<const WorldMap> map, const Vec2& goal) : map_(std::move(map)) {
  const GridCell g = map_->cell_of(goal);
  if (map_->inflated_blocked(g)) throw Error(ErrorKind::kNoPath, "goal inside inflated obstacle");
  dist_ = run_dijkstra(*map_, g, std::nullopt).dist;
}

double DistanceField::at(const Vec2& p) const {
  const int cols = map_->cols();
  const GridCell c = map_->cell_of(p);
  auto lookup = [&](const GridCell& cell) {
    if (!map_->in_grid(cell)) return std::numeric_limits<double>::infinity();
    return dist_[static_cast<std::size_t>(cell.row) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(cell.col)];
  };
  if (!map_->inflated_blocked(c)) return lookup(c);
  double best = std::numeric_limits<double>::infinity();
  constexpr int kReach = 5;
  for (int dr = -kReach; dr <= kReach; ++dr) {
    for (int dc = -kReach; dc <= kReach; ++dc) {
      const GridCell n{c.col + dc, c.row + dr};
      if (map_->inflated_blocked(n)) continue;
      const double extra = distance(map_->cell_center(n), p);
      if (extra > 0.5 + 1e-9) continue;
      best = std::min(best, lookup(n) + extra);
    }
  }
  return best;
}

std::vector<WaypointCandidate> waypoint_candidates(const WorldMap& map, const Pose2& agent) {
  std::vector<WaypointCandidate> out;
  const Vec2 origin = agent.position();
  for (int k = 0; k < kNumBearings; ++k) {
    const double bearing = agent.heading + k * (2.0 * kPi / kNumBearings);
    const Vec2 dir{std::cos(bearing), std::sin(bearing)};
    std::optional<WaypointCandidate> best;
    for (double r : kCandidateRadii) {
      const Vec2 p = origin + dir * r;
      if (!map.has_clearance(p, kCandidateClearance) || !line_of_sight(map, origin, p)) break;
      best = WaypointCandidate{p, k, r};
    }
    if (best) out.push_back(*best);
  }
  return out;
}

}  // namespace hcsg
