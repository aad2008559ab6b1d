#include "hcsg/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace hcsg {

namespace {

constexpr int kMaxAttempts = 200;
constexpr double kMinGeodesic = 5.0;
constexpr double kMaxGeodesic = 12.0;
constexpr double kGoalOffset = 0.8;

struct Layout {
  std::string family;
  Rect bounds;
  std::vector<Rect> obstacles;
};

bool overlaps(const Rect& a, const Rect& b, double margin) {
  return a.min_x < b.max_x + margin && b.min_x < a.max_x + margin && a.min_y < b.max_y + margin &&
         b.min_y < a.max_y + margin;
}

// Scatters up to `count` axis-aligned blocks inside `area` that keep `margin`
// from each other and from the existing obstacles.
void scatter_blocks(Rng& rng, const Rect& area, std::vector<Rect>& obstacles, int count, double wmin, double wmax,
                    double hmin, double hmax, double margin) {
  for (int placed = 0, tries = 0; placed < count && tries < 60 * count; ++tries) {
    double w = rng.uniform(wmin, wmax);
    double h = rng.uniform(hmin, hmax);
    if (rng.bernoulli(0.5)) std::swap(w, h);
    if (area.max_x - area.min_x <= w || area.max_y - area.min_y <= h) continue;
    const double x = rng.uniform(area.min_x, area.max_x - w);
    const double y = rng.uniform(area.min_y, area.max_y - h);
    const Rect r{x, y, x + w, y + h};
    if (std::any_of(obstacles.begin(), obstacles.end(), [&](const Rect& o) { return overlaps(r, o, margin); })) continue;
    obstacles.push_back(r);
    ++placed;
  }
}

Layout corridor(Rng& rng) {
  Layout l{"corridor", {}, {}};
  const double len = rng.uniform(14.0, 18.0);
  const double width = rng.uniform(2.6, 3.4);
  l.bounds = {0.0, 0.0, len, width};
  const int n = rng.uniform_int(2, 4);
  for (int i = 0, tries = 0; i < n && tries < 100; ++tries) {
    const double x = rng.uniform(2.0, len - 2.8);
    const bool low = rng.bernoulli(0.5);
    const Rect r = low ? Rect{x, 0.0, x + 0.8, 0.4} : Rect{x, width - 0.4, x + 0.8, width};
    if (std::any_of(l.obstacles.begin(), l.obstacles.end(), [&](const Rect& o) { return overlaps(r, o, 1.0); })) continue;
    l.obstacles.push_back(r);
    ++i;
  }
  return l;
}

Layout room(Rng& rng) {
  Layout l{"room", {}, {}};
  const double w = rng.uniform(9.0, 12.0);
  const double h = rng.uniform(8.0, 11.0);
  l.bounds = {0.0, 0.0, w, h};
  scatter_blocks(rng, {1.0, 1.0, w - 1.0, h - 1.0}, l.obstacles, rng.uniform_int(3, 5), 0.8, 1.8, 0.6, 1.2, 1.2);
  return l;
}

Layout lounge(Rng& rng) {
  Layout l{"lounge", {}, {}};
  const double w = rng.uniform(11.0, 14.0);
  const double h = rng.uniform(11.0, 14.0);
  l.bounds = {0.0, 0.0, w, h};
  const double x = w * rng.uniform(0.4, 0.6);
  l.obstacles.push_back({x, 0.0, x + 0.2, h * rng.uniform(0.45, 0.6)});
  scatter_blocks(rng, {1.0, 1.0, w - 1.0, h - 1.0}, l.obstacles, rng.uniform_int(3, 5), 1.6, 2.2, 0.7, 0.9, 1.2);
  return l;
}

Layout lhall(Rng& rng) {
  Layout l{"lhall", {}, {}};
  const double s = rng.uniform(12.0, 15.0);
  const double hall = rng.uniform(2.8, 3.8);
  l.bounds = {0.0, 0.0, s, s};
  l.obstacles.push_back({hall, hall, s, s});
  const int n = rng.uniform_int(1, 3);
  for (int i = 0, tries = 0; i < n && tries < 100; ++tries) {
    const bool bottom = rng.bernoulli(0.5);
    const double u = rng.uniform(hall + 1.0, s - 1.5);
    const Rect r = bottom ? Rect{u, 0.0, u + 1.0, 0.4} : Rect{0.0, u, 0.4, u + 1.0};
    if (std::any_of(l.obstacles.begin(), l.obstacles.end(), [&](const Rect& o) { return overlaps(r, o, 1.0); })) continue;
    l.obstacles.push_back(r);
    ++i;
  }
  return l;
}

Layout pillars(Rng& rng) {
  Layout l{"pillars", {}, {}};
  const double w = rng.uniform(10.0, 13.0);
  const double h = rng.uniform(10.0, 13.0);
  l.bounds = {0.0, 0.0, w, h};
  const double spacing = rng.uniform(2.4, 3.0);
  const double ox = rng.uniform(1.4, 1.4 + spacing / 2.0);
  const double oy = rng.uniform(1.4, 1.4 + spacing / 2.0);
  for (double x = ox; x + 0.5 < w - 1.0; x += spacing) {
    for (double y = oy; y + 0.5 < h - 1.0; y += spacing) l.obstacles.push_back({x, y, x + 0.5, y + 0.5});
  }
  return l;
}

Layout atrium(Rng& rng) {
  Layout l{"atrium", {}, {}};
  const double s = rng.uniform(12.0, 15.0);
  const double c = rng.uniform(3.5, 5.5);
  const double lo = (s - c) / 2.0 + rng.uniform(-0.5, 0.5);
  l.bounds = {0.0, 0.0, s, s};
  l.obstacles.push_back({lo, lo, lo + c, lo + c});
  scatter_blocks(rng, {0.8, 0.8, s - 0.8, s - 0.8}, l.obstacles, rng.uniform_int(2, 4), 0.6, 0.9, 0.6, 0.9, 1.8);
  return l;
}

Layout make_layout(const std::string& family, Rng& rng) {
  if (family == "corridor") return corridor(rng);
  if (family == "room") return room(rng);
  if (family == "lounge") return lounge(rng);
  if (family == "lhall") return lhall(rng);
  if (family == "pillars") return pillars(rng);
  return atrium(rng);
}

std::vector<MapObject> place_objects(Rng& rng, const WorldMap& probe) {
  std::vector<std::string> labels = object_classes();
  const int n = rng.uniform_int(5, 7);
  std::vector<MapObject> objects;
  const Rect& b = probe.bounds();
  for (int tries = 0; static_cast<int>(objects.size()) < n && tries < 400; ++tries) {
    const Vec2 p{rng.uniform(b.min_x + 0.3, b.max_x - 0.3), rng.uniform(b.min_y + 0.3, b.max_y - 0.3)};
    if (!probe.has_clearance(p, 0.35)) continue;
    if (std::any_of(objects.begin(), objects.end(), [&](const MapObject& o) { return distance(o.position, p) < 1.5; })) {
      continue;
    }
    const int k = rng.uniform_int(0, static_cast<int>(labels.size()) - 1);
    objects.push_back({"obj" + std::to_string(objects.size()), labels[static_cast<std::size_t>(k)], p});
    labels.erase(labels.begin() + k);
  }
  return objects;
}

// Arc-length parameterization of a polyline.
class PathCurve {
 public:
  explicit PathCurve(std::vector<Vec2> pts) : pts_(std::move(pts)), cum_(pts_.size(), 0.0) {
    for (std::size_t i = 1; i < pts_.size(); ++i) cum_[i] = cum_[i - 1] + distance(pts_[i - 1], pts_[i]);
  }
  double length() const { return cum_.back(); }
  Vec2 at(double s) const {
    s = std::clamp(s, 0.0, length());
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    const std::size_t i = it == cum_.end() ? pts_.size() - 1 : static_cast<std::size_t>(it - cum_.begin());
    if (i == 0) return pts_.front();
    const double seg = cum_[i] - cum_[i - 1];
    const double f = seg > 0.0 ? (s - cum_[i - 1]) / seg : 0.0;
    return pts_[i - 1] + (pts_[i] - pts_[i - 1]) * f;
  }
  Vec2 tangent(double s) const {
    const Vec2 d = at(s + 0.5) - at(s - 0.5);
    const double n = d.norm();
    return n > 0.0 ? d / n : Vec2{1.0, 0.0};
  }

 private:
  std::vector<Vec2> pts_;
  std::vector<double> cum_;
};

const std::vector<std::string> kStandActivities = {
    "talking on the phone", "reading a book",    "sorting clothes",
    "looking at a painting", "drinking coffee",  "checking a watch",
};
const std::vector<std::string> kPaceActivities = {"pacing while on a call", "carrying a box", "sweeping the floor"};
const std::vector<std::string> kWalkActivities = {"walking to the door", "carrying groceries", "heading to a meeting"};
const std::vector<std::string> kGroupActivities = {"chatting with friends", "having a discussion"};

const std::string& pick(Rng& rng, const std::vector<std::string>& items) {
  return items[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(items.size()) - 1))];
}

bool segment_clear(const WorldMap& map, const Vec2& a, const Vec2& b) {
  const int n = std::max(1, static_cast<int>(std::ceil(distance(a, b) / 0.05)));
  for (int i = 0; i <= n; ++i) {
    if (!map.free_at(a + (b - a) * (static_cast<double>(i) / n))) return false;
  }
  return true;
}

// Places 1-4 pedestrians whose motion overlaps the expert path.
std::vector<Pedestrian> place_pedestrians(Rng& rng, const WorldMap& map, const PathCurve& path, const Vec2& start) {
  const double len = path.length();
  const int total = rng.uniform_int(1, 4);
  std::vector<Pedestrian> peds;
  int next_id = 1;
  const double s_lo = std::min(2.5, 0.4 * len);
  const double s_hi = len - 1.0;
  for (int tries = 0; static_cast<int>(peds.size()) < total && tries < 100; ++tries) {
    const double s = rng.uniform(s_lo, s_hi);
    const Vec2 p = path.at(s);
    const Vec2 t = path.tangent(s);
    const Vec2 n{-t.y, t.x};
    const double kind = rng.uniform();
    const int remaining = total - static_cast<int>(peds.size());
    std::vector<Pedestrian> batch;
    if (kind < 0.35) {
      Pedestrian ped;
      ped.script.motion = StandScript{p + n * rng.uniform(-0.3, 0.3), rng.uniform(-kPi, kPi)};
      ped.script.activity_label = pick(rng, kStandActivities);
      batch.push_back(std::move(ped));
    } else if (kind < 0.6) {
      Vec2 a = p + n * rng.uniform(0.9, 1.6);
      Vec2 b = p - n * rng.uniform(0.9, 1.6);
      for (int shrink = 0; shrink < 3 && !segment_clear(map, a, b); ++shrink) {
        a = p + (a - p) * 0.7;
        b = p + (b - p) * 0.7;
      }
      Pedestrian ped;
      ped.script.motion = PaceScript{a, b, rng.uniform(0.4, 0.9)};
      ped.script.activity_label = pick(rng, kPaceActivities);
      batch.push_back(std::move(ped));
    } else if (kind < 0.8) {
      const double ell = rng.uniform(2.0, 4.0);
      const double far = std::min(s + ell, len - 0.5);
      WalkPathScript w;
      for (double u = far; u > s; u -= 0.5) w.polyline.push_back(path.at(u));
      w.polyline.push_back(p);
      if (w.polyline.size() < 2) continue;
      w.speed = rng.uniform(0.5, 1.0);
      Pedestrian ped;
      ped.script.motion = std::move(w);
      ped.script.activity_label = pick(rng, kWalkActivities);
      batch.push_back(std::move(ped));
    } else {
      if (remaining < 2) continue;
      const int size = rng.uniform_int(2, std::min(3, remaining));
      const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
      const Vec2 center = p + n * (side * rng.uniform(0.2, 0.7));
      const double radius = rng.uniform(0.6, 0.9);
      const std::string& label = pick(rng, kGroupActivities);
      for (int m = 0; m < size; ++m) {
        Pedestrian ped;
        ped.script.motion = GroupDiscussScript{center, radius, m, size};
        ped.script.activity_label = label;
        batch.push_back(std::move(ped));
      }
    }

    bool ok = true;
    for (std::size_t k = 0; ok && k < batch.size(); ++k) {
      Pedestrian& ped = batch[k];
      ped.body_scale = rng.uniform(0.9, 1.1);
      ped.id = next_id + static_cast<int>(k);
      const PedestrianState st = pedestrian_state_at(ped.script, 0, kDefaultDt);
      ok = map.free_at(st.position) && distance(st.position, start) >= 1.5;
      if (const auto* pace = std::get_if<PaceScript>(&ped.script.motion)) ok = ok && segment_clear(map, pace->a, pace->b);
      if (const auto* walk = std::get_if<WalkPathScript>(&ped.script.motion)) {
        for (std::size_t i = 0; ok && i + 1 < walk->polyline.size(); ++i) {
          ok = segment_clear(map, walk->polyline[i], walk->polyline[i + 1]);
        }
      }
    }
    if (!ok) continue;
    next_id += static_cast<int>(batch.size());
    for (Pedestrian& ped : batch) peds.push_back(std::move(ped));
  }
  return peds;
}

Instruction make_instruction(Rng& rng, const std::string& goal_label, const std::vector<Pedestrian>& peds) {
  std::vector<std::string> templates = instruction_templates();
  if (peds.size() < 2) templates.erase(std::remove(templates.begin(), templates.end(), "two_people"), templates.end());
  if (peds.empty()) templates = {"goal_only"};
  Instruction ins;
  ins.template_id = pick(rng, templates);
  ins.slots["goal"] = goal_label;
  const auto people = referenced_pedestrian_slots(ins.template_id);
  const int n = static_cast<int>(peds.size());
  const int first = people.empty() ? 0 : rng.uniform_int(0, n - 1);
  if (!people.empty()) ins.slots[people[0]] = std::to_string(peds[static_cast<std::size_t>(first)].id);
  if (people.size() > 1) {
    int second = rng.uniform_int(0, n - 2);
    if (second >= first) ++second;
    ins.slots[people[1]] = std::to_string(peds[static_cast<std::size_t>(second)].id);
  }
  ins.text = render_instruction(ins.template_id, ins.slots, peds);
  return ins;
}

std::optional<Episode> attempt(Rng& rng, std::size_t index, Split split, std::uint64_t seed, int attempt_no) {
  const std::vector<std::string> families = layout_family(split);
  const std::string& family = pick(rng, families);
  Layout layout = make_layout(family, rng);
  const WorldMap probe("probe", layout.bounds, layout.obstacles, {});
  std::vector<MapObject> objects = place_objects(rng, probe);
  if (objects.size() < 3) return std::nullopt;

  char idbuf[64];
  std::snprintf(idbuf, sizeof(idbuf), "%s-%04zu", std::string(to_string(split)).c_str(), index);
  const std::string episode_id = idbuf;
  auto map = std::make_shared<const WorldMap>(episode_id + "-" + family + "-" + std::to_string(attempt_no),
                                              layout.bounds, layout.obstacles, objects);

  const MapObject& target = objects[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(objects.size()) - 1))];
  const int rot = rng.uniform_int(0, 7);
  std::optional<Vec2> goal;
  for (int k = 0; k < 8 && !goal; ++k) {
    const double a = kPi / 4.0 * ((rot + k) % 8);
    const Vec2 g = target.position + Vec2{std::cos(a), std::sin(a)} * kGoalOffset;
    if (map->has_clearance(g, kCandidateClearance)) goal = g;
  }
  if (!goal) return std::nullopt;

  const DistanceField field(map, *goal);
  const Rect& b = map->bounds();
  std::optional<Vec2> start;
  for (int tries = 0; tries < 300 && !start; ++tries) {
    const Vec2 p{rng.uniform(b.min_x + 0.3, b.max_x - 0.3), rng.uniform(b.min_y + 0.3, b.max_y - 0.3)};
    if (!map->has_clearance(p, kCandidateClearance)) continue;
    const double g = field.at(p);
    if (g >= kMinGeodesic && g <= kMaxGeodesic) start = p;
  }
  if (!start) return std::nullopt;

  PathResult route;
  try {
    route = shortest_path(*map, *start, *goal);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (route.path.size() < 2) return std::nullopt;

  Episode e;
  e.id = episode_id;
  e.map = map;
  e.start = Pose2{start->x, start->y, rng.uniform(-kPi, kPi)};
  e.goal = *goal;
  e.pedestrians = place_pedestrians(rng, *map, PathCurve(route.path), *start);
  if (e.pedestrians.empty()) return std::nullopt;
  e.instruction = make_instruction(rng, target.label, e.pedestrians);
  e.split = split;
  e.seed = derive_seed(seed, index);
  try {
    validate_episode(e);
  } catch (const Error&) {
    return std::nullopt;
  }
  return e;
}

}  // namespace

std::vector<std::string> layout_family(Split split) {
  if (split == Split::kSeen) return {"corridor", "room", "lounge"};
  return {"lhall", "pillars", "atrium"};
}

Episode generate_episode(std::size_t index, Split split, std::uint64_t seed) {
  const std::uint64_t salt = split == Split::kSeen ? 0x5ee1ULL : 0x0753e1ULL;
  Rng rng(derive_seed(derive_seed(seed, salt), index));
  for (int a = 0; a < kMaxAttempts; ++a) {
    if (auto e = attempt(rng, index, split, seed, a)) return std::move(*e);
  }
  throw Error(ErrorKind::kInvalidScenario, "could not generate episode " + std::to_string(index));
}

std::vector<Episode> generate_benchmark(std::size_t n, Split split, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::kInvalidConfig, "benchmark needs at least one episode");
  std::vector<Episode> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_episode(i, split, seed));
  return out;
}

}  // namespace hcsg
