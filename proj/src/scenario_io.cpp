#include "hcsg/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <map>
#include <set>

namespace hcsg {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::kInvalidScenario, where + ": " + what);
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional = {}) {
  if (!j.is_object()) bad(where, "expected an object");
  std::set<std::string> allowed;
  for (const char* k : required) {
    allowed.insert(k);
    if (!j.contains(k)) bad(where, std::string("missing field '") + k + "'");
  }
  for (const char* k : optional) allowed.insert(k);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) bad(where, "unknown field '" + it.key() + "'");
  }
}

double num(const json& j, const std::string& where) {
  if (!j.is_number()) bad(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(where, "non-finite number");
  return v;
}

std::string str(const json& j, const std::string& where) {
  if (!j.is_string()) bad(where, "expected a string");
  return j.get<std::string>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) bad(where, "expected an integer");
  return j.get<int>();
}

Vec2 vec2(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) bad(where, "expected [x, y]");
  return {num(j[0], where), num(j[1], where)};
}

ordered_json vec2_json(const Vec2& v) { return ordered_json::array({v.x, v.y}); }

ordered_json rect_json(const Rect& r) { return ordered_json::array({r.min_x, r.min_y, r.max_x, r.max_y}); }

Rect rect(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) bad(where, "expected [min_x, min_y, max_x, max_y]");
  Rect r{num(j[0], where), num(j[1], where), num(j[2], where), num(j[3], where)};
  if (!(r.min_x < r.max_x && r.min_y < r.max_y)) bad(where, "empty rectangle");
  return r;
}

ordered_json map_json(const WorldMap& map) {
  ordered_json j;
  j["id"] = map.id();
  j["bounds"] = rect_json(map.bounds());
  ordered_json obs = ordered_json::array();
  for (const Rect& r : map.obstacles()) obs.push_back(rect_json(r));
  j["obstacles"] = std::move(obs);
  ordered_json objs = ordered_json::array();
  for (const MapObject& o : map.objects()) {
    ordered_json oj;
    oj["id"] = o.id;
    oj["label"] = o.label;
    oj["position"] = vec2_json(o.position);
    objs.push_back(std::move(oj));
  }
  j["objects"] = std::move(objs);
  return j;
}

std::shared_ptr<const WorldMap> map_from(const json& j) {
  const std::string where = "map";
  check_keys(j, where, {"id", "bounds", "obstacles", "objects"});
  const std::string id = str(j["id"], where + ".id");
  const std::string w = "map '" + id + "'";
  const Rect bounds = rect(j["bounds"], w + ".bounds");
  if (!j["obstacles"].is_array()) bad(w, "obstacles must be an array");
  std::vector<Rect> obstacles;
  for (const json& r : j["obstacles"]) obstacles.push_back(rect(r, w + ".obstacles"));
  if (!j["objects"].is_array()) bad(w, "objects must be an array");
  std::vector<MapObject> objects;
  std::set<std::string> ids;
  for (const json& o : j["objects"]) {
    check_keys(o, w + ".objects", {"id", "label", "position"});
    MapObject mo{str(o["id"], w + ".objects.id"), str(o["label"], w + ".objects.label"),
                 vec2(o["position"], w + ".objects.position")};
    if (!object_class_index(mo.label)) bad(w, "unknown object label '" + mo.label + "'");
    if (!bounds.contains(mo.position)) bad(w, "object '" + mo.id + "' outside bounds");
    if (!ids.insert(mo.id).second) bad(w, "duplicate object id '" + mo.id + "'");
    objects.push_back(std::move(mo));
  }
  return std::make_shared<const WorldMap>(id, bounds, std::move(obstacles), std::move(objects));
}

ordered_json motion_json(const PedestrianMotion& motion) {
  ordered_json j;
  if (const auto* s = std::get_if<StandScript>(&motion)) {
    j["kind"] = "stand";
    j["position"] = vec2_json(s->position);
    j["heading"] = s->heading;
  } else if (const auto* p = std::get_if<PaceScript>(&motion)) {
    j["kind"] = "pace";
    j["a"] = vec2_json(p->a);
    j["b"] = vec2_json(p->b);
    j["speed"] = p->speed;
  } else if (const auto* w = std::get_if<WalkPathScript>(&motion)) {
    j["kind"] = "walk_path";
    ordered_json poly = ordered_json::array();
    for (const Vec2& v : w->polyline) poly.push_back(vec2_json(v));
    j["polyline"] = std::move(poly);
    j["speed"] = w->speed;
    j["loop"] = w->loop;
  } else if (const auto* g = std::get_if<GroupDiscussScript>(&motion)) {
    j["kind"] = "group_discuss";
    j["center"] = vec2_json(g->center);
    j["radius"] = g->radius;
    j["member_index"] = g->member_index;
    j["group_size"] = g->group_size;
  }
  return j;
}

PedestrianMotion motion_from(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("kind")) bad(where, "script needs a 'kind'");
  const std::string kind = str(j["kind"], where + ".kind");
  if (kind == "stand") {
    check_keys(j, where, {"kind", "position", "heading"});
    return StandScript{vec2(j["position"], where), num(j["heading"], where)};
  }
  if (kind == "pace") {
    check_keys(j, where, {"kind", "a", "b", "speed"});
    return PaceScript{vec2(j["a"], where), vec2(j["b"], where), num(j["speed"], where)};
  }
  if (kind == "walk_path") {
    check_keys(j, where, {"kind", "polyline", "speed", "loop"});
    WalkPathScript w;
    if (!j["polyline"].is_array() || j["polyline"].size() < 2) bad(where, "polyline needs at least 2 vertices");
    for (const json& v : j["polyline"]) w.polyline.push_back(vec2(v, where));
    w.speed = num(j["speed"], where);
    if (!j["loop"].is_boolean()) bad(where, "loop must be a boolean");
    w.loop = j["loop"].get<bool>();
    return w;
  }
  if (kind == "group_discuss") {
    check_keys(j, where, {"kind", "center", "radius", "member_index", "group_size"});
    GroupDiscussScript g{vec2(j["center"], where), num(j["radius"], where), integer(j["member_index"], where),
                         integer(j["group_size"], where)};
    if (g.group_size < 1 || g.member_index < 0 || g.member_index >= g.group_size || !(g.radius > 0.0)) {
      bad(where, "invalid group");
    }
    return g;
  }
  bad(where, "unknown script kind '" + kind + "'");
}

ordered_json episode_json(const Episode& e) {
  ordered_json j;
  j["id"] = e.id;
  j["map"] = e.map->id();
  j["split"] = std::string(to_string(e.split));
  j["seed"] = e.seed;
  j["start"] = ordered_json::array({e.start.x, e.start.y, e.start.heading});
  j["goal"] = vec2_json(e.goal);
  ordered_json ins;
  ins["template"] = e.instruction.template_id;
  ordered_json slots = ordered_json::object();
  for (const auto& [k, v] : e.instruction.slots) slots[k] = v;
  ins["slots"] = std::move(slots);
  ins["text"] = e.instruction.text;
  j["instruction"] = std::move(ins);
  ordered_json peds = ordered_json::array();
  for (const Pedestrian& p : e.pedestrians) {
    ordered_json pj;
    pj["id"] = p.id;
    pj["activity"] = p.script.activity_label;
    pj["body_scale"] = p.body_scale;
    pj["script"] = motion_json(p.script.motion);
    peds.push_back(std::move(pj));
  }
  j["pedestrians"] = std::move(peds);
  return j;
}

Episode episode_from(const json& j, const std::map<std::string, std::shared_ptr<const WorldMap>>& maps) {
  check_keys(j, "episode", {"id", "map", "split", "seed", "start", "goal", "instruction", "pedestrians"});
  Episode e;
  e.id = str(j["id"], "episode.id");
  const std::string w = "episode '" + e.id + "'";
  const std::string map_id = str(j["map"], w + ".map");
  const auto it = maps.find(map_id);
  if (it == maps.end()) bad(w, "unknown map '" + map_id + "'");
  e.map = it->second;
  try {
    e.split = parse_split(str(j["split"], w + ".split"));
  } catch (const Error& err) {
    bad(w, err.what());
  }
  if (!j["seed"].is_number_unsigned()) bad(w, "seed must be a nonnegative integer");
  e.seed = j["seed"].get<std::uint64_t>();
  const json& s = j["start"];
  if (!s.is_array() || s.size() != 3) bad(w, "start must be [x, y, heading]");
  e.start = Pose2{num(s[0], w), num(s[1], w), num(s[2], w)};
  e.goal = vec2(j["goal"], w + ".goal");

  const json& ins = j["instruction"];
  check_keys(ins, w + ".instruction", {"template", "slots", "text"});
  e.instruction.template_id = str(ins["template"], w + ".instruction.template");
  if (!ins["slots"].is_object()) bad(w, "instruction slots must be an object");
  for (auto sit = ins["slots"].begin(); sit != ins["slots"].end(); ++sit) {
    e.instruction.slots[sit.key()] = str(sit.value(), w + ".instruction.slots");
  }
  e.instruction.text = str(ins["text"], w + ".instruction.text");

  if (!j["pedestrians"].is_array()) bad(w, "pedestrians must be an array");
  for (const json& pj : j["pedestrians"]) {
    check_keys(pj, w + ".pedestrians", {"id", "activity", "body_scale", "script"});
    Pedestrian p;
    p.id = integer(pj["id"], w + ".pedestrians.id");
    p.script.activity_label = str(pj["activity"], w + ".pedestrians.activity");
    p.body_scale = num(pj["body_scale"], w + ".pedestrians.body_scale");
    p.script.motion = motion_from(pj["script"], w + ".pedestrians.script");
    e.pedestrians.push_back(std::move(p));
  }
  validate_episode(e);
  return e;
}

}  // namespace

ordered_json benchmark_to_json(const std::vector<Episode>& episodes) {
  ordered_json j;
  j["format"] = "hcsg-benchmark";
  j["version"] = 1;
  ordered_json maps = ordered_json::array();
  std::set<std::string> seen;
  for (const Episode& e : episodes) {
    if (!e.map) throw Error(ErrorKind::kInvalidScenario, "episode '" + e.id + "' has no map");
    if (seen.insert(e.map->id()).second) maps.push_back(map_json(*e.map));
  }
  j["maps"] = std::move(maps);
  ordered_json eps = ordered_json::array();
  for (const Episode& e : episodes) eps.push_back(episode_json(e));
  j["episodes"] = std::move(eps);
  return j;
}

std::vector<Episode> benchmark_from_json(const json& j) {
  check_keys(j, "benchmark", {"format", "version", "maps", "episodes"});
  if (j["format"] != "hcsg-benchmark") bad("benchmark", "format must be 'hcsg-benchmark'");
  if (j["version"] != 1) bad("benchmark", "unsupported version");
  if (!j["maps"].is_array() || !j["episodes"].is_array()) bad("benchmark", "maps and episodes must be arrays");
  std::map<std::string, std::shared_ptr<const WorldMap>> maps;
  for (const json& m : j["maps"]) {
    auto map = map_from(m);
    if (!maps.emplace(map->id(), map).second) bad("benchmark", "duplicate map id '" + map->id() + "'");
  }
  std::vector<Episode> episodes;
  std::set<std::string> ids;
  for (const json& e : j["episodes"]) {
    Episode ep = episode_from(e, maps);
    if (!ids.insert(ep.id).second) bad("benchmark", "duplicate episode id '" + ep.id + "'");
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

std::vector<Episode> load_benchmark(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kInvalidScenario, path.string() + ": " + e.what());
  }
  return benchmark_from_json(j);
}

void save_benchmark(const std::filesystem::path& path, const std::vector<Episode>& episodes) {
  write_file_atomic(path, benchmark_to_json(episodes).dump(1) + "\n");
}

std::string benchmark_hash(const std::vector<Episode>& episodes) {
  return hex64(fnv1a64(benchmark_to_json(episodes).dump()));
}

}  // namespace hcsg
