#include "hcsg/render.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace hcsg {

namespace {

constexpr double kScale = 40.0;  // px per meter
constexpr double kMargin = 20.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_episode_svg(const Episode& episode, const EpisodeLog& log, double dt) {
  const Rect& b = episode.map->bounds();
  const double width = (b.max_x - b.min_x) * kScale + 2 * kMargin;
  const double height = (b.max_y - b.min_y) * kScale + 2 * kMargin + 30.0;
  // y grows upward in the world and downward in SVG.
  auto px = [&](const Vec2& p) {
    return num(kMargin + (p.x - b.min_x) * kScale) + "," + num(kMargin + (b.max_y - p.y) * kScale);
  };
  auto X = [&](double x) { return num(kMargin + (x - b.min_x) * kScale); };
  auto Y = [&](double y) { return num(kMargin + (b.max_y - y) * kScale); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
    << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  s << "<rect x=\"" << X(b.min_x) << "\" y=\"" << Y(b.max_y) << "\" width=\"" << num((b.max_x - b.min_x) * kScale)
    << "\" height=\"" << num((b.max_y - b.min_y) * kScale) << "\" fill=\"#fafafa\" stroke=\"#222\" stroke-width=\"2\"/>\n";
  for (const Rect& r : episode.map->obstacles()) {
    s << "<rect x=\"" << X(r.min_x) << "\" y=\"" << Y(r.max_y) << "\" width=\"" << num((r.max_x - r.min_x) * kScale)
      << "\" height=\"" << num((r.max_y - r.min_y) * kScale) << "\" fill=\"#888\"/>\n";
  }
  for (const MapObject& o : episode.map->objects()) {
    s << "<circle cx=\"" << X(o.position.x) << "\" cy=\"" << Y(o.position.y) << "\" r=\"3\" fill=\"#5a5\"/>";
    s << "<text x=\"" << X(o.position.x + 0.12) << "\" y=\"" << Y(o.position.y + 0.12) << "\" fill=\"#363\">"
      << escape(o.label) << "</text>\n";
  }

  std::int64_t t_end = 0;
  for (const StepRecord& r : log.steps) {
    t_end = std::max(t_end, r.t);
    for (const CollisionEvent& e : r.collisions) t_end = std::max(t_end, e.step);
  }
  t_end += 1;
  for (const Pedestrian& p : episode.pedestrians) {
    s << "<polyline fill=\"none\" stroke=\"#39c\" stroke-opacity=\"0.6\" points=\"";
    for (std::int64_t t = 0; t <= t_end; ++t) s << px(pedestrian_state_at(p.script, t, dt).position) << ' ';
    s << "\"/>\n";
    const Vec2 p0 = pedestrian_state_at(p.script, 0, dt).position;
    s << "<circle cx=\"" << X(p0.x) << "\" cy=\"" << Y(p0.y) << "\" r=\"" << num(0.25 * kScale)
      << "\" fill=\"#39c\" fill-opacity=\"0.3\"/>";
    s << "<text x=\"" << X(p0.x + 0.3) << "\" y=\"" << Y(p0.y - 0.3) << "\" fill=\"#147\">" << p.id << ": "
      << escape(p.script.activity_label) << "</text>\n";
  }

  s << "<polyline fill=\"none\" stroke=\"#c33\" stroke-width=\"2\" points=\"";
  for (const StepRecord& r : log.steps) s << px(r.agent.position()) << ' ';
  s << px(log.final_position) << "\"/>\n";
  for (const StepRecord& r : log.steps) {
    s << "<circle cx=\"" << X(r.agent.x) << "\" cy=\"" << Y(r.agent.y) << "\" r=\"2.5\" fill=\"#c33\"/>\n";
    for (const CollisionEvent& e : r.collisions) {
      for (const Pedestrian& p : episode.pedestrians) {
        if (p.id != e.pedestrian_id) continue;
        const Vec2 c = pedestrian_state_at(p.script, e.step, dt).position;
        s << "<text x=\"" << X(c.x) << "\" y=\"" << Y(c.y) << "\" fill=\"#d00\" font-size=\"16\" "
          << "text-anchor=\"middle\" dominant-baseline=\"middle\">&#215;</text>\n";
      }
    }
  }
  const Vec2 st = episode.start.position();
  s << "<rect x=\"" << num(kMargin + (st.x - b.min_x) * kScale - 5) << "\" y=\""
    << num(kMargin + (b.max_y - st.y) * kScale - 5) << "\" width=\"10\" height=\"10\" fill=\"#c33\"/>\n";
  s << "<circle cx=\"" << X(episode.goal.x) << "\" cy=\"" << Y(episode.goal.y) << "\" r=\"6\" fill=\"none\" "
    << "stroke=\"#070\" stroke-width=\"2\"/>\n";
  s << "<text x=\"" << num(kMargin) << "\" y=\"" << num(height - 10) << "\">" << escape(episode.id) << " | "
    << escape(episode.instruction.text) << " | collisions " << log.collision_count() << " | end "
    << escape(log.termination) << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace hcsg
