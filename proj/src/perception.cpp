#include "hcsg/perception.hpp"

#include <algorithm>
#include <limits>

namespace hcsg {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) throw Error(ErrorKind::kInvalidConfig, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorKind::kInvalidConfig, "image size must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorKind::kInvalidConfig, "principal point outside the image");
  }
}

std::size_t PanoramicObservation::detection_count() const {
  std::size_t n = 0;
  for (const auto& s : sectors) n += s.detections.size();
  return n;
}

int sector_of_relative_bearing(double relative) {
  double a = std::fmod(relative + 0.5 * kSectorWidth, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  const int k = static_cast<int>(std::floor(a / kSectorWidth));
  return std::clamp(k, 0, kNumSectors - 1);
}

bool project_point(const Pose2& agent, int sector, const Vec2& world, double height,
                   const CameraIntrinsics& intrinsics, double& u, double& v, double& depth) {
  const double beta = sector_bearing(agent, sector);
  const Vec2 axis{std::cos(beta), std::sin(beta)};
  const Vec2 right{std::sin(beta), -std::cos(beta)};
  const Vec2 rel = world - agent.position();
  const double z = rel.dot(axis);
  if (z <= 1e-6) return false;
  const double x = rel.dot(right);
  u = intrinsics.cx + intrinsics.fx * x / z;
  v = intrinsics.cy + intrinsics.fy * (intrinsics.mount_height - height) / z;
  depth = z;
  return true;
}

Vec2 backproject(double u, double v, double d, const CameraIntrinsics& intrinsics, double sector_bearing,
                 double agent_heading) {
  (void)v;  // the vertical coordinate does not enter the ground-plane position
  if (!(d > 0.0)) throw Error(ErrorKind::kNonPositiveDepth, "depth must be positive");
  const double lateral = (u - intrinsics.cx) * d / intrinsics.fx;
  const double beta = sector_bearing - agent_heading;
  const double c = std::cos(beta);
  const double s = std::sin(beta);
  return {d * c + lateral * s, -d * s + lateral * c};
}

namespace {

// Joints outside the image are reported at the clipped border with zero confidence.
PixelKeypoint image_keypoint(const Pose2& agent, int sector, const Vec2& world, double height, double visibility,
                             const CameraIntrinsics& intrinsics) {
  PixelKeypoint kp{intrinsics.cx, intrinsics.cy, 0.0};
  double d = 0.0;
  if (!project_point(agent, sector, world, height, intrinsics, kp.u, kp.v, d)) return {intrinsics.cx, intrinsics.cy, 0.0};
  const double w = intrinsics.width;
  const double h = intrinsics.height;
  if (kp.u >= 0.0 && kp.u <= w && kp.v >= 0.0 && kp.v <= h) {
    kp.confidence = visibility;
  } else {
    kp.u = std::clamp(kp.u, 0.0, w);
    kp.v = std::clamp(kp.v, 0.0, h);
  }
  return kp;
}

}  // namespace

std::array<double, kKeypointValues> project_skeleton(const Pose2& agent, int sector, const Skeleton& skeleton,
                                                     double body_scale, const CameraIntrinsics& intrinsics) {
  std::array<double, kKeypointValues> out{};
  for (int j = 0; j < kNumJoints; ++j) {
    const Keypoint& joint = skeleton[static_cast<std::size_t>(j)];
    const PixelKeypoint kp =
        image_keypoint(agent, sector, joint.position, joint_height(j, body_scale), joint.visibility, intrinsics);
    out[static_cast<std::size_t>(3 * j)] = kp.u / intrinsics.width;
    out[static_cast<std::size_t>(3 * j + 1)] = kp.v / intrinsics.height;
    out[static_cast<std::size_t>(3 * j + 2)] = kp.confidence;
  }
  return out;
}

namespace {

constexpr double kRayStep = 0.05;
constexpr double kPedestrianBodyRadius = 0.25;

double cast_ray(const WorldMap& map, const Vec2& origin, double angle, const SimState& state,
                const Episode& episode) {
  const Vec2 dir{std::cos(angle), std::sin(angle)};
  double hit = kMaxDepthRange;
  const int steps = static_cast<int>(std::round(kMaxDepthRange / kRayStep));
  for (int i = 1; i <= steps; ++i) {
    const double r = i * kRayStep;
    const Vec2 p = origin + dir * r;
    if (!map.bounds().contains(p) || map.occupied_at(p)) {
      hit = r;
      break;
    }
  }
  // Pedestrians show up in depth as discs.
  for (std::size_t i = 0; i < state.pedestrians.size(); ++i) {
    const double radius = kPedestrianBodyRadius * episode.pedestrians[i].body_scale;
    const Vec2 oc = state.pedestrians[i].position - origin;
    const double along = oc.dot(dir);
    const double perp2 = oc.squared_norm() - along * along;
    if (perp2 > radius * radius) continue;
    const double entry = along - std::sqrt(radius * radius - perp2);
    if (entry > 0.0 && entry < hit) hit = entry;
  }
  return hit;
}

Vec2 jitter(const Vec2& p, double sigma, Rng& rng) {
  if (sigma <= 0.0) return p;
  const double dx = sigma * rng.gaussian();
  const double dy = sigma * rng.gaussian();
  return {p.x + dx, p.y + dy};
}

}  // namespace

PanoramicObservation observe(const SimState& state, const Episode& episode, const CameraIntrinsics& intrinsics,
                             double noise_sigma, Rng& rng) {
  const WorldMap& map = *episode.map;
  const Pose2& agent = state.agent;
  const Vec2 origin = agent.position();
  PanoramicObservation obs;
  obs.step = state.t;
  obs.agent = agent;

  for (int k = 0; k < kNumSectors; ++k) {
    SectorObservation& sector = obs.sectors[static_cast<std::size_t>(k)];
    const double beta = sector_bearing(agent, k);
    for (int i = 0; i < kDepthRays; ++i) {
      const double angle = beta - 0.5 * kSectorWidth + (i + 0.5) * kSectorWidth / kDepthRays;
      sector.depths[static_cast<std::size_t>(i)] = cast_ray(map, origin, angle, state, episode);
    }
  }

  for (const MapObject& obj : map.objects()) {
    const Vec2 rel = obj.position - origin;
    const double range = rel.norm();
    if (range > kMaxDepthRange || !line_of_sight(map, origin, obj.position)) continue;
    const int k = sector_of_relative_bearing(std::atan2(rel.y, rel.x) - agent.heading);
    const int slot = *object_class_index(obj.label);
    obs.sectors[static_cast<std::size_t>(k)].histogram[static_cast<std::size_t>(slot)] += std::min(1.0, 1.0 / range);
  }

  for (std::size_t i = 0; i < episode.pedestrians.size(); ++i) {
    const Pedestrian& ped = episode.pedestrians[i];
    const PedestrianState& ps = state.pedestrians[i];
    const Vec2 rel = ps.position - origin;
    const double range = rel.norm();
    if (range > kDetectionRange || range < 1e-6) continue;
    if (!line_of_sight(map, origin, ps.position)) continue;
    const int k = sector_of_relative_bearing(std::atan2(rel.y, rel.x) - agent.heading);

    HumanDetection det;
    det.sector = k;
    det.truth_label = ped.script.activity_label;
    det.source_id = ped.id;
    const Vec2 center = jitter(ps.position, noise_sigma, rng);
    if (!project_point(agent, k, center, body_center_height(ped.body_scale), intrinsics, det.u, det.v, det.depth)) {
      continue;
    }
    const Skeleton skel = skeleton_at(ps, ped.body_scale);
    for (int j = 0; j < kNumJoints; ++j) {
      const Vec2 q = jitter(skel[static_cast<std::size_t>(j)].position, noise_sigma, rng);
      det.keypoints[static_cast<std::size_t>(j)] = image_keypoint(agent, k, q, joint_height(j, ped.body_scale),
                                                                  skel[static_cast<std::size_t>(j)].visibility, intrinsics);
    }
    obs.sectors[static_cast<std::size_t>(k)].detections.push_back(std::move(det));
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Static features

const std::array<double, kStaticFeatureDim * kStaticFeatureDim>& static_projection() {
  static const auto kMatrix = [] {
    std::array<double, kStaticFeatureDim * kStaticFeatureDim> m{};
    Rng rng(0x5ec7042f00d5eedULL);
    const double scale = std::sqrt(3.0 / kStaticFeatureDim);
    for (double& w : m) w = rng.uniform(-1.0, 1.0) * scale;
    // The histogram block must be injective so that object counts are never lost.
    Eigen::MatrixXd block(kStaticFeatureDim, kHistogramSlots);
    for (int r = 0; r < kStaticFeatureDim; ++r) {
      for (int c = 0; c < kHistogramSlots; ++c) block(r, c) = m[static_cast<std::size_t>(r * kStaticFeatureDim + kDepthRays + c)];
    }
    if (Eigen::FullPivLU<Eigen::MatrixXd>(block).rank() != kHistogramSlots) {
      throw Error(ErrorKind::kInvalidConfig, "static projection histogram block is rank deficient");
    }
    return m;
  }();
  return kMatrix;
}

Eigen::VectorXd static_sector_feature(const SectorObservation& sector, const SensingMode& mode) {
  std::array<double, kStaticFeatureDim> input{};
  if (mode.depth) {
    for (int i = 0; i < kDepthRays; ++i) input[static_cast<std::size_t>(i)] = sector.depths[static_cast<std::size_t>(i)] / kMaxDepthRange;
  }
  if (mode.rgb) {
    for (int c = 0; c < kHistogramSlots; ++c) {
      input[static_cast<std::size_t>(kDepthRays + c)] = std::min(sector.histogram[static_cast<std::size_t>(c)], 1.0);
    }
  }
  const auto& w = static_projection();
  Eigen::VectorXd out(kStaticFeatureDim);
  for (int r = 0; r < kStaticFeatureDim; ++r) {
    double acc = 0.0;
    for (int c = 0; c < kStaticFeatureDim; ++c) acc += w[static_cast<std::size_t>(r * kStaticFeatureDim + c)] * input[static_cast<std::size_t>(c)];
    out[r] = acc;
  }
  return out;
}

Eigen::VectorXd panorama_feature(const PanoramicObservation& obs, const SensingMode& mode) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(kStaticFeatureDim);
  for (const auto& s : obs.sectors) acc += static_sector_feature(s, mode);
  return acc / static_cast<double>(kNumSectors);
}

// ---------------------------------------------------------------------------
// Window collection

namespace {

TrackFrame to_frame(const HumanDetection& det, const Pose2& agent, const CameraIntrinsics& intrinsics,
                    const SensingMode& mode, std::int64_t step) {
  TrackFrame f;
  const double d = mode.depth ? det.depth : mode.nominal_depth;
  f.position = backproject(det.u, det.v, d, intrinsics, sector_bearing(agent, det.sector), agent.heading);
  for (int j = 0; j < kNumJoints; ++j) {
    const PixelKeypoint& kp = det.keypoints[static_cast<std::size_t>(j)];
    f.keypoints[static_cast<std::size_t>(3 * j)] = kp.u / intrinsics.width;
    f.keypoints[static_cast<std::size_t>(3 * j + 1)] = kp.v / intrinsics.height;
    f.keypoints[static_cast<std::size_t>(3 * j + 2)] = kp.confidence;
  }
  f.step = step;
  f.sector = det.sector;
  return f;
}

void associate(std::vector<Track>& tracks, const PanoramicObservation& obs, const CameraIntrinsics& intrinsics,
               const SensingMode& mode, int& next_id) {
  std::vector<const HumanDetection*> dets;
  std::vector<TrackFrame> frames;
  for (const auto& sector : obs.sectors) {
    for (const auto& det : sector.detections) {
      dets.push_back(&det);
      frames.push_back(to_frame(det, obs.agent, intrinsics, mode, obs.step));
    }
  }
  struct Pair {
    double dist;
    int track_id;
    std::size_t track;
    std::size_t det;
  };
  std::vector<Pair> pairs;
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    const Vec2 last = tracks[t].frames.back().position;
    for (std::size_t d = 0; d < frames.size(); ++d) {
      const double dist = distance(last, frames[d].position);
      if (dist <= kAssociationGate) pairs.push_back({dist, tracks[t].id, t, d});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.track_id != b.track_id) return a.track_id < b.track_id;
    return a.det < b.det;
  });
  std::vector<bool> track_used(tracks.size(), false);
  std::vector<bool> det_used(frames.size(), false);
  for (const Pair& p : pairs) {
    if (track_used[p.track] || det_used[p.det]) continue;
    track_used[p.track] = true;
    det_used[p.det] = true;
    tracks[p.track].frames.push_back(frames[p.det]);
    tracks[p.track].truth_label = dets[p.det]->truth_label;
    tracks[p.track].source_id = dets[p.det]->source_id;
  }
  for (std::size_t d = 0; d < frames.size(); ++d) {
    if (det_used[d]) continue;
    Track t;
    t.id = next_id++;
    t.frames.push_back(frames[d]);
    t.truth_label = dets[d]->truth_label;
    t.source_id = dets[d]->source_id;
    tracks.push_back(std::move(t));
  }
}

}  // namespace

WindowResult collect_window(const Episode& episode, const SimState& state, const PanoramicObservation& first, int m,
                            const CameraIntrinsics& intrinsics, double noise_sigma, const SensingMode& mode, Rng& rng) {
  WindowResult out;
  out.window.m = m;
  std::vector<Track> tracks;
  int next_id = 0;
  associate(tracks, first, intrinsics, mode, next_id);
  SimState current = state;
  out.last_observation = first;
  for (int frame = 1; frame < m; ++frame) {
    StepOutcome held = hold_agent(episode, current, 1);
    current = held.state;
    out.collisions.insert(out.collisions.end(), held.collisions.begin(), held.collisions.end());
    out.last_observation = observe(current, episode, intrinsics, noise_sigma, rng);
    associate(tracks, out.last_observation, intrinsics, mode, next_id);
  }
  // The m-th world step closes the pause.
  StepOutcome held = hold_agent(episode, current, 1);
  out.end_state = held.state;
  out.collisions.insert(out.collisions.end(), held.collisions.begin(), held.collisions.end());

  for (Track& t : tracks) {
    if (static_cast<int>(t.frames.size()) >= kMinTrackFrames) out.window.tracks.push_back(std::move(t));
  }
  return out;
}

}  // namespace hcsg
