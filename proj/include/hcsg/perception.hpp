#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcsg/world.hpp"

namespace hcsg {

inline constexpr int kNumSectors = 12;
inline constexpr double kSectorWidth = 2.0 * kPi / kNumSectors;
inline constexpr int kDepthRays = 16;
inline constexpr int kHistogramSlots = 48;
inline constexpr int kStaticFeatureDim = 64;
inline constexpr double kMaxDepthRange = 10.0;
inline constexpr double kDetectionRange = 5.0;
inline constexpr int kDefaultWindowFrames = 6;
inline constexpr double kAssociationGate = 0.6;
inline constexpr int kMinTrackFrames = 3;
inline constexpr int kKeypointValues = 3 * kNumJoints;  // 51

struct CameraIntrinsics {
  double fx = 100.0;
  double fy = 100.0;
  double cx = 112.0;
  double cy = 112.0;
  int width = 224;
  int height = 224;
  double mount_height = 1.25;

  /// Throws Error(kInvalidConfig) on non-positive focal lengths or a principal
  /// point outside the image.
  void validate() const;
};

struct PixelKeypoint {
  double u = 0.0;
  double v = 0.0;
  double confidence = 0.0;
};

struct HumanDetection {
  int sector = 0;
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  std::array<PixelKeypoint, kNumJoints> keypoints{};
  // Ground-truth activity; only the rule-based interpreter reads it.
  std::string truth_label;
  // Simulator bookkeeping (pedestrian id), used for training targets and
  // collision attribution; never an input to the policy.
  int source_id = -1;
};

struct SectorObservation {
  std::array<double, kDepthRays> depths{};
  // Per class, apparent size min(1, 1 m / range) summed over visible objects.
  std::array<double, kHistogramSlots> histogram{};
  std::vector<HumanDetection> detections;
};

struct PanoramicObservation {
  std::int64_t step = 0;
  Pose2 agent;
  std::array<SectorObservation, kNumSectors> sectors;

  std::size_t detection_count() const;
};

/// Which input modalities feed the static features and back-projection.
struct SensingMode {
  bool depth = true;
  bool rgb = true;
  double nominal_depth = 3.0;  // used for back-projection when depth is off
};

/// World bearing of sector k's optical axis.
inline double sector_bearing(const Pose2& agent, int sector) { return agent.heading + sector * kSectorWidth; }
/// Sector whose 30 deg field of view contains the given bearing relative to the heading.
int sector_of_relative_bearing(double relative);

PanoramicObservation observe(const SimState& state, const Episode& episode, const CameraIntrinsics& intrinsics,
                             double noise_sigma, Rng& rng);

/// Pinhole projection of a world point (at height `height`) into sector `sector`'s camera.
/// Returns false when the point is behind the image plane.
bool project_point(const Pose2& agent, int sector, const Vec2& world, double height,
                   const CameraIntrinsics& intrinsics, double& u, double& v, double& depth);

/// Agent-centric (forward, right) position of the pixel (u, v) at optical depth d.
/// Throws Error(kNonPositiveDepth) for d <= 0.
Vec2 backproject(double u, double v, double d, const CameraIntrinsics& intrinsics, double sector_bearing,
                 double agent_heading);

/// 17 x (u/width, v/height, confidence) of a skeleton projected into one sector camera.
std::array<double, kKeypointValues> project_skeleton(const Pose2& agent, int sector, const Skeleton& skeleton,
                                                     double body_scale, const CameraIntrinsics& intrinsics);

/// Depth profile (depth/10) and object histogram clipped to 1 under a fixed seeded
/// 64x64 random projection. Plain loops in fixed order keep it bit-stable.
Eigen::VectorXd static_sector_feature(const SectorObservation& sector, const SensingMode& mode = {});
/// Mean of the 12 sector features; the panorama summary used for the current node.
Eigen::VectorXd panorama_feature(const PanoramicObservation& obs, const SensingMode& mode = {});
/// The projection itself (row-major 64 x 64), exposed for rank checks.
const std::array<double, kStaticFeatureDim * kStaticFeatureDim>& static_projection();

struct TrackFrame {
  Vec2 position;  // agent-centric, meters
  std::array<double, kKeypointValues> keypoints{};
  std::int64_t step = 0;
  int sector = 0;
};

struct Track {
  int id = 0;
  std::vector<TrackFrame> frames;
  std::string truth_label;
  int source_id = -1;
};

struct ObservationWindow {
  int m = kDefaultWindowFrames;
  std::vector<Track> tracks;  // ascending id
};

struct WindowResult {
  ObservationWindow window;
  SimState end_state;
  std::vector<CollisionEvent> collisions;
  PanoramicObservation last_observation;
};

/// Holds the agent for m world steps, using `first` as frame 1 and observing
/// after each of the first m-1 steps. Detections are back-projected and
/// associated to tracks by gated nearest neighbour; tracks with fewer than 3
/// frames are dropped.
WindowResult collect_window(const Episode& episode, const SimState& state, const PanoramicObservation& first, int m,
                            const CameraIntrinsics& intrinsics, double noise_sigma, const SensingMode& mode, Rng& rng);

}  // namespace hcsg
