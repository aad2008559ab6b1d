#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hcsg/forecast.hpp"
#include "hcsg/nn.hpp"
#include "hcsg/semantic.hpp"

namespace hcsg {

inline constexpr int kNodeFeatureDim = 64;
inline constexpr int kHumanFeatureDim = kGeoFeatureDim;  // == kSemFeatureDim
inline constexpr int kFusionInputDim = kStaticFeatureDim + kHumanFeatureDim;
inline constexpr int kFusionHiddenDim = 128;
inline constexpr double kMergeRadius = 0.5;
inline constexpr int kVocabSize = 1024;
inline constexpr int kMaxInstructionTokens = 40;

static_assert(kGeoFeatureDim == kSemFeatureDim, "geo and sem features are summed element-wise");

enum class NodeKind { kCurrent, kVisited, kCandidate };
std::string_view to_string(NodeKind kind);

struct TopoNode {
  int id = 0;
  Vec2 position;
  NodeKind kind = NodeKind::kCandidate;
  Eigen::VectorXd static_feature = Eigen::VectorXd::Zero(kStaticFeatureDim);
  Eigen::VectorXd human_summary = Eigen::VectorXd::Zero(kHumanFeatureDim);
  int human_count = 0;
  Eigen::VectorXd fused = Eigen::VectorXd::Zero(kNodeFeatureDim);
  std::int64_t last_updated = 0;
};

/// One human as seen by the graph: features and a world position, no labels.
struct HumanFeature {
  int id = 0;
  Vec2 position;  // world frame
  Eigen::VectorXd geo;
  Eigen::VectorXd sem;
};

/// Two-layer perceptron [static ; summary] -> 64 living in a shared ParamStore.
struct FusionLayer {
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;

  static FusionLayer add_to(ParamStore& params);
  void init(ParamStore& params, Rng& rng) const;

  struct Cache {
    Eigen::MatrixXd input, pre, hidden;
  };
  /// Columns are nodes.
  Eigen::MatrixXd forward(const ParamStore& params, const Eigen::MatrixXd& input, Cache* cache = nullptr) const;
  void backward(const ParamStore& params, const Cache& cache, const Eigen::MatrixXd& d_out, ParamStore& grad) const;
};

/// (1/J) sum of (geo + sem) in ascending id order; zero when empty.
Eigen::VectorXd human_summary(std::vector<HumanFeature> humans);

/// Throws Error(kDimensionMismatch) on wrong feature widths.
Eigen::VectorXd fuse(const Eigen::VectorXd& static_feature, const std::vector<HumanFeature>& humans,
                     const ParamStore& params, const FusionLayer& layer);

class TopoGraph {
 public:
  bool empty() const { return nodes_.empty(); }
  const std::vector<TopoNode>& nodes() const { return nodes_; }
  const TopoNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  TopoNode& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  int current() const { return current_; }
  /// Nodes proposed by the latest update, in candidate order, without duplicates.
  const std::vector<int>& actions() const { return actions_; }
  const std::map<std::pair<int, int>, double>& edges() const { return edges_; }
  bool has_edge(int a, int b) const;

  int add_node(const Vec2& position, NodeKind kind, std::int64_t step);
  void add_edge(int a, int b);
  /// Makes `id` current and the previous current node visited.
  void set_current(int id);
  void set_actions(std::vector<int> actions) { actions_ = std::move(actions); }

  /// Shortest edge-path lengths from `source` to every node (+inf if unreachable).
  std::vector<double> geodesic_from(int source) const;
  /// Existing node nearest to p within `radius`, lowest id on ties; -1 if none.
  int nearest_node(const Vec2& p, double radius) const;

  nlohmann::ordered_json snapshot() const;
  bool operator==(const TopoGraph& other) const;

 private:
  std::vector<TopoNode> nodes_;
  std::map<std::pair<int, int>, double> edges_;
  std::vector<std::vector<std::pair<int, double>>> adjacency_;
  int current_ = -1;
  std::vector<int> actions_;
};

/// Locates (or creates) the current node at the agent position, merges each
/// candidate into an existing node within kMergeRadius or creates a candidate
/// node, connects current to every proposed node, and stores the proposals as
/// the action set. Features are written as given; fused features are left to
/// refresh_fused.
void update_graph(TopoGraph& graph, const Pose2& agent, const std::vector<WaypointCandidate>& candidates,
                  const std::vector<Eigen::VectorXd>& candidate_features, const Eigen::VectorXd& current_feature,
                  std::int64_t step);

/// Assigns each human to the nearest action-or-current node (lowest id on
/// ties) and recomputes the summaries of the nodes that received humans.
void assign_humans(TopoGraph& graph, const std::vector<HumanFeature>& humans);

/// Clears the current node's human summary (it is being re-observed).
void clear_current_humans(TopoGraph& graph);

/// Recomputes every node's fused feature from its stored inputs.
void refresh_fused(TopoGraph& graph, const ParamStore& params, const FusionLayer& layer);

struct InstructionTokens {
  std::vector<int> ids;
};

/// Hashed token ids (FNV-1a mod 1024), at most 40.
InstructionTokens tokenize_instruction(const std::string& text);

}  // namespace hcsg
