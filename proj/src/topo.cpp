#include "hcsg/topo.hpp"

#include <algorithm>
#include <limits>
#include <queue>

namespace hcsg {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::kCurrent: return "current";
    case NodeKind::kVisited: return "visited";
    case NodeKind::kCandidate: return "candidate";
  }
  return "candidate";
}

FusionLayer FusionLayer::add_to(ParamStore& params) {
  FusionLayer layer;
  layer.w1 = params.add("fusion.w1", kFusionHiddenDim, kFusionInputDim);
  layer.b1 = params.add("fusion.b1", kFusionHiddenDim, 1);
  layer.w2 = params.add("fusion.w2", kNodeFeatureDim, kFusionHiddenDim);
  layer.b2 = params.add("fusion.b2", kNodeFeatureDim, 1);
  return layer;
}

void FusionLayer::init(ParamStore& params, Rng& rng) const {
  fill_uniform(params, w1, std::sqrt(6.0 / kFusionInputDim), rng);
  fill_uniform(params, w2, std::sqrt(6.0 / kFusionHiddenDim), rng);
  params.vec(b1).setZero();
  params.vec(b2).setZero();
}

Eigen::MatrixXd FusionLayer::forward(const ParamStore& params, const Eigen::MatrixXd& input, Cache* cache) const {
  if (input.rows() != kFusionInputDim) throw Error(ErrorKind::kDimensionMismatch, "fusion input must have 192 rows");
  Eigen::MatrixXd pre = params.mat(w1) * input;
  pre.colwise() += params.vec(b1);
  Eigen::MatrixXd hidden = pre.cwiseMax(0.0);
  Eigen::MatrixXd out = params.mat(w2) * hidden;
  out.colwise() += params.vec(b2);
  if (cache) {
    cache->input = input;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out;
}

void FusionLayer::backward(const ParamStore& params, const Cache& cache, const Eigen::MatrixXd& d_out,
                           ParamStore& grad) const {
  grad.mat(w2).noalias() += d_out * cache.hidden.transpose();
  grad.vec(b2) += d_out.rowwise().sum();
  Eigen::MatrixXd d_hidden = params.mat(w2).transpose() * d_out;
  d_hidden = d_hidden.cwiseProduct((cache.pre.array() > 0.0).cast<double>().matrix());
  grad.mat(w1).noalias() += d_hidden * cache.input.transpose();
  grad.vec(b1) += d_hidden.rowwise().sum();
}

Eigen::VectorXd human_summary(std::vector<HumanFeature> humans) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kHumanFeatureDim);
  if (humans.empty()) return sum;
  std::stable_sort(humans.begin(), humans.end(), [](const HumanFeature& a, const HumanFeature& b) { return a.id < b.id; });
  for (const HumanFeature& h : humans) {
    if (h.geo.size() != kGeoFeatureDim || h.sem.size() != kSemFeatureDim) {
      throw Error(ErrorKind::kDimensionMismatch, "human features must be 128-dimensional");
    }
    sum += h.geo + h.sem;
  }
  return sum / static_cast<double>(humans.size());
}

Eigen::VectorXd fuse(const Eigen::VectorXd& static_feature, const std::vector<HumanFeature>& humans,
                     const ParamStore& params, const FusionLayer& layer) {
  if (static_feature.size() != kStaticFeatureDim) {
    throw Error(ErrorKind::kDimensionMismatch, "static feature must be 64-dimensional");
  }
  Eigen::MatrixXd input(kFusionInputDim, 1);
  input.col(0) << static_feature, human_summary(humans);
  return layer.forward(params, input).col(0);
}

// ---------------------------------------------------------------------------

bool TopoGraph::has_edge(int a, int b) const { return edges_.count({std::min(a, b), std::max(a, b)}) > 0; }

int TopoGraph::add_node(const Vec2& position, NodeKind kind, std::int64_t step) {
  TopoNode n;
  n.id = static_cast<int>(nodes_.size());
  n.position = position;
  n.kind = kind;
  n.last_updated = step;
  nodes_.push_back(std::move(n));
  adjacency_.emplace_back();
  return nodes_.back().id;
}

void TopoGraph::add_edge(int a, int b) {
  if (a == b || has_edge(a, b)) return;
  const double len = distance(node(a).position, node(b).position);
  if (!(len > 0.0)) return;
  edges_[{std::min(a, b), std::max(a, b)}] = len;
  adjacency_[static_cast<std::size_t>(a)].push_back({b, len});
  adjacency_[static_cast<std::size_t>(b)].push_back({a, len});
}

void TopoGraph::set_current(int id) {
  if (id == current_) return;
  if (current_ >= 0) node(current_).kind = NodeKind::kVisited;
  current_ = id;
  node(id).kind = NodeKind::kCurrent;
}

std::vector<double> TopoGraph::geodesic_from(int source) const {
  std::vector<double> dist(nodes_.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[static_cast<std::size_t>(source)] = 0.0;
  queue.push({0.0, source});
  while (!queue.empty()) {
    auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    for (auto [v, len] : adjacency_[static_cast<std::size_t>(u)]) {
      const double nd = d + len;
      if (nd < dist[static_cast<std::size_t>(v)]) {
        dist[static_cast<std::size_t>(v)] = nd;
        queue.push({nd, v});
      }
    }
  }
  return dist;
}

int TopoGraph::nearest_node(const Vec2& p, double radius) const {
  int best = -1;
  double best_d = 0.0;
  for (const TopoNode& n : nodes_) {
    const double d = distance(n.position, p);
    if (d <= radius && (best < 0 || d < best_d)) {
      best = n.id;
      best_d = d;
    }
  }
  return best;
}

nlohmann::ordered_json TopoGraph::snapshot() const {
  nlohmann::ordered_json j;
  j["current"] = current_;
  j["actions"] = actions_;
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const TopoNode& n : nodes_) {
    nlohmann::ordered_json e;
    e["id"] = n.id;
    e["x"] = n.position.x;
    e["y"] = n.position.y;
    e["kind"] = std::string(to_string(n.kind));
    e["humans"] = n.human_count;
    e["static_norm"] = n.static_feature.norm();
    e["human_norm"] = n.human_summary.norm();
    e["fused_norm"] = n.fused.norm();
    nodes.push_back(std::move(e));
  }
  j["nodes"] = std::move(nodes);
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (const auto& [key, len] : edges_) edges.push_back({key.first, key.second, len});
  j["edges"] = std::move(edges);
  return j;
}

bool TopoGraph::operator==(const TopoGraph& other) const {
  if (nodes_.size() != other.nodes_.size() || edges_ != other.edges_ || current_ != other.current_ ||
      actions_ != other.actions_) {
    return false;
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const TopoNode& a = nodes_[i];
    const TopoNode& b = other.nodes_[i];
    if (a.position != b.position || a.kind != b.kind || a.static_feature != b.static_feature ||
        a.human_summary != b.human_summary || a.human_count != b.human_count || a.fused != b.fused ||
        a.last_updated != b.last_updated) {
      return false;
    }
  }
  return true;
}

void update_graph(TopoGraph& graph, const Pose2& agent, const std::vector<WaypointCandidate>& candidates,
                  const std::vector<Eigen::VectorXd>& candidate_features, const Eigen::VectorXd& current_feature,
                  std::int64_t step) {
  if (candidates.size() != candidate_features.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "one static feature per candidate expected");
  }
  int current = graph.nearest_node(agent.position(), kMergeRadius);
  if (current < 0) current = graph.add_node(agent.position(), NodeKind::kCurrent, step);
  graph.set_current(current);
  TopoNode& cur = graph.node(current);
  cur.static_feature = current_feature;
  cur.last_updated = step;

  std::vector<int> actions;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    int id = graph.nearest_node(candidates[i].position, kMergeRadius);
    if (id == current) continue;
    if (id < 0) id = graph.add_node(candidates[i].position, NodeKind::kCandidate, step);
    TopoNode& n = graph.node(id);
    n.static_feature = candidate_features[i];
    n.last_updated = step;
    graph.add_edge(current, id);
    if (std::find(actions.begin(), actions.end(), id) == actions.end()) actions.push_back(id);
  }
  graph.set_actions(std::move(actions));
}

void assign_humans(TopoGraph& graph, const std::vector<HumanFeature>& humans) {
  if (humans.empty() || graph.empty()) return;
  std::vector<int> pool = graph.actions();
  if (graph.current() >= 0) pool.push_back(graph.current());
  std::sort(pool.begin(), pool.end());
  std::map<int, std::vector<HumanFeature>> assigned;
  for (const HumanFeature& h : humans) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int id : pool) {
      const double d = distance(graph.node(id).position, h.position);
      if (d < best_d) {  // ascending ids: strict comparison keeps the lowest on ties
        best_d = d;
        best = id;
      }
    }
    if (best >= 0) assigned[best].push_back(h);
  }
  for (auto& [id, list] : assigned) {
    TopoNode& n = graph.node(id);
    n.human_count = static_cast<int>(list.size());
    n.human_summary = human_summary(std::move(list));
  }
}

void clear_current_humans(TopoGraph& graph) {
  if (graph.current() < 0) return;
  TopoNode& n = graph.node(graph.current());
  n.human_summary.setZero();
  n.human_count = 0;
}

void refresh_fused(TopoGraph& graph, const ParamStore& params, const FusionLayer& layer) {
  const auto n = static_cast<Eigen::Index>(graph.nodes().size());
  if (n == 0) return;
  Eigen::MatrixXd input(kFusionInputDim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const TopoNode& node = graph.node(static_cast<int>(i));
    input.col(i) << node.static_feature, node.human_summary;
  }
  const Eigen::MatrixXd out = layer.forward(params, input);
  for (Eigen::Index i = 0; i < n; ++i) graph.node(static_cast<int>(i)).fused = out.col(i);
}

InstructionTokens tokenize_instruction(const std::string& text) {
  InstructionTokens out;
  for (const std::string& tok : tokenize(text)) {
    if (static_cast<int>(out.ids.size()) >= kMaxInstructionTokens) break;
    out.ids.push_back(static_cast<int>(fnv1a64(tok) % kVocabSize));
  }
  return out;
}

}  // namespace hcsg
