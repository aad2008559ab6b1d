#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hcsg/nn.hpp"
#include "hcsg/topo.hpp"

namespace hcsg {

inline constexpr double kDefaultDistanceBias = 0.5;

/// Fusion layer, token embeddings, single-head cross-attention, one round of
/// distance-biased graph attention, and a shared FFN head with a STOP embedding.
/// The distance-bias scale alpha is a fixed hyperparameter, not trained.
class Scorer {
 public:
  Scorer() = default;
  explicit Scorer(std::uint64_t seed, double alpha = kDefaultDistanceBias);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  double alpha() const { return alpha_; }
  void set_alpha(double alpha) { alpha_ = alpha; }

  nlohmann::ordered_json to_json() const;
  void load_json(const nlohmann::json& j);

  FusionLayer fusion;
  int tokens = -1;  // 64 x 1024, one column per token id
  int wq = -1, wk = -1, wv = -1;
  int ffn_w1 = -1, ffn_b1 = -1, ffn_w2 = -1, ffn_b2 = -1;
  int stop = -1;

 private:
  ParamStore params_;
  double alpha_ = kDefaultDistanceBias;
};

/// Probabilities over graph.actions() followed by STOP.
struct Distribution {
  std::vector<int> actions;
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;

  int stop_index() const { return static_cast<int>(actions.size()); }
  int size() const { return static_cast<int>(probs.size()); }
  double entropy() const;
  int argmax() const;
};

struct ScoreCache {
  FusionLayer::Cache fusion;
  Eigen::MatrixXd f;        // fused, 64 x n
  Eigen::MatrixXd tok;      // 64 x L
  Eigen::MatrixXd k, v;     // 64 x L
  Eigen::MatrixXd q;        // 64 x n
  Eigen::MatrixXd attn;     // L x n
  Eigen::MatrixXd x;        // 64 x n
  std::vector<int> queries; // node ids: actions then current
  std::vector<std::vector<int>> keys;         // per query: attended node ids
  std::vector<Eigen::VectorXd> graph_weights;  // per query
  Eigen::MatrixXd y;        // 64 x (#queries)
  Eigen::MatrixXd head_in;  // 64 x (#actions + 1): FFN inputs
  Eigen::MatrixXd head_pre; // 64 x (#actions + 1)
};

/// Throws Error(kInvalidConfig) if the graph has no current node.
Distribution score(const TopoGraph& graph, const InstructionTokens& instruction, const Scorer& scorer,
                   ScoreCache* cache = nullptr);

/// Backpropagates d(loss)/d(logits) into `grad` (layout of scorer.params()).
void score_backward(const TopoGraph& graph, const InstructionTokens& instruction, const Scorer& scorer,
                    const ScoreCache& cache, const Eigen::VectorXd& d_logits, ParamStore& grad);

}  // namespace hcsg
