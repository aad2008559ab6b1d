#include "hcsg/policy.hpp"

#include <cmath>
#include <limits>

namespace hcsg {

namespace {

constexpr double kAttentionScale = 0.125;  // 1 / sqrt(64)

}  // namespace

Scorer::Scorer(std::uint64_t seed, double alpha) : alpha_(alpha) {
  fusion = FusionLayer::add_to(params_);
  tokens = params_.add("tokens", kNodeFeatureDim, kVocabSize);
  wq = params_.add("attn.wq", kNodeFeatureDim, kNodeFeatureDim);
  wk = params_.add("attn.wk", kNodeFeatureDim, kNodeFeatureDim);
  wv = params_.add("attn.wv", kNodeFeatureDim, kNodeFeatureDim);
  ffn_w1 = params_.add("ffn.w1", kNodeFeatureDim, kNodeFeatureDim);
  ffn_b1 = params_.add("ffn.b1", kNodeFeatureDim, 1);
  ffn_w2 = params_.add("ffn.w2", 1, kNodeFeatureDim);
  ffn_b2 = params_.add("ffn.b2", 1, 1);
  stop = params_.add("stop", kNodeFeatureDim, 1);

  Rng rng(seed);
  fusion.init(params_, rng);
  const double glorot = std::sqrt(3.0 / kNodeFeatureDim);
  fill_uniform(params_, tokens, 0.5, rng);
  for (int block : {wq, wk, wv}) fill_uniform(params_, block, glorot, rng);
  fill_uniform(params_, ffn_w1, std::sqrt(6.0 / kNodeFeatureDim), rng);
  fill_uniform(params_, ffn_w2, glorot, rng);
  fill_uniform(params_, stop, 0.5, rng);
}

nlohmann::ordered_json Scorer::to_json() const {
  nlohmann::ordered_json j;
  j["alpha"] = alpha_;
  j["params"] = params_.to_json();
  return j;
}

void Scorer::load_json(const nlohmann::json& j) {
  ParamStore next = params_;
  next.load_json(j.at("params"));
  alpha_ = j.at("alpha").get<double>();
  params_ = std::move(next);
}

double Distribution::entropy() const {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  }
  return h;
}

int Distribution::argmax() const {
  int best = 0;
  for (int i = 1; i < size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

Distribution score(const TopoGraph& graph, const InstructionTokens& instruction, const Scorer& scorer,
                   ScoreCache* cache) {
  if (graph.current() < 0) throw Error(ErrorKind::kInvalidConfig, "graph has no current node");
  ScoreCache local;
  ScoreCache& c = cache ? *cache : local;
  const ParamStore& p = scorer.params();
  const auto n = static_cast<Eigen::Index>(graph.nodes().size());

  Eigen::MatrixXd z(kFusionInputDim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const TopoNode& node = graph.node(static_cast<int>(i));
    z.col(i) << node.static_feature, node.human_summary;
  }
  c.f = scorer.fusion.forward(p, z, &c.fusion);

  // Cross-attention of every node over the instruction tokens.
  const auto len = static_cast<Eigen::Index>(instruction.ids.size());
  c.tok.resize(kNodeFeatureDim, len);
  const auto table = p.mat(scorer.tokens);
  for (Eigen::Index t = 0; t < len; ++t) {
    const int id = instruction.ids[static_cast<std::size_t>(t)];
    if (id < 0 || id >= kVocabSize) throw Error(ErrorKind::kDimensionMismatch, "token id out of range");
    c.tok.col(t) = table.col(id);
  }
  c.x = c.f;
  if (len > 0) {
    c.k = p.mat(scorer.wk) * c.tok;
    c.v = p.mat(scorer.wv) * c.tok;
    c.q = p.mat(scorer.wq) * c.f;
    c.attn = kAttentionScale * c.k.transpose() * c.q;
    for (Eigen::Index i = 0; i < n; ++i) softmax_inplace(c.attn.col(i));
    c.x += c.v * c.attn;
  }

  // Graph attention for the query nodes (actions, then current).
  const std::vector<int>& actions = graph.actions();
  c.queries = actions;
  c.queries.push_back(graph.current());
  const auto nq = static_cast<Eigen::Index>(c.queries.size());
  c.keys.assign(c.queries.size(), {});
  c.graph_weights.assign(c.queries.size(), Eigen::VectorXd());
  c.y.resize(kNodeFeatureDim, nq);
  for (Eigen::Index qi = 0; qi < nq; ++qi) {
    const int i = c.queries[static_cast<std::size_t>(qi)];
    const std::vector<double> dist = graph.geodesic_from(i);
    auto& keys = c.keys[static_cast<std::size_t>(qi)];
    for (int j = 0; j < static_cast<int>(n); ++j) {
      if (j != i && std::isfinite(dist[static_cast<std::size_t>(j)])) keys.push_back(j);
    }
    Eigen::VectorXd w(static_cast<Eigen::Index>(keys.size()));
    for (std::size_t kj = 0; kj < keys.size(); ++kj) {
      const int j = keys[kj];
      w[static_cast<Eigen::Index>(kj)] =
          kAttentionScale * c.x.col(i).dot(c.x.col(j)) - scorer.alpha() * dist[static_cast<std::size_t>(j)];
    }
    softmax_inplace(w);
    Eigen::VectorXd y = c.x.col(i);
    for (std::size_t kj = 0; kj < keys.size(); ++kj) y += w[static_cast<Eigen::Index>(kj)] * c.x.col(keys[kj]);
    c.y.col(qi) = y;
    c.graph_weights[static_cast<std::size_t>(qi)] = std::move(w);
  }

  // Shared FFN head; STOP reads the current node plus the STOP embedding.
  const auto na = static_cast<Eigen::Index>(actions.size());
  c.head_in.resize(kNodeFeatureDim, na + 1);
  c.head_in.leftCols(na) = c.y.leftCols(na);
  c.head_in.col(na) = c.y.col(na) + p.vec(scorer.stop);
  c.head_pre = p.mat(scorer.ffn_w1) * c.head_in;
  c.head_pre.colwise() += p.vec(scorer.ffn_b1);
  const Eigen::MatrixXd hidden = c.head_pre.cwiseMax(0.0);
  Eigen::RowVectorXd logits = p.mat(scorer.ffn_w2) * hidden;
  logits.array() += p.vec(scorer.ffn_b2)[0];

  Distribution out;
  out.actions = actions;
  out.logits = logits.transpose();
  out.probs = out.logits;
  softmax_inplace(out.probs);
  return out;
}

void score_backward(const TopoGraph& graph, const InstructionTokens& instruction, const Scorer& scorer,
                    const ScoreCache& c, const Eigen::VectorXd& d_logits, ParamStore& grad) {
  const ParamStore& p = scorer.params();
  if (!grad.same_layout(p)) throw Error(ErrorKind::kShapeMismatch, "gradient layout differs from scorer");
  const auto na = static_cast<Eigen::Index>(graph.actions().size());
  if (d_logits.size() != na + 1) throw Error(ErrorKind::kShapeMismatch, "one logit gradient per action plus STOP");
  const auto n = c.f.cols();

  // FFN head.
  const Eigen::MatrixXd hidden = c.head_pre.cwiseMax(0.0);
  const Eigen::RowVectorXd ds = d_logits.transpose();
  grad.mat(scorer.ffn_w2).noalias() += ds * hidden.transpose();
  grad.vec(scorer.ffn_b2)[0] += ds.sum();
  Eigen::MatrixXd d_pre = p.mat(scorer.ffn_w2).transpose() * ds;
  d_pre = d_pre.cwiseProduct((c.head_pre.array() > 0.0).cast<double>().matrix());
  grad.mat(scorer.ffn_w1).noalias() += d_pre * c.head_in.transpose();
  grad.vec(scorer.ffn_b1) += d_pre.rowwise().sum();
  const Eigen::MatrixXd d_head = p.mat(scorer.ffn_w1).transpose() * d_pre;

  Eigen::MatrixXd dy(kNodeFeatureDim, na + 1);
  dy = d_head;
  grad.vec(scorer.stop) += d_head.col(na);

  // Graph attention.
  Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(kNodeFeatureDim, n);
  for (std::size_t qi = 0; qi < c.queries.size(); ++qi) {
    const int i = c.queries[qi];
    const Eigen::VectorXd dyi = dy.col(static_cast<Eigen::Index>(qi));
    dx.col(i) += dyi;
    const auto& keys = c.keys[qi];
    const Eigen::VectorXd& w = c.graph_weights[qi];
    if (keys.empty()) continue;
    Eigen::VectorXd g(w.size());
    for (std::size_t kj = 0; kj < keys.size(); ++kj) g[static_cast<Eigen::Index>(kj)] = dyi.dot(c.x.col(keys[kj]));
    const double gbar = w.dot(g);
    for (std::size_t kj = 0; kj < keys.size(); ++kj) {
      const int j = keys[kj];
      const double wj = w[static_cast<Eigen::Index>(kj)];
      const double dl = wj * (g[static_cast<Eigen::Index>(kj)] - gbar);
      dx.col(j) += wj * dyi + dl * kAttentionScale * c.x.col(i);
      dx.col(i) += dl * kAttentionScale * c.x.col(j);
    }
  }

  // x = f + cross-attention context.
  Eigen::MatrixXd df = dx;
  const auto len = c.tok.cols();
  if (len > 0) {
    const Eigen::MatrixXd dv = dx * c.attn.transpose();
    const Eigen::MatrixXd da = c.v.transpose() * dx;
    Eigen::MatrixXd dscore = c.attn.cwiseProduct(da);
    const Eigen::RowVectorXd colsum = dscore.colwise().sum();
    dscore -= c.attn * colsum.asDiagonal();
    const Eigen::MatrixXd dk = kAttentionScale * c.q * dscore.transpose();
    const Eigen::MatrixXd dq = kAttentionScale * c.k * dscore;
    grad.mat(scorer.wq).noalias() += dq * c.f.transpose();
    df.noalias() += p.mat(scorer.wq).transpose() * dq;
    grad.mat(scorer.wk).noalias() += dk * c.tok.transpose();
    grad.mat(scorer.wv).noalias() += dv * c.tok.transpose();
    const Eigen::MatrixXd dtok = p.mat(scorer.wk).transpose() * dk + p.mat(scorer.wv).transpose() * dv;
    auto table = grad.mat(scorer.tokens);
    for (Eigen::Index t = 0; t < len; ++t) table.col(instruction.ids[static_cast<std::size_t>(t)]) += dtok.col(t);
  }
  scorer.fusion.backward(p, c.fusion, df, grad);
}

}  // namespace hcsg
