#include "hcsg/nn.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace hcsg {

int ParamStore::add(const std::string& name, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw Error(ErrorKind::kShapeMismatch, "block " + name + " has an empty shape");
  if (find(name) >= 0) throw Error(ErrorKind::kShapeMismatch, "duplicate block " + name);
  blocks_.push_back({name, rows, cols, values_.size()});
  values_.resize(values_.size() + static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0);
  return static_cast<int>(blocks_.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

MatMap ParamStore::mat(int block) {
  const Block& b = blocks_.at(static_cast<std::size_t>(block));
  return MatMap(values_.data() + b.offset, b.rows, b.cols);
}

ConstMatMap ParamStore::mat(int block) const {
  const Block& b = blocks_.at(static_cast<std::size_t>(block));
  return ConstMatMap(values_.data() + b.offset, b.rows, b.cols);
}

VecMap ParamStore::vec(int block) {
  const Block& b = blocks_.at(static_cast<std::size_t>(block));
  return VecMap(values_.data() + b.offset, static_cast<Eigen::Index>(b.rows) * b.cols);
}

ConstVecMap ParamStore::vec(int block) const {
  const Block& b = blocks_.at(static_cast<std::size_t>(block));
  return ConstVecMap(values_.data() + b.offset, static_cast<Eigen::Index>(b.rows) * b.cols);
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  out.blocks_ = blocks_;
  out.values_.assign(values_.size(), 0.0);
  return out;
}

void ParamStore::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

bool ParamStore::same_layout(const ParamStore& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& a = blocks_[i];
    const Block& b = other.blocks_[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) return false;
  }
  return true;
}

bool ParamStore::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

nlohmann::ordered_json ParamStore::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "hcsg-params";
  j["version"] = 1;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  for (const Block& b : blocks_) {
    nlohmann::ordered_json t;
    t["name"] = b.name;
    t["shape"] = {b.rows, b.cols};
    const std::size_t n = static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.cols);
    t["data"] = std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                    values_.begin() + static_cast<std::ptrdiff_t>(b.offset + n));
    tensors.push_back(std::move(t));
  }
  j["tensors"] = std::move(tensors);
  return j;
}

void ParamStore::load_json(const nlohmann::json& j) {
  if (j.value("format", "") != "hcsg-params" || j.value("version", 0) != 1) {
    throw Error(ErrorKind::kShapeMismatch, "not a version 1 parameter dump");
  }
  const auto& tensors = j.at("tensors");
  if (tensors.size() != blocks_.size()) throw Error(ErrorKind::kShapeMismatch, "tensor count differs");
  std::vector<double> next = values_;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    const auto& t = tensors[i];
    const auto shape = t.at("shape").get<std::vector<int>>();
    if (t.at("name").get<std::string>() != b.name || shape.size() != 2 || shape[0] != b.rows || shape[1] != b.cols) {
      throw Error(ErrorKind::kShapeMismatch, "tensor " + b.name + " does not match");
    }
    const auto data = t.at("data").get<std::vector<double>>();
    if (data.size() != static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.cols)) {
      throw Error(ErrorKind::kShapeMismatch, "tensor " + b.name + " has the wrong element count");
    }
    std::copy(data.begin(), data.end(), next.begin() + static_cast<std::ptrdiff_t>(b.offset));
  }
  values_ = std::move(next);
}

void fill_uniform(ParamStore& store, int block, double bound, Rng& rng) {
  auto v = store.vec(block);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-bound, bound);
}

Adam::Adam(std::size_t size, AdamConfig config) : config_(config), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(ParamStore& params, const ParamStore& grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(ErrorKind::kShapeMismatch, "optimizer state does not match parameters");
  }
  const double* g = grad.data();
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(g[i])) throw Error(ErrorKind::kNonFiniteGradient, "gradient entry " + std::to_string(i));
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  double* p = params.data();
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * g[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * g[i] * g[i];
    if (lr == 0.0) continue;
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
  }
}

GradCheckResult grad_check(std::vector<double>& x, const Objective& objective, const std::vector<std::size_t>& probes,
                           double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::kInvalidConfig, "finite-difference step must be positive");
  std::vector<double> analytic(x.size(), 0.0);
  objective.gradient(analytic);
  GradCheckResult result;
  result.probes = probes.size();
  for (std::size_t idx : probes) {
    const double saved = x[idx];
    x[idx] = saved + h;
    const double plus = objective.value();
    x[idx] = saved - h;
    const double minus = objective.value();
    x[idx] = saved;
    const double numeric = (plus - minus) / (2.0 * h);
    const double ga = analytic[idx];
    const double denom = std::max({std::abs(ga), std::abs(numeric), 1e-8});
    const double err = std::abs(ga - numeric) / denom;
    if (err >= result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = idx;
      result.worst_analytic = ga;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

std::vector<std::size_t> sample_probes(std::size_t n, std::size_t count, Rng& rng, const std::vector<bool>& eligible) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < n; ++i) {
    if (eligible.empty() || eligible[i]) pool.push_back(i);
  }
  std::vector<std::size_t> out;
  count = std::min(count, pool.size());
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size() - i - 1)));
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void softmax_inplace(Eigen::Ref<Eigen::VectorXd> v) {
  if (v.size() == 0) return;
  const double mx = v.maxCoeff();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = std::exp(v[i] - mx);
    sum += v[i];
  }
  v /= sum;
}

}  // namespace hcsg
