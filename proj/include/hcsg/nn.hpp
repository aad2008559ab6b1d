#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hcsg/common.hpp"

namespace hcsg {

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

/// Named dense blocks (column-major) packed into one flat vector. Gradients
/// share the layout, so optimizers and gradient checks work on the flat view.
class ParamStore {
 public:
  struct Block {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;
  };

  /// Appends a zero block and returns its index.
  int add(const std::string& name, int rows, int cols);
  int find(const std::string& name) const;

  MatMap mat(int block);
  ConstMatMap mat(int block) const;
  VecMap vec(int block);
  ConstVecMap vec(int block) const;

  std::size_t size() const { return values_.size(); }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  /// Same layout, all zeros.
  ParamStore zeros_like() const;
  void set_zero();
  bool same_layout(const ParamStore& other) const;
  bool all_finite() const;

  /// Versioned tensor dump: {"format", "version", "tensors": [{name, shape, data}]}.
  nlohmann::ordered_json to_json() const;
  /// Throws Error(kShapeMismatch) if names or shapes differ from this store.
  void load_json(const nlohmann::json& j);

 private:
  std::vector<Block> blocks_;
  std::vector<double> values_;
};

void fill_uniform(ParamStore& store, int block, double bound, Rng& rng);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, AdamConfig config = {});

  /// One update. Throws Error(kNonFiniteGradient) before touching anything
  /// if the gradient has a non-finite entry. lr == 0 leaves params bit-identical.
  void step(ParamStore& params, const ParamStore& grad, double lr);
  std::int64_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

/// Scalar objective over a flat parameter vector, for finite-difference checks.
struct Objective {
  std::function<double()> value;
  // Fills the analytic gradient (same layout as the checked vector).
  std::function<void(std::vector<double>&)> gradient;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t probes = 0;
};

/// Central differences at the probed indices of `x`, which `objective` reads.
/// Relative error is |ga - gn| / max(|ga|, |gn|, 1e-8). `x` is restored.
GradCheckResult grad_check(std::vector<double>& x, const Objective& objective, const std::vector<std::size_t>& probes,
                           double h = 1e-5);

/// `count` distinct indices drawn from [0, n), optionally restricted to entries
/// where `eligible` is true.
std::vector<std::size_t> sample_probes(std::size_t n, std::size_t count, Rng& rng,
                                       const std::vector<bool>& eligible = {});

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Numerically stable in-place softmax.
void softmax_inplace(Eigen::Ref<Eigen::VectorXd> v);

}  // namespace hcsg
