#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "transpol/checkpoint.hpp"
#include "transpol/nets.hpp"

namespace transpol {

struct AdamOptions {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global-norm gradient clip; 0 disables it.
  double clip_norm = 0.0;
};

/// Bias-corrected adaptive-moment optimizer over one parameter set.
class Adam {
 public:
  Adam(ParameterList params, AdamOptions options);

  /// Applies one update from the parameters' accumulated gradients. If any
  /// gradient is NaN/Inf nothing is modified and NonFiniteError names the parameter.
  void step();
  void zero_grad();

  [[nodiscard]] std::uint64_t step_count() const { return steps_; }
  [[nodiscard]] const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  /// L2 norm of the current gradient over all parameters.
  [[nodiscard]] double gradient_norm() const;

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  void restore(const Checkpoint& ckpt, const std::string& prefix);

 private:
  ParameterList params_;
  AdamOptions options_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::uint64_t steps_ = 0;
};

}  // namespace transpol
