#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "transpol/rng.hpp"
#include "transpol/tensor.hpp"

namespace transpol {

struct GradcheckOptions {
  std::uint64_t seed = 0;
  double step = 1e-5;             ///< central-difference half-width
  double tolerance = 1e-4;
  double chain_tolerance = 1e-3;  ///< chained policy -> transition rollout
  double floor = 1e-6;            ///< denominator floor of the relative error
  std::size_t entries_per_tensor = 8;
  std::size_t trials = 20;        ///< random shapes per primitive
  bool corrupt = false;           ///< test hook: perturb one analytic gradient
};

struct GradcheckStats {
  double max_rel_error = 0.0;
  std::size_t checks = 0;
};

/// Compares reverse-mode gradients of the scalar `loss` with central differences
/// on up to `entries_per_tensor` entries of every input (all entries when fewer).
/// `loss` must be deterministic: it is re-evaluated for every perturbation.
GradcheckStats check_gradients(const std::function<ad::Tensor()>& loss, const std::vector<ad::Tensor>& inputs,
                               const GradcheckOptions& options, RngStream& pick);

struct SuiteResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t checks = 0;
  [[nodiscard]] bool passed() const { return max_rel_error <= tolerance; }
};

/// Suites: primitives, losses, transition, policy, bptt20, chained_rollout.
std::vector<SuiteResult> run_gradcheck(const GradcheckOptions& options);
void print_gradcheck(std::ostream& out, const std::vector<SuiteResult>& results);

}  // namespace transpol
