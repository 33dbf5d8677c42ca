#pragma once

#include <span>

#include "transpol/env.hpp"
#include "transpol/tensor.hpp"

namespace transpol {

inline constexpr double kDefaultNllEpsilon = 1e-6;

/// Per-dimension weights of the policy loss; {1, 1, 0, 0} scores position only.
struct TargetGain {
  Vec4 weights{1.0, 1.0, 0.0, 0.0};

  /// Throws RangeError on a negative or non-finite weight.
  void validate() const;
};

/// Gaussian negative log-likelihood (constant term dropped), variance floored at eps:
///   1/(2T) * mean_batch sum_t sum_dims [log(max(var, eps)) + (mean - y)^2 / max(var, eps)]
/// Each span holds one [B, 4] tensor per time step.
ad::Tensor transition_nll(std::span<const ad::Tensor> mean, std::span<const ad::Tensor> var,
                          std::span<const ad::Tensor> observed, double eps = kDefaultNllEpsilon);

/// Un-normalized sum over batch and dims of one step's NLL bracket; transition_nll
/// is the sum of these over time scaled by 1/(2 T B).
ad::Tensor nll_step_sum(const ad::Tensor& mean, const ad::Tensor& var, const ad::Tensor& observed,
                        double eps = kDefaultNllEpsilon);

/// Gain-weighted squared error: 1/r * mean_batch sum_t sum_dims g * (x_t - target_t)^2.
/// `targets` holds either one [B, 4] tensor (held fixed) or one per step.
ad::Tensor policy_loss(std::span<const ad::Tensor> predicted, std::span<const ad::Tensor> targets,
                       const TargetGain& gain);

/// Un-normalized sum over batch and dims of one step's weighted error.
ad::Tensor policy_step_sum(const ad::Tensor& predicted, const ad::Tensor& target, const TargetGain& gain);

}  // namespace transpol
