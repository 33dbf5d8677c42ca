#include "transpol/losses.hpp"

#include <cmath>
#include <string>

#include "transpol/errors.hpp"

namespace transpol {

void TargetGain::validate() const {
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw RangeError("target gain weights must be finite and nonnegative");
    }
  }
}

ad::Tensor nll_step_sum(const ad::Tensor& mean, const ad::Tensor& var, const ad::Tensor& observed,
                        double eps) {
  if (!(eps > 0.0)) throw ContractError("transition_nll: epsilon must be positive, got " + std::to_string(eps));
  if (mean.shape() != var.shape() || mean.shape() != observed.shape()) {
    throw DimensionError("transition_nll: shape mismatch " + ad::to_string(mean.shape()) + " / " +
                         ad::to_string(var.shape()) + " / " + ad::to_string(observed.shape()));
  }
  const ad::Tensor v = ad::clamp_min(var, eps);
  return ad::sum(ad::log(v) + ad::square(mean - observed) / v);
}

ad::Tensor transition_nll(std::span<const ad::Tensor> mean, std::span<const ad::Tensor> var,
                          std::span<const ad::Tensor> observed, double eps) {
  if (mean.empty() || mean.size() != var.size() || mean.size() != observed.size()) {
    throw DimensionError("transition_nll: sequences must be non-empty and of equal length");
  }
  ad::Tensor total = nll_step_sum(mean[0], var[0], observed[0], eps);
  for (std::size_t t = 1; t < mean.size(); ++t) {
    total = total + nll_step_sum(mean[t], var[t], observed[t], eps);
  }
  const double steps = static_cast<double>(mean.size());
  const double batch = static_cast<double>(mean[0].rows());
  return ad::scale(total, 1.0 / (2.0 * steps * batch));
}

ad::Tensor policy_step_sum(const ad::Tensor& predicted, const ad::Tensor& target, const TargetGain& gain) {
  if (predicted.shape() != target.shape() || predicted.cols() != 4) {
    throw DimensionError("policy_loss: shape mismatch " + ad::to_string(predicted.shape()) + " vs " +
                         ad::to_string(target.shape()));
  }
  const ad::Tensor g = ad::Tensor::from({1, 4}, {gain.weights.begin(), gain.weights.end()});
  return ad::sum(ad::square(predicted - target) * g);
}

ad::Tensor policy_loss(std::span<const ad::Tensor> predicted, std::span<const ad::Tensor> targets,
                       const TargetGain& gain) {
  if (predicted.empty() || (targets.size() != 1 && targets.size() != predicted.size())) {
    throw DimensionError("policy_loss: need one target tensor or one per predicted step");
  }
  gain.validate();
  const auto target_at = [&](std::size_t t) -> const ad::Tensor& {
    return targets.size() == 1 ? targets[0] : targets[t];
  };
  ad::Tensor total = policy_step_sum(predicted[0], target_at(0), gain);
  for (std::size_t t = 1; t < predicted.size(); ++t) {
    total = total + policy_step_sum(predicted[t], target_at(t), gain);
  }
  const double steps = static_cast<double>(predicted.size());
  const double batch = static_cast<double>(predicted[0].rows());
  return ad::scale(total, 1.0 / (steps * batch));
}

}  // namespace transpol
