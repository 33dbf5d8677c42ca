#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "transpol/env.hpp"

namespace transpol {

enum class TaskVariant { stationary, moving };

std::string to_string(TaskVariant v);
/// Accepts "stationary" or "moving"; throws ConfigError otherwise.
TaskVariant parse_variant(const std::string& name);

/// One environment step as seen by the learner: observation, target, action, next observation.
struct StepRecord {
  Vec4 y{};
  Vec4 target{};
  Vec2 u{};
  Vec4 y_next{};
};

struct EpisodeRecord {
  std::vector<StepRecord> steps;
  /// True states x_0 .. x_T (T + 1 entries). Empty when not recorded.
  std::vector<Vec4> states;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;  ///< 0-based index of the collecting iteration
  TaskVariant variant = TaskVariant::stationary;

  [[nodiscard]] std::size_t length() const { return steps.size(); }
  /// Throws ContractError unless there are exactly `expected_steps` steps, each
  /// y_next equals the following y, and states (if present) has T + 1 entries.
  void validate(std::size_t expected_steps) const;
};

}  // namespace transpol
