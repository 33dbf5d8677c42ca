#include "transpol/replay.hpp"

#include <numeric>

#include "transpol/errors.hpp"

namespace transpol {

std::string to_string(TaskVariant v) { return v == TaskVariant::stationary ? "stationary" : "moving"; }

TaskVariant parse_variant(const std::string& name) {
  if (name == "stationary") return TaskVariant::stationary;
  if (name == "moving") return TaskVariant::moving;
  throw ConfigError("unknown task variant '" + name + "' (expected stationary or moving)");
}

void EpisodeRecord::validate(std::size_t expected_steps) const {
  if (steps.size() != expected_steps) {
    throw ContractError("episode has " + std::to_string(steps.size()) + " steps, expected " +
                        std::to_string(expected_steps));
  }
  for (std::size_t t = 0; t + 1 < steps.size(); ++t) {
    if (steps[t].y_next != steps[t + 1].y) {
      throw ContractError("episode chain broken: y' of step " + std::to_string(t) +
                          " differs from y of step " + std::to_string(t + 1));
    }
  }
  if (!states.empty() && states.size() != steps.size() + 1) {
    throw ContractError("episode carries " + std::to_string(states.size()) + " true states, expected " +
                        std::to_string(steps.size() + 1));
  }
}

MemoryBuffer::MemoryBuffer(std::size_t capacity, std::size_t episode_steps)
    : capacity_(capacity), episode_steps_(episode_steps) {
  if (capacity == 0) throw RangeError("memory capacity must be positive");
  if (episode_steps == 0) throw RangeError("episode length must be positive");
}

void MemoryBuffer::push(EpisodeRecord episode) {
  episode.validate(episode_steps_);
  if (episodes_.size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::make_shared<const EpisodeRecord>(std::move(episode)));
  ++inserted_;
}

std::vector<EpisodePtr> MemoryBuffer::sample(std::size_t n, RngStream& rng) const {
  if (episodes_.empty()) throw ContractError("cannot sample from an empty memory buffer");
  std::vector<EpisodePtr> out;
  out.reserve(n);
  const std::size_t size = episodes_.size();
  if (n > size) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(episodes_[rng.below(size)]);
    return out;
  }
  // Partial Fisher-Yates over indices.
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(size - i));
    std::swap(idx[i], idx[j]);
    out.push_back(episodes_[idx[i]]);
  }
  return out;
}

}  // namespace transpol
