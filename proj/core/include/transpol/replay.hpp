#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

#include "transpol/episode.hpp"
#include "transpol/rng.hpp"

namespace transpol {

using EpisodePtr = std::shared_ptr<const EpisodeRecord>;

/// Fixed-capacity FIFO of complete episodes.
class MemoryBuffer {
 public:
  MemoryBuffer(std::size_t capacity, std::size_t episode_steps);

  /// Validates and stores `episode`, evicting the oldest one when full.
  void push(EpisodeRecord episode);

  /// n episodes drawn uniformly: without replacement when n <= size(), with
  /// replacement otherwise. Throws ContractError on an empty buffer.
  [[nodiscard]] std::vector<EpisodePtr> sample(std::size_t n, RngStream& rng) const;

  [[nodiscard]] std::size_t size() const { return episodes_.size(); }
  [[nodiscard]] bool empty() const { return episodes_.empty(); }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] std::size_t episode_steps() const { return episode_steps_; }
  [[nodiscard]] std::uint64_t inserted() const { return inserted_; }
  /// Oldest first.
  [[nodiscard]] const std::deque<EpisodePtr>& episodes() const { return episodes_; }
  void set_inserted(std::uint64_t n) { inserted_ = n; }

 private:
  std::size_t capacity_;
  std::size_t episode_steps_;
  std::deque<EpisodePtr> episodes_;
  std::uint64_t inserted_ = 0;
};

}  // namespace transpol
