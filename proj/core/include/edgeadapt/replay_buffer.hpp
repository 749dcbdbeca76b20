#pragma once

#include <cstddef>
#include <deque>
#include <random>
#include <span>
#include <vector>

#include "edgeadapt/sample.hpp"

namespace edgeadapt {

/// Bounded first-in first-out store of uploaded samples.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  /// Appends in arrival order, evicting the oldest entries beyond capacity.
  void ingest(std::span<const Sample> batch);

  /// Uniform draw: without replacement when size() >= count, with
  /// replacement otherwise; empty when the buffer is empty.
  std::vector<Sample> draw(std::size_t count, std::mt19937_64& rng) const;

  std::size_t size() const { return store_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return store_.empty(); }
  const std::deque<Sample>& contents() const { return store_; }

 private:
  std::size_t capacity_;
  std::deque<Sample> store_;
};

}  // namespace edgeadapt
