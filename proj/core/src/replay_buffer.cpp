#include "edgeadapt/replay_buffer.hpp"

#include <numeric>

namespace edgeadapt {

void ReplayBuffer::ingest(std::span<const Sample> batch) {
  if (capacity_ == 0) return;
  for (const auto& s : batch) {
    store_.push_back(s);
    if (store_.size() > capacity_) store_.pop_front();
  }
}

std::vector<Sample> ReplayBuffer::draw(std::size_t count, std::mt19937_64& rng) const {
  std::vector<Sample> out;
  if (store_.empty() || count == 0) return out;
  out.reserve(count);
  const std::size_t n = store_.size();
  if (n >= count) {
    // Partial Fisher-Yates over indices.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.push_back(store_[idx[i]]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < count; ++i) out.push_back(store_[pick(rng)]);
  }
  return out;
}

}  // namespace edgeadapt
