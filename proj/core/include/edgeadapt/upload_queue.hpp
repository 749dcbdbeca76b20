#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <vector>

#include "edgeadapt/affine.hpp"
#include "edgeadapt/sample.hpp"

namespace edgeadapt {

struct QueuedSample {
  Sample sample;
  float entropy = 0.0f;
};

/// Bounded FIFO between the inference loop and the transport loop. When full,
/// the entry with the highest entropy among the queued ones and the incoming
/// one is discarded (ties: the most recently enqueued).
class UploadQueue {
 public:
  explicit UploadQueue(std::size_t capacity);

  /// Never blocks. Returns the discarded entry on overflow.
  std::optional<QueuedSample> push(Sample sample, float entropy);

  /// Waits up to `wait` for entries; returns up to `max` of them in FIFO
  /// order (possibly none). Popped entries count as in flight until complete().
  std::vector<QueuedSample> pop_batch(std::size_t max, std::chrono::milliseconds wait);
  std::vector<QueuedSample> try_pop_batch(std::size_t max);

  /// Marks popped entries as delivered.
  void complete(std::size_t n);
  /// Waits until nothing is queued or in flight. False on timeout or close.
  bool wait_idle(std::chrono::milliseconds timeout);
  std::size_t in_flight() const;

  void close();
  bool closed() const;
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::uint64_t drops() const;
  std::vector<QueuedSample> snapshot() const;

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<QueuedSample> items_;
  std::size_t in_flight_ = 0;
  std::uint64_t drops_ = 0;
  bool closed_ = false;
};

/// Single-slot mailbox holding the latest parameter set for the inference
/// loop; a newer post overwrites an unread one.
class UpdateMailbox {
 public:
  void post(AffineParamSet set);
  std::optional<AffineParamSet> take();

 private:
  std::mutex mu_;
  std::optional<AffineParamSet> slot_;
};

}  // namespace edgeadapt
