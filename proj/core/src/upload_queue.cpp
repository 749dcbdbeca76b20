#include "edgeadapt/upload_queue.hpp"

#include <algorithm>

#include "edgeadapt/error.hpp"

namespace edgeadapt {

UploadQueue::UploadQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("upload queue capacity must be >= 1");
}

std::optional<QueuedSample> UploadQueue::push(Sample sample, float entropy) {
  std::lock_guard lock(mu_);
  if (items_.size() < capacity_) {
    items_.push_back({std::move(sample), entropy});
    cv_.notify_all();
    return std::nullopt;
  }
  ++drops_;
  // Find the highest-entropy queued entry; the incoming sample loses ties.
  std::size_t worst = 0;
  for (std::size_t i = 1; i < items_.size(); ++i) {
    if (items_[i].entropy >= items_[worst].entropy) worst = i;
  }
  if (entropy >= items_[worst].entropy) return QueuedSample{std::move(sample), entropy};
  QueuedSample dropped = std::move(items_[worst]);
  items_.erase(items_.begin() + static_cast<std::ptrdiff_t>(worst));
  items_.push_back({std::move(sample), entropy});
  cv_.notify_all();
  return dropped;
}

std::vector<QueuedSample> UploadQueue::pop_batch(std::size_t max, std::chrono::milliseconds wait) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, wait, [this] { return !items_.empty() || closed_; });
  std::vector<QueuedSample> out;
  while (!items_.empty() && out.size() < max) {
    out.push_back(std::move(items_.front()));
    items_.pop_front();
  }
  in_flight_ += out.size();
  return out;
}

std::vector<QueuedSample> UploadQueue::try_pop_batch(std::size_t max) {
  std::lock_guard lock(mu_);
  std::vector<QueuedSample> out;
  while (!items_.empty() && out.size() < max) {
    out.push_back(std::move(items_.front()));
    items_.pop_front();
  }
  in_flight_ += out.size();
  return out;
}

void UploadQueue::complete(std::size_t n) {
  std::lock_guard lock(mu_);
  in_flight_ -= std::min(n, in_flight_);
  cv_.notify_all();
}

bool UploadQueue::wait_idle(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [this] {
    return closed_ || (items_.empty() && in_flight_ == 0);
  }) && !closed_;
}

std::size_t UploadQueue::in_flight() const {
  std::lock_guard lock(mu_);
  return in_flight_;
}

void UploadQueue::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

bool UploadQueue::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::size_t UploadQueue::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

std::uint64_t UploadQueue::drops() const {
  std::lock_guard lock(mu_);
  return drops_;
}

std::vector<QueuedSample> UploadQueue::snapshot() const {
  std::lock_guard lock(mu_);
  return {items_.begin(), items_.end()};
}

void UpdateMailbox::post(AffineParamSet set) {
  std::lock_guard lock(mu_);
  slot_ = std::move(set);
}

std::optional<AffineParamSet> UpdateMailbox::take() {
  std::lock_guard lock(mu_);
  auto out = std::move(slot_);
  slot_.reset();
  return out;
}

}  // namespace edgeadapt
