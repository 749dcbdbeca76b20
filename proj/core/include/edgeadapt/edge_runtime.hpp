#pragma once

// Edge node: forward-only inference in running-statistics mode, entropy
// filtration, and a background link that uploads accepted samples and
// receives parameter updates. Updates are applied between batches only.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "edgeadapt/affine.hpp"
#include "edgeadapt/byte_stream.hpp"
#include "edgeadapt/filtration.hpp"
#include "edgeadapt/model.hpp"
#include "edgeadapt/sample.hpp"
#include "edgeadapt/upload_queue.hpp"
#include "edgeadapt/wire.hpp"

namespace edgeadapt {

struct EdgeConfig {
  std::size_t batch_size = 64;
  std::size_t update_interval = 1;  // apply every K-th received update
  std::size_t queue_capacity = 256;
  std::uint32_t edge_id = 0;
  // Wait for every upload to be acknowledged before the next batch. Used by
  // the experiment harness to get reproducible runs over loopback.
  bool lockstep = false;
  std::size_t max_samples_per_message = 4096;
  std::chrono::milliseconds drain_timeout{2000};
  std::chrono::milliseconds lockstep_timeout{60000};
  std::chrono::milliseconds reconnect_backoff{50};

  void validate() const;
};

struct LinkStats {
  std::uint64_t uploaded_samples = 0;
  std::uint64_t batches_sent = 0;
  std::uint64_t acks = 0;
  std::uint64_t updates_received = 0;
  std::uint64_t updates_posted = 0;
  std::uint64_t connections = 0;
  std::uint64_t pending_samples = 0;  // popped from the queue, not yet written
  bool rejected = false;
};

/// Transport loop of one edge: owns the connection, drains the upload queue
/// and delivers every K-th received parameter update to the mailbox.
class CloudLink {
 public:
  CloudLink(Connector connector, wire::ClientHello hello, UploadQueue& queue,
            UpdateMailbox& mailbox, const EdgeConfig& cfg);
  ~CloudLink();
  CloudLink(const CloudLink&) = delete;
  CloudLink& operator=(const CloudLink&) = delete;

  void start();
  void stop();
  LinkStats stats() const;
  bool connected() const { return connected_.load(); }

 private:
  void run();
  void session(ByteStream& stream);
  void reader_loop(ByteStream& stream);
  void release_unacked();

  Connector connector_;
  wire::ClientHello hello_;
  UploadQueue& queue_;
  UpdateMailbox& mailbox_;
  EdgeConfig cfg_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  ByteStream* stream_ = nullptr;
  std::vector<QueuedSample> pending_;  // popped but not yet written
  std::uint64_t pending_seq_ = 0;
  std::uint64_t next_seq_ = 0;
  std::map<std::uint64_t, std::size_t> unacked_;
  LinkStats stats_;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> connected_{false};
  std::thread thread_;
};

struct EdgeStats {
  std::uint64_t samples = 0;
  std::uint64_t batches = 0;
  std::uint64_t accepted = 0;
  std::uint64_t uploaded = 0;
  std::uint64_t queue_drops = 0;
  std::uint64_t unsent = 0;
  std::uint64_t updates_received = 0;
  std::uint64_t updates_applied = 0;
  std::uint64_t updates_stale = 0;
  std::uint64_t updates_rejected = 0;
  std::uint64_t final_version = 0;
  std::vector<std::uint64_t> versions_applied;
  bool rejected_by_cloud = false;
  double final_e_max = 0.0;

  std::string to_json() const;
};

struct EdgeRunResult {
  std::vector<std::uint32_t> predictions;
  std::vector<float> confidences;
  std::vector<float> entropies;
  std::vector<std::uint8_t> accepted;
  std::vector<std::uint64_t> batch_versions;  // parameter version used per batch
  std::vector<QueuedSample> dropped;          // in drop order
  EdgeStats stats;
};

class EdgeRuntime {
 public:
  /// Without a connector the runtime is offline: same inference and
  /// filtration, nothing is uploaded.
  EdgeRuntime(Model model, FiltrationConfig filtration, EdgeConfig cfg,
              std::optional<Connector> connector = std::nullopt);

  EdgeRunResult run_stream(std::span<const Sample> stream);

  enum class UpdateResult { Applied, Stale, Rejected };
  /// Replaces gamma/beta if the version is newer and the layout matches.
  UpdateResult apply_update(const AffineParamSet& update);

  UpdateMailbox& mailbox() { return mailbox_; }
  /// Called after each batch has been inferred and filtered (batch index).
  void set_batch_hook(std::function<void(std::size_t)> hook) { hook_ = std::move(hook); }

  const Model& model() const { return model_; }
  std::uint64_t version() const { return version_; }
  const Filter& filter() const { return filter_; }

 private:
  Model model_;
  Filter filter_;
  EdgeConfig cfg_;
  std::optional<Connector> connector_;
  UpdateMailbox mailbox_;
  std::function<void(std::size_t)> hook_;
  std::uint64_t version_ = 0;
  std::vector<std::uint64_t> versions_applied_;
  std::uint64_t stale_ = 0;
  std::uint64_t rejected_ = 0;
};

}  // namespace edgeadapt
