#pragma once

// Cloud server: accepts edge sessions, pools uploaded samples across edges
// into adaptation batches of N, runs the adaptation engine in a single
// context, and broadcasts every new parameter version to all live sessions.

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <future>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "edgeadapt/adapt_engine.hpp"
#include "edgeadapt/byte_stream.hpp"
#include "edgeadapt/model.hpp"

namespace edgeadapt {

struct ServerConfig {
  AdaptConfig adapt;
  std::size_t max_sessions = 64;
  // One JSON object per adaptation step when set.
  std::ostream* step_log = nullptr;
};

struct StepRecord {
  std::uint64_t step = 0;
  std::uint64_t version = 0;
  std::size_t pool_size = 0;
  double foundation_loss = 0.0;
  double edge_loss = 0.0;
  std::size_t buffer_size = 0;
  std::size_t payload_bytes = 0;

  std::string to_json() const;
};

struct ServeReport {
  std::uint64_t steps = 0;
  std::uint64_t samples_received = 0;
  std::uint64_t samples_ingested = 0;
  std::uint64_t residual_discarded = 0;
  std::uint64_t final_version = 0;
  std::size_t buffer_occupancy = 0;
  std::uint64_t sessions_accepted = 0;
  std::uint64_t sessions_rejected = 0;
  std::uint64_t adapt_errors = 0;
  std::uint64_t broadcast_payload_bytes = 0;  // one copy per step

  std::string to_json() const;
};

class CloudService {
 public:
  CloudService(Model foundation, Model edge, ServerConfig cfg);
  ~CloudService();
  CloudService(const CloudService&) = delete;
  CloudService& operator=(const CloudService&) = delete;

  /// Starts the accept loop and the engine context; returns immediately.
  void start(std::unique_ptr<Acceptor> acceptor);

  /// Stops accepting, flushes in-flight frames, closes sessions and the
  /// engine. Residual samples below one batch are discarded. Idempotent.
  ServeReport shutdown();

  std::uint64_t version() const;
  std::uint64_t edge_spec_hash() const { return edge_spec_hash_; }
  std::vector<StepRecord> step_history() const;
  /// Snapshot of the cloud-side edge model (copy taken under the engine lock).
  Model edge_model() const;
  Model foundation_model() const;

 private:
  struct Session;
  struct Job {
    std::vector<Sample> samples;
    std::promise<void> done;
  };

  void accept_loop();
  void engine_loop();
  void run_session(const std::shared_ptr<Session>& session);
  void writer_loop(const std::shared_ptr<Session>& session);
  void process(std::vector<Sample> samples);
  void broadcast(const std::shared_ptr<const std::vector<std::uint8_t>>& frame);
  void reap_finished();

  ServerConfig cfg_;
  std::uint64_t edge_spec_hash_;

  mutable std::mutex engine_mu_;
  AdaptEngine engine_;
  std::vector<Sample> pool_;
  std::vector<StepRecord> history_;

  std::mutex jobs_mu_;
  std::condition_variable jobs_cv_;
  std::deque<Job> jobs_;
  bool engine_stop_ = false;

  std::mutex sessions_mu_;
  std::list<std::shared_ptr<Session>> sessions_;
  std::size_t live_sessions_ = 0;

  mutable std::mutex report_mu_;
  ServeReport report_;
  std::optional<ServeReport> final_report_;

  std::unique_ptr<Acceptor> acceptor_;
  std::thread accept_thread_;
  std::thread engine_thread_;
  bool started_ = false;
};

}  // namespace edgeadapt
