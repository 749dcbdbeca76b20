#include "edgeadapt/cloud_service.hpp"

#include <atomic>

#include <nlohmann/json.hpp>

#include "edgeadapt/checkpoint.hpp"
#include "edgeadapt/wire.hpp"

namespace edgeadapt {

using Frame = std::shared_ptr<const std::vector<std::uint8_t>>;

struct CloudService::Session {
  std::unique_ptr<ByteStream> stream;
  std::uint32_t edge_id = 0;

  std::mutex mu;
  std::condition_variable cv;
  std::deque<Frame> outbound;
  bool closing = false;
  bool dead = false;
  bool registered = false;  // guarded by sessions_mu_
  std::uint64_t last_seq_acked = 0;
  std::uint64_t last_version_sent = 0;

  std::thread reader;
  std::thread writer;
  std::atomic<bool> reader_done{false};
  std::atomic<bool> writer_done{false};

  void enqueue(Frame f) {
    std::lock_guard lock(mu);
    if (closing || dead) return;
    outbound.push_back(std::move(f));
    cv.notify_all();
  }
  void close_gracefully() {
    std::lock_guard lock(mu);
    closing = true;
    cv.notify_all();
  }
};

namespace {

Frame make_frame(const wire::Message& m) {
  return std::make_shared<const std::vector<std::uint8_t>>(wire::encode(m));
}

}  // namespace

std::string StepRecord::to_json() const {
  return nlohmann::json{{"step", step},
                        {"version", version},
                        {"pool_size", pool_size},
                        {"foundation_loss", foundation_loss},
                        {"edge_loss", edge_loss},
                        {"buffer_size", buffer_size}}
      .dump();
}

std::string ServeReport::to_json() const {
  return nlohmann::json{{"steps", steps},
                        {"samples_received", samples_received},
                        {"samples_ingested", samples_ingested},
                        {"residual_discarded", residual_discarded},
                        {"final_version", final_version},
                        {"buffer_occupancy", buffer_occupancy},
                        {"sessions_accepted", sessions_accepted},
                        {"sessions_rejected", sessions_rejected},
                        {"adapt_errors", adapt_errors},
                        {"broadcast_payload_bytes", broadcast_payload_bytes}}
      .dump();
}

CloudService::CloudService(Model foundation, Model edge, ServerConfig cfg)
    : cfg_(std::move(cfg)),
      edge_spec_hash_(spec_hash(edge.spec)),
      engine_(std::move(foundation), std::move(edge), cfg_.adapt) {}

CloudService::~CloudService() {
  if (started_) shutdown();
}

void CloudService::start(std::unique_ptr<Acceptor> acceptor) {
  if (started_) throw std::logic_error("CloudService already started");
  started_ = true;
  acceptor_ = std::move(acceptor);
  engine_thread_ = std::thread([this] { engine_loop(); });
  accept_thread_ = std::thread([this] { accept_loop(); });
}

std::uint64_t CloudService::version() const {
  std::lock_guard lock(engine_mu_);
  return engine_.version();
}

std::vector<StepRecord> CloudService::step_history() const {
  std::lock_guard lock(engine_mu_);
  return history_;
}

Model CloudService::edge_model() const {
  std::lock_guard lock(engine_mu_);
  return engine_.edge();
}

Model CloudService::foundation_model() const {
  std::lock_guard lock(engine_mu_);
  return engine_.foundation();
}

void CloudService::accept_loop() {
  while (auto stream = acceptor_->accept()) {
    auto s = std::make_shared<Session>();
    s->stream = std::move(stream);
    {
      std::lock_guard lock(sessions_mu_);
      sessions_.push_back(s);
    }
    s->writer = std::thread([this, s] { writer_loop(s); });
    s->reader = std::thread([this, s] { run_session(s); });
    reap_finished();
  }
}

void CloudService::reap_finished() {
  std::lock_guard lock(sessions_mu_);
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    auto& s = *it;
    if (s->reader_done && s->writer_done) {
      if (s->reader.joinable()) s->reader.join();
      if (s->writer.joinable()) s->writer.join();
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

void CloudService::writer_loop(const std::shared_ptr<Session>& s) {
  for (;;) {
    Frame frame;
    {
      std::unique_lock lock(s->mu);
      s->cv.wait(lock, [&] { return !s->outbound.empty() || s->closing; });
      if (s->outbound.empty()) break;
      frame = std::move(s->outbound.front());
      s->outbound.pop_front();
    }
    try {
      write_frame(*s->stream, *frame);
    } catch (const std::exception&) {
      std::lock_guard lock(s->mu);
      s->dead = true;
      s->outbound.clear();
      break;
    }
  }
  s->stream->close();
  s->writer_done = true;
}

void CloudService::run_session(const std::shared_ptr<Session>& s) {
  try {
    const auto hello_frame = read_frame(*s->stream);
    if (hello_frame) {
      const auto hello_msg = wire::decode(*hello_frame);
      const auto* hello = std::get_if<wire::ClientHello>(&hello_msg);
      if (!hello) throw ProtocolError("expected ClientHello");
      s->edge_id = hello->edge_id;
      const std::uint64_t current = version();
      bool ok = hello->spec_hash == edge_spec_hash_;
      {
        std::lock_guard lock(sessions_mu_);
        if (ok && live_sessions_ >= cfg_.max_sessions) ok = false;
        s->enqueue(make_frame(wire::ServerHello{ok, current}));
        if (ok) {
          ++live_sessions_;
          s->registered = true;
          s->last_version_sent = current;
        }
      }
      {
        std::lock_guard lock(report_mu_);
        ++(ok ? report_.sessions_accepted : report_.sessions_rejected);
      }
      const std::size_t input_dim = engine_.edge().spec.input_dim;
      while (ok) {
        const auto frame = read_frame(*s->stream);
        if (!frame) break;
        const auto msg = wire::decode(*frame);
        const auto* batch = std::get_if<wire::SampleBatch>(&msg);
        if (!batch) throw ProtocolError("unexpected message from edge");
        if (batch->seq <= s->last_seq_acked) throw ProtocolError("non-monotone upload sequence");
        Job job;
        job.samples.reserve(batch->samples.size());
        for (const auto& ws : batch->samples) {
          if (ws.features.size() != input_dim) throw ProtocolError("sample feature width mismatch");
          job.samples.push_back({ws.sample_id, ws.features, std::nullopt});
        }
        auto done = job.done.get_future();
        {
          std::lock_guard lock(jobs_mu_);
          if (engine_stop_) break;
          jobs_.push_back(std::move(job));
          jobs_cv_.notify_all();
        }
        done.wait();
        s->last_seq_acked = batch->seq;
        s->enqueue(make_frame(wire::Ack{batch->seq}));
      }
    }
  } catch (const std::exception&) {
    // Decode or transport failure: drop this connection, keep serving others.
  }
  {
    std::lock_guard lock(sessions_mu_);
    if (s->registered) {
      s->registered = false;
      --live_sessions_;
    }
  }
  s->close_gracefully();
  s->reader_done = true;
}

void CloudService::engine_loop() {
  for (;;) {
    Job job;
    {
      std::unique_lock lock(jobs_mu_);
      jobs_cv_.wait(lock, [this] { return !jobs_.empty() || engine_stop_; });
      if (jobs_.empty()) break;
      job = std::move(jobs_.front());
      jobs_.pop_front();
    }
    process(std::move(job.samples));
    job.done.set_value();
  }
}

void CloudService::process(std::vector<Sample> samples) {
  std::lock_guard lock(engine_mu_);
  {
    std::lock_guard rl(report_mu_);
    report_.samples_received += samples.size();
  }
  pool_.insert(pool_.end(), std::make_move_iterator(samples.begin()),
               std::make_move_iterator(samples.end()));
  const std::size_t n = cfg_.adapt.upload_batch;
  while (pool_.size() >= n) {
    const std::size_t pool_size = pool_.size();
    std::vector<Sample> batch(std::make_move_iterator(pool_.begin()),
                              std::make_move_iterator(pool_.begin() + static_cast<std::ptrdiff_t>(n)));
    pool_.erase(pool_.begin(), pool_.begin() + static_cast<std::ptrdiff_t>(n));
    StepOutcome out;
    try {
      out = engine_.step(batch);
    } catch (const std::exception& e) {
      std::lock_guard rl(report_mu_);
      ++report_.adapt_errors;
      if (cfg_.step_log) *cfg_.step_log << nlohmann::json{{"error", e.what()}}.dump() << '\n';
      continue;
    }
    const Frame frame = make_frame(wire::to_message(out.params));
    StepRecord rec{out.step,        out.params.version, pool_size,     out.foundation_loss,
                   out.edge_loss,   out.buffer_size,    frame->size()};
    history_.push_back(rec);
    if (cfg_.step_log) *cfg_.step_log << rec.to_json() << '\n' << std::flush;
    {
      std::lock_guard rl(report_mu_);
      ++report_.steps;
      report_.samples_ingested += n;
      report_.broadcast_payload_bytes += frame->size();
    }
    broadcast(frame);
  }
}

void CloudService::broadcast(const Frame& frame) {
  std::lock_guard lock(sessions_mu_);
  const auto version = std::get<wire::ParamUpdate>(wire::decode(*frame)).version;
  for (auto& s : sessions_) {
    if (!s->registered) continue;
    s->enqueue(frame);
    s->last_version_sent = version;
  }
}

ServeReport CloudService::shutdown() {
  {
    std::lock_guard lock(report_mu_);
    if (final_report_) return *final_report_;
  }
  if (!started_) {
    std::lock_guard lock(report_mu_);
    final_report_ = report_;
    return *final_report_;
  }
  if (acceptor_) acceptor_->close();
  if (accept_thread_.joinable()) accept_thread_.join();

  std::list<std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(sessions_mu_);
    sessions = sessions_;
  }
  for (auto& s : sessions) s->close_gracefully();
  for (auto& s : sessions) {
    if (s->writer.joinable()) s->writer.join();
    s->stream->close();
    if (s->reader.joinable()) s->reader.join();
  }
  {
    std::lock_guard lock(jobs_mu_);
    engine_stop_ = true;
    jobs_cv_.notify_all();
  }
  if (engine_thread_.joinable()) engine_thread_.join();
  {
    std::lock_guard lock(sessions_mu_);
    sessions_.clear();
  }

  std::lock_guard el(engine_mu_);
  std::lock_guard rl(report_mu_);
  report_.residual_discarded = pool_.size();
  pool_.clear();
  report_.final_version = engine_.version();
  report_.buffer_occupancy = engine_.buffer().size();
  final_report_ = report_;
  return *final_report_;
}

}  // namespace edgeadapt
