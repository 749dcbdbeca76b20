#include "edgeadapt/edge_runtime.hpp"

#include <nlohmann/json.hpp>

#include "edgeadapt/checkpoint.hpp"
#include "edgeadapt/error.hpp"
#include "edgeadapt/objectives.hpp"

namespace edgeadapt {

using namespace std::chrono_literals;

void EdgeConfig::validate() const {
  if (batch_size == 0) throw ConfigError("edge batch size must be >= 1");
  if (update_interval == 0) throw ConfigError("update interval must be >= 1");
  if (queue_capacity == 0) throw ConfigError("queue capacity must be >= 1");
  if (max_samples_per_message == 0) throw ConfigError("max samples per message must be >= 1");
}

// ---------------------------------------------------------------------------
// CloudLink

CloudLink::CloudLink(Connector connector, wire::ClientHello hello, UploadQueue& queue,
                     UpdateMailbox& mailbox, const EdgeConfig& cfg)
    : connector_(std::move(connector)), hello_(hello), queue_(queue), mailbox_(mailbox), cfg_(cfg) {}

CloudLink::~CloudLink() { stop(); }

void CloudLink::start() {
  if (thread_.joinable()) return;
  stopping_ = false;
  thread_ = std::thread([this] { run(); });
}

void CloudLink::stop() {
  stopping_ = true;
  queue_.close();
  {
    std::lock_guard lock(mu_);
    if (stream_) stream_->close();
    cv_.notify_all();
  }
  if (thread_.joinable()) thread_.join();
}

LinkStats CloudLink::stats() const {
  std::lock_guard lock(mu_);
  LinkStats out = stats_;
  out.pending_samples = pending_.size();
  return out;
}

void CloudLink::run() {
  while (!stopping_) {
    std::unique_ptr<ByteStream> stream;
    try {
      stream = connector_();
    } catch (const std::exception&) {
      stream.reset();
    }
    if (stream) {
      {
        std::lock_guard lock(mu_);
        if (stopping_) {
          stream->close();
          break;
        }
        stream_ = stream.get();
        ++stats_.connections;
      }
      session(*stream);
      stream->close();
      {
        std::lock_guard lock(mu_);
        stream_ = nullptr;
      }
      connected_ = false;
      release_unacked();
      std::lock_guard lock(mu_);
      if (stats_.rejected) break;
    }
    if (stopping_) break;
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, cfg_.reconnect_backoff, [this] { return stopping_.load(); });
  }
}

void CloudLink::session(ByteStream& stream) {
  try {
    write_frame(stream, wire::encode(hello_));
    const auto frame = read_frame(stream);
    if (!frame) return;
    const auto msg = wire::decode(*frame);
    const auto* sh = std::get_if<wire::ServerHello>(&msg);
    if (!sh) throw ProtocolError("expected ServerHello");
    if (!sh->accepted) {
      std::lock_guard lock(mu_);
      stats_.rejected = true;
      return;
    }
  } catch (const std::exception&) {
    return;
  }
  connected_ = true;

  std::atomic<bool> reader_done{false};
  std::thread reader([&] {
    reader_loop(stream);
    reader_done = true;
  });

  try {
    while (!stopping_ && !reader_done) {
      wire::SampleBatch msg;
      {
        std::unique_lock lock(mu_);
        if (pending_.empty()) {
          lock.unlock();
          auto items = queue_.pop_batch(cfg_.max_samples_per_message, 20ms);
          if (items.empty()) continue;
          lock.lock();
          pending_ = std::move(items);
          pending_seq_ = ++next_seq_;
        }
        msg.seq = pending_seq_;
        msg.samples.reserve(pending_.size());
        for (const auto& q : pending_) msg.samples.push_back({q.sample.id, q.sample.features});
        unacked_[msg.seq] = pending_.size();
      }
      write_frame(stream, wire::encode(msg));
      std::lock_guard lock(mu_);
      stats_.uploaded_samples += msg.samples.size();
      ++stats_.batches_sent;
      pending_.clear();
    }
  } catch (const std::exception&) {
    // Connection failed; pending_ is resent after reconnecting.
  }
  stream.close();
  reader.join();
}

void CloudLink::reader_loop(ByteStream& stream) {
  try {
    while (auto frame = read_frame(stream)) {
      const auto msg = wire::decode(*frame);
      if (const auto* up = std::get_if<wire::ParamUpdate>(&msg)) {
        bool post = false;
        {
          std::lock_guard lock(mu_);
          ++stats_.updates_received;
          post = stats_.updates_received % cfg_.update_interval == 0;
          if (post) ++stats_.updates_posted;
        }
        if (post) mailbox_.post(wire::to_param_set(*up));
      } else if (const auto* ack = std::get_if<wire::Ack>(&msg)) {
        std::size_t done = 0;
        {
          std::lock_guard lock(mu_);
          ++stats_.acks;
          for (auto it = unacked_.begin(); it != unacked_.end() && it->first <= ack->seq;) {
            done += it->second;
            it = unacked_.erase(it);
          }
        }
        queue_.complete(done);
      } else {
        throw ProtocolError("unexpected message from cloud");
      }
    }
  } catch (const std::exception&) {
  }
}

void CloudLink::release_unacked() {
  std::size_t done = 0;
  {
    std::lock_guard lock(mu_);
    for (auto it = unacked_.begin(); it != unacked_.end();) {
      if (!pending_.empty() && it->first == pending_seq_) {
        ++it;
        continue;
      }
      done += it->second;
      it = unacked_.erase(it);
    }
  }
  queue_.complete(done);
}

// ---------------------------------------------------------------------------
// EdgeRuntime

std::string EdgeStats::to_json() const {
  nlohmann::json j = {
      {"samples", samples},
      {"batches", batches},
      {"accepted", accepted},
      {"uploads", uploaded},
      {"queue_drops", queue_drops},
      {"unsent", unsent},
      {"updates_received", updates_received},
      {"updates_applied", updates_applied},
      {"updates_stale", updates_stale},
      {"updates_rejected", updates_rejected},
      {"final_version", final_version},
      {"versions_applied", versions_applied},
      {"rejected_by_cloud", rejected_by_cloud},
      {"final_e_max", final_e_max},
  };
  return j.dump();
}

EdgeRuntime::EdgeRuntime(Model model, FiltrationConfig filtration, EdgeConfig cfg,
                         std::optional<Connector> connector)
    : model_(std::move(model)), filter_(filtration), cfg_(cfg), connector_(std::move(connector)) {
  cfg_.validate();
  check_shapes(model_);
  if (filtration.num_classes != model_.spec.num_classes) {
    throw ConfigError("filtration num_classes does not match the edge model");
  }
}

EdgeRuntime::UpdateResult EdgeRuntime::apply_update(const AffineParamSet& update) {
  if (update.version <= version_) {
    ++stale_;
    return UpdateResult::Stale;
  }
  try {
    apply_affine(model_, update);
  } catch (const CompatibilityError&) {
    ++rejected_;
    return UpdateResult::Rejected;
  }
  version_ = update.version;
  versions_applied_.push_back(update.version);
  return UpdateResult::Applied;
}

EdgeRunResult EdgeRuntime::run_stream(std::span<const Sample> stream) {
  EdgeRunResult res;
  const std::size_t n = stream.size();
  res.predictions.reserve(n);
  res.confidences.reserve(n);
  res.entropies.reserve(n);
  res.accepted.reserve(n);

  std::optional<UploadQueue> queue;
  std::unique_ptr<CloudLink> link;
  if (connector_) {
    queue.emplace(cfg_.queue_capacity);
    link = std::make_unique<CloudLink>(*connector_, wire::ClientHello{cfg_.edge_id, spec_hash(model_.spec)},
                                       *queue, mailbox_, cfg_);
    link->start();
  }

  const std::size_t applied_before = versions_applied_.size();
  const std::uint64_t stale_before = stale_, rejected_before = rejected_;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < n; start += cfg_.batch_size, ++batch_index) {
    if (auto update = mailbox_.take()) apply_update(*update);

    const auto batch = stream.subspan(start, std::min(cfg_.batch_size, n - start));
    const Tensor2 x = stack_features(batch);
    const Tensor2 logits = forward_pure(model_, x, NormMode::RunningStats);
    const auto se = softmax_entropy(logits);

    std::vector<std::span<const float>> probs;
    probs.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      probs.push_back(se.probs.row(i));
      const std::uint32_t pred = argmax(se.probs.row(i));
      res.predictions.push_back(pred);
      res.confidences.push_back(se.probs(i, pred));
      res.entropies.push_back(se.entropy[i]);
    }
    const auto accepted = filter_.process_batch(se.entropy, probs);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      res.accepted.push_back(accepted[i] ? 1 : 0);
      if (!accepted[i]) continue;
      ++res.stats.accepted;
      if (queue) {
        Sample upload{batch[i].id, batch[i].features, std::nullopt};
        if (auto dropped = queue->push(std::move(upload), se.entropy[i])) {
          res.dropped.push_back(std::move(*dropped));
        }
      }
    }
    res.batch_versions.push_back(version_);
    ++res.stats.batches;
    if (hook_) hook_(batch_index);
    if (link && cfg_.lockstep && !link->stats().rejected) queue->wait_idle(cfg_.lockstep_timeout);
  }

  if (link) {
    queue->wait_idle(cfg_.drain_timeout);
    link->stop();
    const LinkStats ls = link->stats();
    res.stats.uploaded = ls.uploaded_samples;
    res.stats.updates_received = ls.updates_received;
    res.stats.rejected_by_cloud = ls.rejected;
    res.stats.queue_drops = queue->drops();
    res.stats.unsent = queue->size() + ls.pending_samples;
  }
  res.stats.samples = n;
  res.stats.updates_applied = versions_applied_.size() - applied_before;
  res.stats.updates_stale = stale_ - stale_before;
  res.stats.updates_rejected = rejected_ - rejected_before;
  res.stats.versions_applied.assign(versions_applied_.begin() + static_cast<std::ptrdiff_t>(applied_before),
                                    versions_applied_.end());
  res.stats.final_version = version_;
  res.stats.final_e_max = filter_.state().e_max_t;
  return res;
}

}  // namespace edgeadapt
