#include "edgeadapt/adapt_engine.hpp"

#include <cmath>

#include "edgeadapt/objectives.hpp"

namespace edgeadapt {
namespace {

std::vector<std::uint64_t> ids_of(std::span<const Sample> batch) {
  std::vector<std::uint64_t> ids;
  ids.reserve(batch.size());
  for (const auto& s : batch) ids.push_back(s.id);
  return ids;
}

std::vector<float> weights_from(const std::vector<float>& entropy, float e_max_ref) {
  std::vector<float> w(entropy.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = sample_weight(entropy[i], e_max_ref);
  return w;
}

}  // namespace

void AdaptConfig::validate() const {
  if (!(learning_rate > 0.0f)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(alpha >= 0.0f) || !(beta >= 0.0f)) throw ConfigError("alpha and beta must be >= 0");
  if (upload_batch == 0) throw ConfigError("upload batch must be >= 1");
}

float AdaptConfig::resolved_e_max_ref(std::size_t num_classes) const {
  if (e_max_ref > 0.0f) return e_max_ref;
  return 0.4f * std::log(static_cast<float>(num_classes));
}

float sample_weight(float entropy, float e_max_ref) { return std::exp(e_max_ref - entropy); }

std::vector<std::uint32_t> pseudo_labels(const Tensor2& probs) {
  std::vector<std::uint32_t> labels(probs.rows);
  for (std::size_t i = 0; i < probs.rows; ++i) labels[i] = argmax(probs.row(i));
  return labels;
}

FoundationStep adapt_foundation(Model& foundation, SgdMomentum& opt,
                                std::span<const Sample> batch, const AdaptConfig& cfg) {
  if (batch.empty()) return {};
  const Tensor2 x = stack_features(batch);
  ForwardCache<float> cache;
  Tensor2 logits;
  try {
    logits = forward(foundation, x, NormMode::BatchStats, &cache);
  } catch (const NumericError& e) {
    throw AdaptError(std::string("foundation step aborted: ") + e.what(), ids_of(batch));
  }
  const auto se = softmax_entropy(logits);
  const auto weights =
      weights_from(se.entropy, cfg.resolved_e_max_ref(foundation.spec.num_classes));
  const auto loss = weighted_entropy_loss<float>(logits, weights);
  if (!std::isfinite(loss.value) || !loss.dlogits.all_finite()) {
    throw AdaptError("foundation step aborted: non-finite loss", ids_of(batch));
  }
  const auto grads = backward(foundation, cache, loss.dlogits, ParamMask::AffineOnly);
  opt.step(foundation.params, grads);
  return {loss.value, batch.size()};
}

EdgeStep adapt_edge(Model& edge, const Model& foundation, SgdMomentum& opt,
                    std::span<const Sample> uploaded, const ReplayBuffer& buffer,
                    const AdaptConfig& cfg, std::mt19937_64& rng) {
  std::vector<Sample> batch(uploaded.begin(), uploaded.end());
  const auto replay = buffer.draw(cfg.replay_draw, rng);
  batch.insert(batch.end(), replay.begin(), replay.end());
  if (batch.empty()) return {};

  const Tensor2 x = stack_features(batch);
  Tensor2 teacher_logits, student_logits;
  ForwardCache<float> cache;
  try {
    teacher_logits = forward_pure(foundation, x, cfg.teacher_norm_mode);
    student_logits = forward(edge, x, cfg.edge_norm_mode, &cache);
  } catch (const NumericError& e) {
    throw AdaptError(std::string("edge step aborted: ") + e.what(), ids_of(batch));
  }
  const auto teacher = softmax_entropy(teacher_logits);
  const auto labels = pseudo_labels(teacher.probs);
  const auto weights =
      weights_from(teacher.entropy, cfg.resolved_e_max_ref(foundation.spec.num_classes));
  const auto loss = distillation_loss<float>(student_logits, teacher.probs, labels, weights,
                                             cfg.alpha, cfg.beta);
  if (!std::isfinite(loss.value) || !loss.dlogits.all_finite()) {
    throw AdaptError("edge step aborted: non-finite loss", ids_of(batch));
  }
  const auto grads = backward(edge, cache, loss.dlogits, ParamMask::AffineOnly);
  opt.step(edge.params, grads);
  return {loss.value, batch.size(), replay.size()};
}

AdaptEngine::AdaptEngine(Model foundation, Model edge, AdaptConfig cfg)
    : cfg_(cfg),
      foundation_(std::move(foundation)),
      edge_(std::move(edge)),
      buffer_(cfg.buffer_capacity),
      foundation_opt_(cfg.learning_rate, cfg.momentum),
      edge_opt_(cfg.learning_rate, cfg.momentum),
      rng_(cfg.seed) {
  cfg_.validate();
  check_shapes(foundation_);
  check_shapes(edge_);
  if (foundation_.spec.num_classes != edge_.spec.num_classes ||
      foundation_.spec.input_dim != edge_.spec.input_dim) {
    throw ConfigError("foundation and edge models must share input_dim and num_classes");
  }
}

StepOutcome AdaptEngine::step(std::span<const Sample> uploaded) {
  buffer_.ingest(uploaded);
  StepOutcome out;
  out.foundation_loss = adapt_foundation(foundation_, foundation_opt_, uploaded, cfg_).loss;
  const EdgeStep es = adapt_edge(edge_, foundation_, edge_opt_, uploaded, buffer_, cfg_, rng_);
  out.edge_loss = es.loss;
  out.edge_batch = es.batch_size;
  ++version_;
  out.step = version_;
  out.params = extract_affine(edge_, version_);
  out.buffer_size = buffer_.size();
  return out;
}

}  // namespace edgeadapt
