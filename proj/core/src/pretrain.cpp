#include "edgeadapt/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "edgeadapt/objectives.hpp"
#include "edgeadapt/optimizer.hpp"

namespace edgeadapt {
namespace {

std::vector<std::uint32_t> labels_of(std::span<const Sample> batch) {
  std::vector<std::uint32_t> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch[i].label) throw ConfigError("pretraining data must be labelled");
    y[i] = *batch[i].label;
  }
  return y;
}

}  // namespace

double evaluate_accuracy(const Model& model, std::span<const Sample> data, std::size_t chunk) {
  if (data.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const auto batch = data.subspan(start, std::min(chunk, data.size() - start));
    const Tensor2 logits = forward_pure(model, stack_features(batch), NormMode::RunningStats);
    const auto y = labels_of(batch);
    for (std::size_t i = 0; i < batch.size(); ++i) hit += argmax(logits.row(i)) == y[i];
  }
  return static_cast<double>(hit) / static_cast<double>(data.size());
}

PretrainResult pretrain(const ModelSpec& spec, std::span<const Sample> train,
                        std::span<const Sample> holdout, const PretrainConfig& cfg) {
  spec.validate();
  if (cfg.batch_size < 2) throw ConfigError("pretraining batch size must be >= 2");
  PretrainResult res{init_model(spec, cfg.seed), {}, 0.0};
  SgdMomentum opt(cfg.learning_rate, cfg.momentum);
  std::mt19937_64 rng(cfg.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Sample> batch;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    // A trailing batch of one sample has no batch variance; skip it.
    for (std::size_t start = 0; start + 1 < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
      ForwardCache<float> cache;
      const Tensor2 logits = forward(res.model, stack_features(batch), NormMode::BatchStats, &cache);
      const auto loss = cross_entropy_loss<float>(logits, labels_of(batch), cfg.label_smoothing);
      if (!std::isfinite(loss.value)) {
        throw TrainingError("pretraining diverged in epoch " + std::to_string(epoch));
      }
      opt.step(res.model.params, backward(res.model, cache, loss.dlogits, ParamMask::AllParams));
      loss_sum += loss.value;
      ++steps;
    }
    res.epoch_loss.push_back(steps ? loss_sum / static_cast<double>(steps) : 0.0);
  }

  res.holdout_accuracy = evaluate_accuracy(res.model, holdout);
  if (cfg.min_accuracy > 0.0 && res.holdout_accuracy < cfg.min_accuracy) {
    std::ostringstream msg;
    msg << "pretraining reached only " << res.holdout_accuracy << " held-out accuracy (need "
        << cfg.min_accuracy << "); epochs=" << cfg.epochs << " lr=" << cfg.learning_rate
        << " final loss=" << (res.epoch_loss.empty() ? 0.0 : res.epoch_loss.back());
    throw TrainingError(msg.str());
  }
  return res;
}

ModelSpec default_foundation_spec(std::size_t input_dim, std::size_t num_classes) {
  return ModelSpec{input_dim, {512, 512, 512}, num_classes};
}

ModelSpec default_edge_spec(std::size_t input_dim, std::size_t num_classes) {
  return ModelSpec{input_dim, {384, 384}, num_classes};
}

PretrainedPair pretrain_pair(const StreamSpec& world, const ModelSpec& foundation_spec,
                             const ModelSpec& edge_spec, const PretrainConfig& cfg,
                             std::size_t train_samples, std::size_t holdout_samples) {
  StreamSpec clean = world;
  clean.corruption = Corruption{};
  clean.mixed.clear();
  clean.num_samples = train_samples;
  clean.seed = (std::uint64_t{1} << 40) + 2 * cfg.seed;
  const auto train = gen_stream(clean);
  clean.num_samples = holdout_samples;
  clean.seed += 1;
  const auto holdout = gen_stream(clean);

  PretrainedPair out;
  auto f = pretrain(foundation_spec, train, holdout, cfg);
  auto e = pretrain(edge_spec, train, holdout, cfg);
  out.foundation = std::move(f.model);
  out.edge = std::move(e.model);
  out.foundation_accuracy = f.holdout_accuracy;
  out.edge_accuracy = e.holdout_accuracy;
  return out;
}

}  // namespace edgeadapt
