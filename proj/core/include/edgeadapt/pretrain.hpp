#pragma once

// Supervised pretraining on clean data: cross-entropy, every parameter
// trainable, batch statistics during training.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgeadapt/model.hpp"
#include "edgeadapt/sample.hpp"
#include "edgeadapt/stream.hpp"

namespace edgeadapt {

struct PretrainConfig {
  std::size_t epochs = 8;
  std::size_t batch_size = 64;
  float learning_rate = 0.05f;
  float momentum = 0.9f;
  float label_smoothing = 0.02f;
  std::uint64_t seed = 0;
  // Held-out accuracy below this aborts with TrainingError. 0 disables.
  double min_accuracy = 0.8;
};

struct PretrainResult {
  Model model;
  std::vector<double> epoch_loss;
  double holdout_accuracy = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Accuracy of `model` in running-statistics mode, evaluated in chunks.
double evaluate_accuracy(const Model& model, std::span<const Sample> data, std::size_t chunk = 512);

PretrainResult pretrain(const ModelSpec& spec, std::span<const Sample> train,
                        std::span<const Sample> holdout, const PretrainConfig& cfg);

/// Default harness architectures. The edge affine payload is below 1% of
/// its full parameter count.
ModelSpec default_foundation_spec(std::size_t input_dim = 32, std::size_t num_classes = 10);
ModelSpec default_edge_spec(std::size_t input_dim = 32, std::size_t num_classes = 10);

struct PretrainedPair {
  Model foundation;
  Model edge;
  double foundation_accuracy = 0.0;
  double edge_accuracy = 0.0;
};

/// Trains both models on clean samples from `world` (its corruption and
/// sample seed are ignored; training and held-out seeds are derived from
/// cfg.seed and never collide with small stream seeds).
PretrainedPair pretrain_pair(const StreamSpec& world, const ModelSpec& foundation_spec,
                             const ModelSpec& edge_spec, const PretrainConfig& cfg,
                             std::size_t train_samples = 10000, std::size_t holdout_samples = 2000);

}  // namespace edgeadapt
