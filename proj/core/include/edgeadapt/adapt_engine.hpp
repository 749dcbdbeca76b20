#pragma once

// Cloud-side adaptation: weighted entropy minimization of the foundation
// model followed by distillation into the edge model over fresh uploads plus
// replayed samples. Only normalization scale/shift parameters move.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "edgeadapt/affine.hpp"
#include "edgeadapt/error.hpp"
#include "edgeadapt/model.hpp"
#include "edgeadapt/optimizer.hpp"
#include "edgeadapt/replay_buffer.hpp"
#include "edgeadapt/sample.hpp"

namespace edgeadapt {

struct AdaptConfig {
  float learning_rate = 0.00025f;
  float momentum = 0.9f;
  float alpha = 3.0f;
  float beta = 3.0f;
  std::size_t upload_batch = 32;
  std::size_t replay_draw = 96;
  std::size_t buffer_capacity = 10000;
  // Reference E_max inside the sample weight; <= 0 selects 0.4 ln C.
  float e_max_ref = 0.0f;
  NormMode teacher_norm_mode = NormMode::BatchStats;
  NormMode edge_norm_mode = NormMode::RunningStats;
  std::uint64_t seed = 0;

  void validate() const;
  float resolved_e_max_ref(std::size_t num_classes) const;
};

/// Loss became non-finite; the step was not applied.
class AdaptError : public NumericError {
 public:
  AdaptError(const std::string& what, std::vector<std::uint64_t> ids)
      : NumericError(what), sample_ids(std::move(ids)) {}
  std::vector<std::uint64_t> sample_ids;
};

/// exp(e_max_ref - entropy). Callers treat it as a constant.
float sample_weight(float entropy, float e_max_ref);

std::vector<std::uint32_t> pseudo_labels(const Tensor2& probs);

struct FoundationStep {
  double loss = 0.0;  // before the update
  std::size_t batch_size = 0;
};

FoundationStep adapt_foundation(Model& foundation, SgdMomentum& opt,
                                std::span<const Sample> batch, const AdaptConfig& cfg);

struct EdgeStep {
  double loss = 0.0;  // before the update
  std::size_t batch_size = 0;
  std::size_t replay_count = 0;
};

EdgeStep adapt_edge(Model& edge, const Model& foundation, SgdMomentum& opt,
                    std::span<const Sample> uploaded, const ReplayBuffer& buffer,
                    const AdaptConfig& cfg, std::mt19937_64& rng);

struct StepOutcome {
  std::uint64_t step = 0;
  AffineParamSet params;
  double foundation_loss = 0.0;
  double edge_loss = 0.0;
  std::size_t edge_batch = 0;
  std::size_t buffer_size = 0;
};

/// Owns both models, the replay buffer and the optimizers. Not thread-safe;
/// the cloud service calls it from a single context.
class AdaptEngine {
 public:
  AdaptEngine(Model foundation, Model edge, AdaptConfig cfg);

  /// ingest -> adapt_foundation -> adapt_edge; emits the next version.
  StepOutcome step(std::span<const Sample> uploaded);

  const Model& foundation() const { return foundation_; }
  const Model& edge() const { return edge_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const AdaptConfig& config() const { return cfg_; }
  std::uint64_t version() const { return version_; }

 private:
  AdaptConfig cfg_;
  Model foundation_;
  Model edge_;
  ReplayBuffer buffer_;
  SgdMomentum foundation_opt_;
  SgdMomentum edge_opt_;
  std::mt19937_64 rng_;
  std::uint64_t version_ = 0;
};

}  // namespace edgeadapt
