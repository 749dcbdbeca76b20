#pragma once

// Edge-side sample selection. A sample is uploaded when its prediction
// entropy lies strictly inside (e_min, e_max_t); e_max_t follows the running
// mean entropy of everything the edge has inferred.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace edgeadapt {

struct FiltrationConfig {
  std::size_t num_classes = 10;
  float e_max_factor = 0.4f;
  float e_min_factor = 0.02f;
  float lambda = 1.0f;

  // Switches used to express the baselines with the same code path.
  bool enabled = true;             // false: every sample is uploaded
  bool dynamic_threshold = true;   // false: e_max stays at its initial value
  bool low_entropy_filter = true;  // false: no lower threshold

  bool redundancy_enabled = true;
  float redundancy_eps = 0.05f;
  float redundancy_decay = 0.1f;

  void validate() const;
};

struct FiltrationState {
  double e_max_t = 0.0;
  double e_min = 0.0;
  std::uint64_t seen_count = 0;
  long double entropy_sum = 0.0L;
  std::optional<double> e_avg_prev;
  std::optional<std::vector<double>> redundancy_avg;

  double running_average() const {
    return seen_count == 0 ? 0.0 : static_cast<double>(entropy_sum / static_cast<long double>(seen_count));
  }
};

/// Thresholds from 0.4 ln C and 0.02 ln C (by default).
FiltrationState init_state(const FiltrationConfig& config);

/// Combined binary score: entropy < e_max_t AND entropy > e_min, with the
/// switches in `config` able to open either side.
bool score(double entropy, const FiltrationState& state, const FiltrationConfig& config);
bool score(double entropy, const FiltrationState& state);

/// Folds one inference batch (all samples, uploaded or not) into the running
/// entropy mean and rescales e_max_t by lambda * E_avg^t / E_avg^{t-1}.
void update_threshold(FiltrationState& state, std::span<const float> batch_entropies,
                      const FiltrationConfig& config);

/// Cosine-similarity redundancy test against a moving average of accepted
/// probability vectors. Updates the average when the sample passes.
bool redundancy_pass(std::span<const float> probs, FiltrationState& state,
                     const FiltrationConfig& config);

/// Stateful wrapper used by the edge runtime.
class Filter {
 public:
  explicit Filter(FiltrationConfig config);

  /// Scores one batch and then updates the threshold. Returns acceptance flags.
  std::vector<bool> process_batch(std::span<const float> entropies,
                                  std::span<const std::span<const float>> probs);

  const FiltrationState& state() const { return state_; }
  const FiltrationConfig& config() const { return config_; }

 private:
  FiltrationConfig config_;
  FiltrationState state_;
};

}  // namespace edgeadapt
