#include "edgeadapt/filtration.hpp"

#include <cmath>

#include "edgeadapt/error.hpp"

namespace edgeadapt {

void FiltrationConfig::validate() const {
  if (num_classes < 2) throw ConfigError("filtration num_classes must be >= 2");
  if (!(e_min_factor > 0.0f && e_min_factor < e_max_factor && e_max_factor < 1.0f)) {
    throw ConfigError("filtration requires 0 < e_min_factor < e_max_factor < 1");
  }
  if (!(lambda > 0.0f)) throw ConfigError("filtration lambda must be positive");
  if (!(redundancy_eps > 0.0f && redundancy_eps < 1.0f)) {
    throw ConfigError("redundancy_eps must lie in (0, 1)");
  }
  if (!(redundancy_decay > 0.0f && redundancy_decay < 1.0f)) {
    throw ConfigError("redundancy_decay must lie in (0, 1)");
  }
}

FiltrationState init_state(const FiltrationConfig& config) {
  config.validate();
  const double ln_c = std::log(static_cast<double>(config.num_classes));
  FiltrationState s;
  s.e_max_t = static_cast<double>(config.e_max_factor) * ln_c;
  s.e_min = static_cast<double>(config.e_min_factor) * ln_c;
  return s;
}

bool score(double entropy, const FiltrationState& state) {
  return entropy < state.e_max_t && entropy > state.e_min;
}

bool score(double entropy, const FiltrationState& state, const FiltrationConfig& config) {
  if (!config.enabled) return true;
  const bool high_ok = entropy < state.e_max_t;
  const bool low_ok = !config.low_entropy_filter || entropy > state.e_min;
  return high_ok && low_ok;
}

void update_threshold(FiltrationState& state, std::span<const float> batch_entropies,
                      const FiltrationConfig& config) {
  if (batch_entropies.empty()) return;
  for (float e : batch_entropies) state.entropy_sum += static_cast<long double>(e);
  state.seen_count += batch_entropies.size();
  const double avg = state.running_average();
  if (state.e_avg_prev && config.dynamic_threshold && *state.e_avg_prev > 0.0) {
    state.e_max_t = static_cast<double>(config.lambda) * state.e_max_t * (avg / *state.e_avg_prev);
  }
  state.e_avg_prev = avg;
}

bool redundancy_pass(std::span<const float> probs, FiltrationState& state,
                     const FiltrationConfig& config) {
  if (!state.redundancy_avg) {
    state.redundancy_avg = std::vector<double>(probs.begin(), probs.end());
    return true;
  }
  auto& m = *state.redundancy_avg;
  double dot = 0.0, np = 0.0, nm = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    dot += probs[k] * m[k];
    np += static_cast<double>(probs[k]) * probs[k];
    nm += m[k] * m[k];
  }
  const double denom = std::sqrt(np) * std::sqrt(nm);
  const double cosine = denom > 0.0 ? dot / denom : 0.0;
  if (cosine >= 1.0 - static_cast<double>(config.redundancy_eps)) return false;
  const double d = config.redundancy_decay;
  for (std::size_t k = 0; k < probs.size(); ++k) m[k] = (1.0 - d) * m[k] + d * probs[k];
  return true;
}

Filter::Filter(FiltrationConfig config) : config_(config), state_(init_state(config)) {}

std::vector<bool> Filter::process_batch(std::span<const float> entropies,
                                        std::span<const std::span<const float>> probs) {
  std::vector<bool> accepted(entropies.size(), false);
  for (std::size_t i = 0; i < entropies.size(); ++i) {
    bool ok = score(entropies[i], state_, config_);
    if (ok && config_.enabled && config_.redundancy_enabled && i < probs.size()) {
      ok = redundancy_pass(probs[i], state_, config_);
    }
    accepted[i] = ok;
  }
  update_threshold(state_, entropies, config_);
  return accepted;
}

}  // namespace edgeadapt
