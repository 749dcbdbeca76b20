#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "edgeadapt/tensor.hpp"

namespace edgeadapt {

/// A test sample. The label is held out: only metric code may read it.
struct Sample {
  std::uint64_t id = 0;
  std::vector<float> features;
  std::optional<std::uint32_t> label;

  friend bool operator==(const Sample&, const Sample&) = default;
};

inline Tensor2 stack_features(std::span<const Sample> samples) {
  if (samples.empty()) return {};
  const std::size_t dim = samples.front().features.size();
  Tensor2 t(samples.size(), dim);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != dim) {
      throw ConfigError("samples in one batch must share a feature width");
    }
    std::copy(samples[i].features.begin(), samples[i].features.end(), t.row(i).begin());
  }
  return t;
}

}  // namespace edgeadapt
