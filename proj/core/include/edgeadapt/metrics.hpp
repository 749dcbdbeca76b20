#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "edgeadapt/tensor.hpp"

namespace edgeadapt {

double accuracy(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels);

/// Expected calibration error over `bins` equal-width confidence bins on
/// [0, 1]. Confidence 1.0 falls in the last bin.
double compute_ece(std::span<const float> confidences, std::span<const std::uint32_t> predictions,
                   std::span<const std::uint32_t> labels, std::size_t bins = 15);

/// Same, from a probability matrix: confidence is the row max, prediction
/// its argmax.
double compute_ece(const Tensor2& probs, std::span<const std::uint32_t> labels, std::size_t bins = 15);

}  // namespace edgeadapt
