#include "edgeadapt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "edgeadapt/error.hpp"
#include "edgeadapt/objectives.hpp"

namespace edgeadapt {

double accuracy(std::span<const std::uint32_t> predictions, std::span<const std::uint32_t> labels) {
  if (predictions.size() != labels.size()) throw ConfigError("accuracy: size mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double compute_ece(std::span<const float> confidences, std::span<const std::uint32_t> predictions,
                   std::span<const std::uint32_t> labels, std::size_t bins) {
  if (bins == 0) throw ConfigError("ece needs at least one bin");
  if (confidences.size() != labels.size() || predictions.size() != labels.size()) {
    throw ConfigError("ece: size mismatch");
  }
  if (labels.empty()) return 0.0;
  std::vector<double> conf_sum(bins, 0.0), hits(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) throw ConfigError("ece: confidence outside [0, 1]");
    const auto b = std::min(static_cast<std::size_t>(c * static_cast<double>(bins)), bins - 1);
    conf_sum[b] += c;
    hits[b] += predictions[i] == labels[i] ? 1.0 : 0.0;
    ++count[b];
  }
  const double n = static_cast<double>(labels.size());
  double ece = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    ece += (nb / n) * std::abs(hits[b] / nb - conf_sum[b] / nb);
  }
  return ece;
}

double compute_ece(const Tensor2& probs, std::span<const std::uint32_t> labels, std::size_t bins) {
  std::vector<float> conf(probs.rows);
  std::vector<std::uint32_t> pred(probs.rows);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    pred[i] = argmax(probs.row(i));
    conf[i] = probs(i, pred[i]);
  }
  return compute_ece(conf, pred, labels, bins);
}

}  // namespace edgeadapt
