#include "edgeadapt/affine.hpp"

#include <string>

#include "edgeadapt/error.hpp"

namespace edgeadapt {

std::size_t AffineParamSet::real_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.gamma.size() + l.beta.size();
  return n;
}

AffineParamSet extract_affine(const Model& model, std::uint64_t version) {
  AffineParamSet set;
  set.version = version;
  for (std::size_t l = 0; l < model.params.blocks.size(); ++l) {
    const auto& b = model.params.blocks[l];
    set.layers.push_back({static_cast<std::uint16_t>(l), b.gamma, b.beta});
  }
  return set;
}

void check_affine_compatible(const Model& model, const AffineParamSet& set) {
  const auto& blocks = model.params.blocks;
  if (set.layers.size() != blocks.size()) {
    throw CompatibilityError("parameter set has " + std::to_string(set.layers.size()) +
                             " normalization layers, model has " + std::to_string(blocks.size()));
  }
  for (std::size_t i = 0; i < set.layers.size(); ++i) {
    const auto& l = set.layers[i];
    if (l.layer_index != i) {
      throw CompatibilityError("parameter set layer " + std::to_string(i) + " carries index " +
                               std::to_string(l.layer_index));
    }
    const std::size_t w = blocks[i].gamma.size();
    if (l.gamma.size() != w || l.beta.size() != w) {
      throw CompatibilityError("width mismatch at normalization layer " + std::to_string(i) +
                               ": model " + std::to_string(w) + ", update " +
                               std::to_string(l.gamma.size()) + "/" + std::to_string(l.beta.size()));
    }
  }
}

void apply_affine(Model& model, const AffineParamSet& set) {
  check_affine_compatible(model, set);
  for (const auto& l : set.layers) {
    auto& b = model.params.blocks[l.layer_index];
    b.gamma = l.gamma;
    b.beta = l.beta;
  }
}

}  // namespace edgeadapt
