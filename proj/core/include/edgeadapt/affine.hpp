#pragma once

#include <cstdint>
#include <vector>

#include "edgeadapt/model.hpp"

namespace edgeadapt {

struct AffineLayer {
  std::uint16_t layer_index = 0;
  std::vector<float> gamma;
  std::vector<float> beta;
  friend bool operator==(const AffineLayer&, const AffineLayer&) = default;
};

/// Versioned scale/shift vectors of every normalization layer. This is the
/// only part of a model that ever travels from the cloud to the edges.
struct AffineParamSet {
  std::uint64_t version = 0;
  std::vector<AffineLayer> layers;

  std::size_t real_count() const;
  friend bool operator==(const AffineParamSet&, const AffineParamSet&) = default;
};

AffineParamSet extract_affine(const Model& model, std::uint64_t version = 0);

/// Replaces gamma/beta in place. Throws CompatibilityError, leaving the model
/// untouched, when the layer layout or widths differ.
void apply_affine(Model& model, const AffineParamSet& set);

/// Same check as apply_affine without modifying anything.
void check_affine_compatible(const Model& model, const AffineParamSet& set);

}  // namespace edgeadapt
