#pragma once

// Self-describing model blob:
//   "CEMN" | u8 format version (=1)
//   | u32 input_dim | u32 hidden count | u32 width x hidden count | u32 num_classes
//   | f32 norm_eps | f32 norm_momentum
//   | per hidden block: weight (out x in, row-major), bias, gamma, beta,
//                       running_mean, running_var
//   | classifier weight (classes x last width), classifier bias
// All integers and reals little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "edgeadapt/model.hpp"

namespace edgeadapt {

inline constexpr std::uint8_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_spec(const ModelSpec& spec);
std::vector<std::uint8_t> serialize_model(const Model& model);
Model deserialize_model(std::span<const std::uint8_t> blob);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

/// FNV-1a over serialize_spec; edges and the cloud compare it at hello time.
std::uint64_t spec_hash(const ModelSpec& spec);

}  // namespace edgeadapt
