#pragma once

// Synthetic shifted streams: a clean generator (Gaussian blobs or concentric
// shells) followed by a corruption whose magnitude is set by a severity
// level 1..5. Labels are kept on the samples for metrics only.
//
// Stream file layout (little-endian):
//   "CEMS" | u8 version (=1) | u32 num_classes | u32 input_dim | u64 count
//   | count x (u64 id | u32 label | f32 x input_dim)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgeadapt/sample.hpp"

namespace edgeadapt {

enum class Generator { GaussianBlobs, ConcentricRings };

enum class CorruptionKind { None, AdditiveGaussian, FeatureDropout, AffineDistort };

struct Corruption {
  CorruptionKind kind = CorruptionKind::None;
  float sigma = 0.0f;  // AdditiveGaussian
  float rate = 0.0f;   // FeatureDropout
  float scale = 0.0f;  // AffineDistort: log-scale spread per feature
  float shift = 0.0f;  // AffineDistort: shift spread per feature

  /// Magnitudes for a severity level in 1..5 (0 gives the identity).
  static Corruption at(CorruptionKind kind, int severity);
};

inline constexpr float kNoiseSigma[5] = {0.2f, 0.4f, 0.6f, 0.9f, 1.3f};
inline constexpr float kDropoutRate[5] = {0.1f, 0.2f, 0.3f, 0.45f, 0.6f};
inline constexpr float kDistortScale[5] = {0.15f, 0.3f, 0.45f, 0.6f, 0.8f};
inline constexpr float kDistortShift[5] = {0.5f, 1.0f, 1.5f, 2.0f, 2.5f};

struct StreamSpec {
  Generator generator = Generator::GaussianBlobs;
  std::size_t num_classes = 10;
  std::size_t input_dim = 32;
  std::size_t num_samples = 20000;
  Corruption corruption;
  // When non-empty, the stream is split into equal contiguous segments, one
  // corruption each, and `corruption` is ignored.
  std::vector<Corruption> mixed;
  std::uint64_t seed = 0;
  // Fixes class geometry and corruption directions. Training data and test
  // streams must share it.
  std::uint64_t world_seed = 1;

  // Geometry.
  float center_scale = 1.0f;
  float cluster_std = 1.0f;
  float ring_gap = 1.0f;
  float ring_std = 0.15f;

  void validate() const;
};

std::vector<Sample> gen_stream(const StreamSpec& spec);

CorruptionKind parse_corruption(std::string_view name);
std::string corruption_name(CorruptionKind kind);
Generator parse_generator(std::string_view name);

struct StreamFile {
  std::size_t num_classes = 0;
  std::size_t input_dim = 0;
  std::vector<Sample> samples;
};

inline constexpr std::uint8_t kStreamVersion = 1;

std::vector<std::uint8_t> serialize_stream(std::size_t num_classes, std::size_t input_dim,
                                           const std::vector<Sample>& samples);
StreamFile deserialize_stream(std::span<const std::uint8_t> bytes);
void save_stream(const std::filesystem::path& path, std::size_t num_classes,
                 std::size_t input_dim, const std::vector<Sample>& samples);
StreamFile load_stream(const std::filesystem::path& path);

}  // namespace edgeadapt
