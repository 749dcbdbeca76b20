#pragma once

// Binary edge <-> cloud protocol.
//
// Frame:   u32 payload length (LE) | payload          (length <= 16 MiB)
// Payload: "CEMA" | u8 protocol version (=1) | u8 message type | body
//
// Bodies (all integers little-endian, reals IEEE-754 binary32 LE,
// vectors as u32 count followed by the elements):
//   ClientHello (1): u32 edge_id, u64 spec_hash
//   ServerHello (2): u8 accepted (0/1), u64 current_version
//   SampleBatch (3): u64 seq, u32 count, count x { u64 sample_id, f32 vector }
//   ParamUpdate (4): u64 version, u32 count, count x { u16 layer_idx, f32 vector gamma, f32 vector beta }
//   Ack         (5): u64 seq

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "edgeadapt/affine.hpp"

namespace edgeadapt::wire {

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kMaxPayload = 16u * 1024u * 1024u;
inline constexpr std::size_t kHeaderSize = 6;

enum class MessageType : std::uint8_t {
  ClientHello = 1,
  ServerHello = 2,
  SampleBatch = 3,
  ParamUpdate = 4,
  Ack = 5,
};

struct ClientHello {
  std::uint32_t edge_id = 0;
  std::uint64_t spec_hash = 0;
  friend bool operator==(const ClientHello&, const ClientHello&) = default;
};

struct ServerHello {
  bool accepted = false;
  std::uint64_t current_version = 0;
  friend bool operator==(const ServerHello&, const ServerHello&) = default;
};

struct WireSample {
  std::uint64_t sample_id = 0;
  std::vector<float> features;
  friend bool operator==(const WireSample&, const WireSample&) = default;
};

struct SampleBatch {
  std::uint64_t seq = 0;
  std::vector<WireSample> samples;
  friend bool operator==(const SampleBatch&, const SampleBatch&) = default;
};

struct ParamUpdate {
  std::uint64_t version = 0;
  std::vector<AffineLayer> layers;
  friend bool operator==(const ParamUpdate&, const ParamUpdate&) = default;
};

struct Ack {
  std::uint64_t seq = 0;
  friend bool operator==(const Ack&, const Ack&) = default;
};

using Message = std::variant<ClientHello, ServerHello, SampleBatch, ParamUpdate, Ack>;

MessageType type_of(const Message& m);

enum class DecodeErrorKind : std::uint8_t {
  BadMagic,
  UnsupportedVersion,
  UnknownType,
  Truncated,
  TrailingBytes,
  InvalidFlag,
};

const char* to_string(DecodeErrorKind kind);

class DecodeError : public std::runtime_error {
 public:
  DecodeError(DecodeErrorKind kind, std::string field);
  DecodeErrorKind kind() const { return kind_; }
  const std::string& field() const { return field_; }

 private:
  DecodeErrorKind kind_;
  std::string field_;
};

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode(const Message& msg);
Message decode(std::span<const std::uint8_t> payload);

/// Exact encoded payload size of a ParamUpdate with the given layer widths:
/// 6 (header) + 8 (version) + 4 (layer count) + sum(2 + 4 + 4 + 8 * width).
std::size_t param_update_size(std::span<const std::size_t> widths);

ParamUpdate to_message(const AffineParamSet& set);
AffineParamSet to_param_set(const ParamUpdate& msg);

}  // namespace edgeadapt::wire
