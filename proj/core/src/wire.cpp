#include "edgeadapt/wire.hpp"

#include <string_view>

#include "edgeadapt/bytes.hpp"

namespace edgeadapt::wire {
namespace {

constexpr std::string_view kMagic = "CEMA";

struct Truncation {
  [[noreturn]] void operator()(const char* field) const {
    throw DecodeError(DecodeErrorKind::Truncated, field);
  }
};

using Reader = ByteReader<Truncation>;

void put_vector(ByteWriter& w, std::span<const float> v) {
  if (v.size() > kMaxPayload / 4) throw EncodeError("vector exceeds protocol cap");
  w.u32(static_cast<std::uint32_t>(v.size()));
  w.f32s(v);
}

std::vector<float> get_vector(Reader& r, const char* field) {
  const std::uint32_t n = r.u32(field);
  return r.f32s(n, field);
}

void encode_body(ByteWriter& w, const ClientHello& m) {
  w.u32(m.edge_id);
  w.u64(m.spec_hash);
}
void encode_body(ByteWriter& w, const ServerHello& m) {
  w.u8(m.accepted ? 1 : 0);
  w.u64(m.current_version);
}
void encode_body(ByteWriter& w, const SampleBatch& m) {
  w.u64(m.seq);
  w.u32(static_cast<std::uint32_t>(m.samples.size()));
  for (const auto& s : m.samples) {
    w.u64(s.sample_id);
    put_vector(w, s.features);
  }
}
void encode_body(ByteWriter& w, const ParamUpdate& m) {
  w.u64(m.version);
  w.u32(static_cast<std::uint32_t>(m.layers.size()));
  for (const auto& l : m.layers) {
    w.u16(l.layer_index);
    put_vector(w, l.gamma);
    put_vector(w, l.beta);
  }
}
void encode_body(ByteWriter& w, const Ack& m) { w.u64(m.seq); }

}  // namespace

const char* to_string(DecodeErrorKind kind) {
  switch (kind) {
    case DecodeErrorKind::BadMagic: return "BadMagic";
    case DecodeErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case DecodeErrorKind::UnknownType: return "UnknownType";
    case DecodeErrorKind::Truncated: return "Truncated";
    case DecodeErrorKind::TrailingBytes: return "TrailingBytes";
    case DecodeErrorKind::InvalidFlag: return "InvalidFlag";
  }
  return "Unknown";
}

DecodeError::DecodeError(DecodeErrorKind kind, std::string field)
    : std::runtime_error(std::string(to_string(kind)) + (field.empty() ? "" : " (" + field + ")")),
      kind_(kind),
      field_(std::move(field)) {}

MessageType type_of(const Message& m) {
  return static_cast<MessageType>(m.index() + 1);
}

std::vector<std::uint8_t> encode(const Message& msg) {
  ByteWriter w;
  w.tag(kMagic);
  w.u8(kProtocolVersion);
  w.u8(static_cast<std::uint8_t>(type_of(msg)));
  std::visit([&w](const auto& m) { encode_body(w, m); }, msg);
  if (w.size() > kMaxPayload) {
    throw EncodeError("encoded payload of " + std::to_string(w.size()) + " bytes exceeds the 16 MiB cap");
  }
  return w.take();
}

Message decode(std::span<const std::uint8_t> payload) {
  Reader r(payload, Truncation{});
  if (r.tag(4, "magic") != kMagic) throw DecodeError(DecodeErrorKind::BadMagic, "magic");
  const std::uint8_t version = r.u8("version");
  if (version != kProtocolVersion) {
    throw DecodeError(DecodeErrorKind::UnsupportedVersion, "version " + std::to_string(version));
  }
  const std::uint8_t type = r.u8("type");
  Message out;
  switch (static_cast<MessageType>(type)) {
    case MessageType::ClientHello: {
      ClientHello m;
      m.edge_id = r.u32("edge_id");
      m.spec_hash = r.u64("spec_hash");
      out = m;
      break;
    }
    case MessageType::ServerHello: {
      ServerHello m;
      const std::uint8_t flag = r.u8("accepted");
      if (flag > 1) throw DecodeError(DecodeErrorKind::InvalidFlag, "accepted");
      m.accepted = flag == 1;
      m.current_version = r.u64("current_version");
      out = m;
      break;
    }
    case MessageType::SampleBatch: {
      SampleBatch m;
      m.seq = r.u64("seq");
      const std::uint32_t n = r.u32("sample count");
      // Each sample needs at least 12 bytes; reject impossible counts early.
      r.need(static_cast<std::size_t>(n) * 12, "samples");
      m.samples.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        WireSample s;
        s.sample_id = r.u64("sample_id");
        s.features = get_vector(r, "features");
        m.samples.push_back(std::move(s));
      }
      out = std::move(m);
      break;
    }
    case MessageType::ParamUpdate: {
      ParamUpdate m;
      m.version = r.u64("version");
      const std::uint32_t n = r.u32("layer count");
      r.need(static_cast<std::size_t>(n) * 10, "layers");
      m.layers.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        AffineLayer l;
        l.layer_index = r.u16("layer_idx");
        l.gamma = get_vector(r, "gamma");
        l.beta = get_vector(r, "beta");
        m.layers.push_back(std::move(l));
      }
      out = std::move(m);
      break;
    }
    case MessageType::Ack: {
      Ack m;
      m.seq = r.u64("seq");
      out = m;
      break;
    }
    default:
      throw DecodeError(DecodeErrorKind::UnknownType, "type " + std::to_string(type));
  }
  if (r.remaining() != 0) {
    throw DecodeError(DecodeErrorKind::TrailingBytes, std::to_string(r.remaining()) + " bytes");
  }
  return out;
}

std::size_t param_update_size(std::span<const std::size_t> widths) {
  std::size_t n = kHeaderSize + 8 + 4;
  for (std::size_t w : widths) n += 2 + 4 + 4 + 8 * w;
  return n;
}

ParamUpdate to_message(const AffineParamSet& set) { return {set.version, set.layers}; }

AffineParamSet to_param_set(const ParamUpdate& msg) { return {msg.version, msg.layers}; }

}  // namespace edgeadapt::wire
