#include "edgeadapt/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <string>

#include "edgeadapt/bytes.hpp"

namespace edgeadapt {
namespace {

constexpr char kMagic[] = "CEMN";

void write_spec(ByteWriter& w, const ModelSpec& spec) {
  w.u32(static_cast<std::uint32_t>(spec.input_dim));
  w.u32(static_cast<std::uint32_t>(spec.hidden_dims.size()));
  for (std::size_t h : spec.hidden_dims) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(spec.num_classes));
  w.f32(spec.norm_eps);
  w.f32(spec.norm_momentum);
}

auto short_blob = [](const char* field) {
  throw FormatError(std::string("checkpoint truncated while reading ") + field);
};

}  // namespace

std::vector<std::uint8_t> serialize_spec(const ModelSpec& spec) {
  ByteWriter w;
  write_spec(w, spec);
  return w.take();
}

std::vector<std::uint8_t> serialize_model(const Model& model) {
  check_shapes(model);
  ByteWriter w;
  w.tag(std::string_view(kMagic, 4));
  w.u8(kCheckpointVersion);
  write_spec(w, model.spec);
  for (const auto& b : model.params.blocks) {
    w.f32s(b.weight.data);
    w.f32s(b.bias);
    w.f32s(b.gamma);
    w.f32s(b.beta);
    w.f32s(b.running_mean);
    w.f32s(b.running_var);
  }
  w.f32s(model.params.head_weight.data);
  w.f32s(model.params.head_bias);
  return w.take();
}

Model deserialize_model(std::span<const std::uint8_t> blob) {
  ByteReader r(blob, short_blob);
  if (r.tag(4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError("not a model checkpoint (bad magic)");
  }
  const std::uint8_t version = r.u8("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Model m;
  m.spec.input_dim = r.u32("input_dim");
  const std::uint32_t nh = r.u32("hidden count");
  if (nh > 1024) throw FormatError("implausible hidden layer count");
  for (std::uint32_t i = 0; i < nh; ++i) m.spec.hidden_dims.push_back(r.u32("hidden width"));
  m.spec.num_classes = r.u32("num_classes");
  m.spec.norm_eps = r.f32("norm_eps");
  m.spec.norm_momentum = r.f32("norm_momentum");
  try {
    m.spec.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint carries an invalid spec: ") + e.what());
  }
  for (std::size_t l = 0; l < nh; ++l) {
    const std::size_t w = m.spec.hidden_dims[l];
    const std::size_t in = m.spec.width_before(l);
    HiddenBlock<float> b;
    b.weight = Tensor2(w, in, r.f32s(w * in, "block weight"));
    b.bias = r.f32s(w, "block bias");
    b.gamma = r.f32s(w, "block gamma");
    b.beta = r.f32s(w, "block beta");
    b.running_mean = r.f32s(w, "block running_mean");
    b.running_var = r.f32s(w, "block running_var");
    m.params.blocks.push_back(std::move(b));
  }
  const std::size_t c = m.spec.num_classes;
  m.params.head_weight = Tensor2(c, m.spec.last_width(), r.f32s(c * m.spec.last_width(), "head weight"));
  m.params.head_bias = r.f32s(c, "head bias");
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint");
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const auto blob = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(blob);
}

std::uint64_t spec_hash(const ModelSpec& spec) { return fnv1a64(serialize_spec(spec)); }

}  // namespace edgeadapt
