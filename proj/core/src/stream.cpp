#include "edgeadapt/stream.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "edgeadapt/bytes.hpp"
#include "edgeadapt/error.hpp"

namespace edgeadapt {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) { return splitmix64(seed ^ splitmix64(salt)); }

struct World {
  std::vector<std::vector<float>> centers;
  std::vector<float> distort_log_scale;  // unit-variance directions, scaled per severity
  std::vector<float> distort_shift;
};

World make_world(const StreamSpec& spec) {
  std::mt19937_64 rng(derive(spec.world_seed, 1));
  std::normal_distribution<float> normal(0.0f, 1.0f);
  World w;
  w.centers.assign(spec.num_classes, std::vector<float>(spec.input_dim));
  for (auto& c : w.centers) {
    for (auto& v : c) v = spec.center_scale * normal(rng);
  }
  std::mt19937_64 drng(derive(spec.world_seed, 2));
  w.distort_log_scale.resize(spec.input_dim);
  w.distort_shift.resize(spec.input_dim);
  for (auto& v : w.distort_log_scale) v = normal(drng);
  for (auto& v : w.distort_shift) v = normal(drng);
  return w;
}

void clean_sample(const StreamSpec& spec, const World& world, std::uint32_t label,
                  std::mt19937_64& rng, std::vector<float>& x) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  if (spec.generator == Generator::GaussianBlobs) {
    for (std::size_t d = 0; d < spec.input_dim; ++d) {
      x[d] = world.centers[label][d] + spec.cluster_std * normal(rng);
    }
    return;
  }
  double norm2 = 0.0;
  for (auto& v : x) {
    v = normal(rng);
    norm2 += static_cast<double>(v) * v;
  }
  const float radius = spec.ring_gap * static_cast<float>(label + 1) + spec.ring_std * normal(rng);
  const float inv = static_cast<float>(1.0 / std::sqrt(std::max(norm2, 1e-12)));
  for (auto& v : x) v *= radius * inv;
}

void corrupt(const Corruption& c, const World& world, std::mt19937_64& rng, std::vector<float>& x) {
  switch (c.kind) {
    case CorruptionKind::None:
      return;
    case CorruptionKind::AdditiveGaussian: {
      std::normal_distribution<float> normal(0.0f, 1.0f);
      for (auto& v : x) v += c.sigma * normal(rng);
      return;
    }
    case CorruptionKind::FeatureDropout: {
      std::uniform_real_distribution<float> u(0.0f, 1.0f);
      for (auto& v : x) {
        if (u(rng) < c.rate) v = 0.0f;
      }
      return;
    }
    case CorruptionKind::AffineDistort:
      for (std::size_t d = 0; d < x.size(); ++d) {
        x[d] = x[d] * std::exp(c.scale * world.distort_log_scale[d]) + c.shift * world.distort_shift[d];
      }
      return;
  }
}

auto short_stream = [](const char* field) {
  throw FormatError(std::string("stream file truncated while reading ") + field);
};

}  // namespace

Corruption Corruption::at(CorruptionKind kind, int severity) {
  if (severity < 0 || severity > 5) throw ConfigError("severity must be in 1..5");
  Corruption c;
  c.kind = kind;
  if (severity == 0 || kind == CorruptionKind::None) return c;
  const int i = severity - 1;
  c.sigma = kNoiseSigma[i];
  c.rate = kDropoutRate[i];
  c.scale = kDistortScale[i];
  c.shift = kDistortShift[i];
  return c;
}

void StreamSpec::validate() const {
  if (num_classes < 2) throw ConfigError("stream needs at least two classes");
  if (input_dim == 0) throw ConfigError("stream input_dim must be >= 1");
  if (mixed.size() > num_samples && num_samples > 0) {
    throw ConfigError("more mixed segments than samples");
  }
  auto check = [](const Corruption& c) {
    if (c.sigma < 0.0f || c.scale < 0.0f || c.shift < 0.0f) {
      throw ConfigError("corruption magnitudes must be non-negative");
    }
    if (c.rate < 0.0f || c.rate > 1.0f) throw ConfigError("dropout rate must be in [0, 1]");
  };
  check(corruption);
  for (const auto& c : mixed) check(c);
}

std::vector<Sample> gen_stream(const StreamSpec& spec) {
  spec.validate();
  const World world = make_world(spec);
  std::mt19937_64 label_rng(derive(spec.seed, 11));
  std::mt19937_64 clean_rng(derive(spec.seed, 12));
  std::mt19937_64 corrupt_rng(derive(spec.seed, 13));
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(spec.num_classes - 1));

  std::vector<Sample> out(spec.num_samples);
  for (std::size_t i = 0; i < spec.num_samples; ++i) {
    Sample& s = out[i];
    s.id = i;
    const std::uint32_t y = pick(label_rng);
    s.label = y;
    s.features.resize(spec.input_dim);
    clean_sample(spec, world, y, clean_rng, s.features);
    const Corruption& c =
        spec.mixed.empty() ? spec.corruption : spec.mixed[i * spec.mixed.size() / spec.num_samples];
    corrupt(c, world, corrupt_rng, s.features);
  }
  return out;
}

CorruptionKind parse_corruption(std::string_view name) {
  if (name == "none") return CorruptionKind::None;
  if (name == "gaussian" || name == "noise") return CorruptionKind::AdditiveGaussian;
  if (name == "dropout") return CorruptionKind::FeatureDropout;
  if (name == "affine") return CorruptionKind::AffineDistort;
  throw ConfigError("unknown corruption '" + std::string(name) + "'");
}

std::string corruption_name(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::None: return "none";
    case CorruptionKind::AdditiveGaussian: return "gaussian";
    case CorruptionKind::FeatureDropout: return "dropout";
    case CorruptionKind::AffineDistort: return "affine";
  }
  return "none";
}

Generator parse_generator(std::string_view name) {
  if (name == "blobs") return Generator::GaussianBlobs;
  if (name == "rings") return Generator::ConcentricRings;
  throw ConfigError("unknown generator '" + std::string(name) + "'");
}

std::vector<std::uint8_t> serialize_stream(std::size_t num_classes, std::size_t input_dim,
                                           const std::vector<Sample>& samples) {
  ByteWriter w;
  w.tag("CEMS");
  w.u8(kStreamVersion);
  w.u32(static_cast<std::uint32_t>(num_classes));
  w.u32(static_cast<std::uint32_t>(input_dim));
  w.u64(samples.size());
  for (const auto& s : samples) {
    if (s.features.size() != input_dim) throw ConfigError("sample width differs from stream input_dim");
    w.u64(s.id);
    w.u32(s.label.value_or(0));
    w.f32s(s.features);
  }
  return w.take();
}

StreamFile deserialize_stream(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, short_stream);
  if (r.tag(4, "magic") != "CEMS") throw FormatError("not a stream file (bad magic)");
  if (r.u8("version") != kStreamVersion) throw FormatError("unsupported stream file version");
  StreamFile f;
  f.num_classes = r.u32("num_classes");
  f.input_dim = r.u32("input_dim");
  const std::uint64_t count = r.u64("count");
  const std::size_t record = 12 + 4 * f.input_dim;
  if (count > r.remaining() / record) throw FormatError("stream file truncated (count exceeds data)");
  f.samples.resize(count);
  for (auto& s : f.samples) {
    s.id = r.u64("id");
    const std::uint32_t y = r.u32("label");
    if (y >= f.num_classes) throw FormatError("stream label out of range");
    s.label = y;
    s.features = r.f32s(f.input_dim, "features");
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after stream records");
  return f;
}

void save_stream(const std::filesystem::path& path, std::size_t num_classes, std::size_t input_dim,
                 const std::vector<Sample>& samples) {
  const auto bytes = serialize_stream(num_classes, input_dim, samples);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

StreamFile load_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_stream(bytes);
}

}  // namespace edgeadapt
