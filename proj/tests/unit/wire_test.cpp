#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <string>

#include "edgeadapt/model.hpp"
#include "edgeadapt/pretrain.hpp"
#include "edgeadapt/wire.hpp"

namespace {

using namespace edgeadapt;
using namespace edgeadapt::wire;

std::vector<std::uint8_t> load_hex(const std::string& name) {
  std::ifstream in(std::string(EDGEADAPT_FIXTURE_DIR) + "/" + name + ".hex");
  EXPECT_TRUE(in) << name;
  std::string hex;
  in >> hex;
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

std::vector<std::pair<std::string, Message>> golden_messages() {
  return {
      {"client_hello", ClientHello{7, 0x0123456789ABCDEFULL}},
      {"server_hello", ServerHello{true, 42}},
      {"sample_batch", SampleBatch{3, {{10, {1.0f, -2.5f}}, {11, {0.5f, 0.25f}}}}},
      {"sample_batch_empty", SampleBatch{9, {}}},
      {"param_update", ParamUpdate{5, {{0, {1.0f, 2.0f}, {0.0f, -1.0f}}, {1, {0.5f}, {0.125f}}}}},
      {"ack_zero", Ack{0}},
      {"ack", Ack{0x1122334455667788ULL}},
  };
}

TEST(WireGolden, EncodeIsByteExact) {
  for (const auto& [name, msg] : golden_messages()) {
    EXPECT_EQ(encode(msg), load_hex(name)) << name;
  }
}

TEST(WireGolden, DecodeReproducesMessage) {
  for (const auto& [name, msg] : golden_messages()) {
    EXPECT_EQ(decode(load_hex(name)), msg) << name;
  }
}

TEST(WireEncode, AckZeroIsFourteenBytes) {
  const auto bytes = encode(Ack{0});
  ASSERT_EQ(bytes.size(), 14u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CEMA");
  EXPECT_EQ(bytes[4], kProtocolVersion);
  EXPECT_EQ(bytes[5], static_cast<std::uint8_t>(MessageType::Ack));
  for (std::size_t i = 6; i < 14; ++i) EXPECT_EQ(bytes[i], 0);
}

TEST(WireEncode, EmptySampleBatchHasZeroCount) {
  const auto bytes = encode(SampleBatch{1, {}});
  ASSERT_EQ(bytes.size(), kHeaderSize + 8 + 4);
  for (std::size_t i = bytes.size() - 4; i < bytes.size(); ++i) EXPECT_EQ(bytes[i], 0);
}

TEST(WireEncode, OversizePayloadIsRejected) {
  SampleBatch big{1, {{1, std::vector<float>(kMaxPayload / 4, 0.0f)}}};
  EXPECT_THROW(encode(big), EncodeError);
}

TEST(WireDecode, DistinctNamedErrors) {
  auto expect_kind = [](std::vector<std::uint8_t> bytes, DecodeErrorKind kind, const std::string& field) {
    try {
      decode(bytes);
      ADD_FAILURE() << "expected " << to_string(kind);
    } catch (const DecodeError& e) {
      EXPECT_EQ(e.kind(), kind) << e.what();
      if (!field.empty()) EXPECT_NE(e.field().find(field), std::string::npos) << e.field();
    }
  };
  auto good = encode(Ack{5});
  auto bad_magic = good;
  bad_magic[0] = 'X';
  expect_kind(bad_magic, DecodeErrorKind::BadMagic, "magic");
  auto bad_version = good;
  bad_version[4] = 2;
  expect_kind(bad_version, DecodeErrorKind::UnsupportedVersion, "");
  auto bad_type = good;
  bad_type[5] = 9;
  expect_kind(bad_type, DecodeErrorKind::UnknownType, "");
  auto trailing = good;
  trailing.push_back(0);
  expect_kind(trailing, DecodeErrorKind::TrailingBytes, "");
  auto flag = encode(ServerHello{true, 1});
  flag[6] = 2;
  expect_kind(flag, DecodeErrorKind::InvalidFlag, "accepted");
  expect_kind({'C', 'E'}, DecodeErrorKind::Truncated, "magic");

  // Cut inside the second gamma vector.
  auto update = load_hex("param_update");
  update.resize(update.size() - 10);
  expect_kind(update, DecodeErrorKind::Truncated, "gamma");
  auto batch = load_hex("sample_batch");
  batch.resize(batch.size() - 2);
  expect_kind(batch, DecodeErrorKind::Truncated, "features");
}

TEST(WireDecode, EveryStrictPrefixFails) {
  for (const auto& [name, msg] : golden_messages()) {
    const auto bytes = encode(msg);
    for (std::size_t len = 0; len < bytes.size(); ++len) {
      EXPECT_THROW(decode(std::span(bytes.data(), len)), DecodeError) << name << " len " << len;
    }
  }
}

Message random_message(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> type(0, 4), small(0, 6);
  std::normal_distribution<float> normal(0.0f, 10.0f);
  auto vec = [&](std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = normal(rng);
    return v;
  };
  switch (type(rng)) {
    case 0:
      return ClientHello{static_cast<std::uint32_t>(rng()), rng()};
    case 1:
      return ServerHello{(rng() & 1) != 0, rng()};
    case 2: {
      SampleBatch b{rng(), {}};
      const int n = small(rng);
      const std::size_t width = static_cast<std::size_t>(small(rng));
      for (int i = 0; i < n; ++i) b.samples.push_back({rng(), vec(width)});
      return b;
    }
    case 3: {
      ParamUpdate u{rng(), {}};
      const int n = small(rng);
      for (int i = 0; i < n; ++i) {
        const std::size_t width = static_cast<std::size_t>(small(rng));
        u.layers.push_back({static_cast<std::uint16_t>(rng()), vec(width), vec(width)});
      }
      return u;
    }
    default:
      return Ack{rng()};
  }
}

TEST(WireFuzz, DecodeEncodeIdentityOverTenThousandMessages) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 10000; ++i) {
    const Message m = random_message(rng);
    const auto bytes = encode(m);
    const Message back = decode(bytes);
    ASSERT_EQ(back, m) << "case " << i;
    ASSERT_EQ(encode(back), bytes) << "case " << i;
  }
}

TEST(WireFuzz, EqualMessagesEncodeEqualAndDifferentOnesDiffer) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const Message a = random_message(rng);
    const Message b = random_message(rng);
    EXPECT_EQ(a == b, encode(a) == encode(b));
  }
}

TEST(WireFuzz, RandomBytesNeverCrash) {
  std::mt19937_64 rng(8);
  std::size_t rejected = 0;
  for (int i = 0; i < 10000; ++i) {
    auto bytes = encode(random_message(rng));
    const std::size_t flips = 1 + rng() % 3;
    for (std::size_t f = 0; f < flips; ++f) bytes[rng() % bytes.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    try {
      decode(bytes);
    } catch (const DecodeError&) {
      ++rejected;
    }
  }
  EXPECT_GT(rejected, 0u);
}

TEST(WireSize, ParamUpdateFormula) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> widths(1 + rng() % 4);
    for (auto& w : widths) w = 1 + rng() % 50;
    const Model m = init_model(ModelSpec{3, widths, 2}, rng());
    const auto bytes = encode(to_message(extract_affine(m, 1)));
    // Header plus layer count (10), version (8), then per layer index, two
    // vector counts and the reals.
    std::size_t expect = 10 + 8;
    for (std::size_t w : widths) expect += 2 + 4 + 4 + 8 * w;
    EXPECT_EQ(bytes.size(), expect);
    EXPECT_EQ(param_update_size(widths), expect);
  }
}

TEST(WireConvert, ParamSetRoundTrip) {
  const AffineParamSet set = extract_affine(init_model(ModelSpec{4, {3, 2}, 2}, 1), 17);
  EXPECT_EQ(to_param_set(to_message(set)), set);
  EXPECT_EQ(type_of(to_message(set)), MessageType::ParamUpdate);
}

}  // namespace
