#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <thread>

#include "edgeadapt/byte_stream.hpp"
#include "edgeadapt/error.hpp"
#include "edgeadapt/tcp.hpp"
#include "edgeadapt/wire.hpp"

namespace {

using namespace edgeadapt;

// Replays a fixed byte string, handing out at most `chunk` bytes per read
// (chunk 0 draws a random size per read). Records everything written.
class ScriptedStream : public ByteStream {
 public:
  ScriptedStream(std::vector<std::uint8_t> bytes, std::size_t chunk, std::uint64_t seed = 1)
      : bytes_(std::move(bytes)), chunk_(chunk), rng_(seed) {}
  std::size_t read_some(std::span<std::uint8_t> out) override {
    if (pos_ >= bytes_.size()) return 0;
    std::size_t want = chunk_ ? chunk_ : 1 + rng_() % 7;
    want = std::min({want, out.size(), bytes_.size() - pos_});
    std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), want, out.begin());
    pos_ += want;
    return want;
  }
  void write_all(std::span<const std::uint8_t> data) override {
    written.insert(written.end(), data.begin(), data.end());
  }
  void close() override {}
  std::vector<std::uint8_t> written;

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::size_t chunk_;
  std::mt19937_64 rng_;
};

std::vector<std::vector<std::uint8_t>> sample_payloads() {
  return {
      wire::encode(wire::Ack{1}),
      wire::encode(wire::SampleBatch{2, {{5, {1, 2, 3}}, {6, {4, 5, 6}}}}),
      {},
      wire::encode(wire::ServerHello{true, 3}),
      std::vector<std::uint8_t>(1000, 0xAB),
  };
}

std::vector<std::uint8_t> framed(const std::vector<std::vector<std::uint8_t>>& payloads) {
  ScriptedStream sink({}, 1);
  for (const auto& p : payloads) write_frame(sink, p);
  return sink.written;
}

std::vector<std::vector<std::uint8_t>> read_all(ByteStream& s) {
  std::vector<std::vector<std::uint8_t>> out;
  while (auto f = read_frame(s)) out.push_back(std::move(*f));
  return out;
}

TEST(Framing, TenBytePayloadIsFourteenOnTheWire) {
  ScriptedStream sink({}, 1);
  write_frame(sink, std::vector<std::uint8_t>(10, 7));
  ASSERT_EQ(sink.written.size(), 14u);
  EXPECT_EQ(sink.written[0], 10);
  EXPECT_EQ(sink.written[1], 0);
  EXPECT_EQ(sink.written[2], 0);
  EXPECT_EQ(sink.written[3], 0);
}

TEST(Framing, BackToBackFramesReadInOrder) {
  const auto payloads = sample_payloads();
  ScriptedStream src(framed(payloads), 1 << 20);
  EXPECT_EQ(read_all(src), payloads);
}

TEST(Framing, ChunkedDeliveryEqualsWholeDelivery) {
  const auto payloads = sample_payloads();
  const auto bytes = framed(payloads);
  ScriptedStream whole(bytes, bytes.size());
  const auto expected = read_all(whole);
  for (std::size_t chunk : {1u, 2u, 3u, 5u, 13u, 0u}) {
    ScriptedStream chunked(bytes, chunk, chunk + 11);
    EXPECT_EQ(read_all(chunked), expected) << "chunk " << chunk;
  }
}

TEST(Framing, PartialTrailingFrameIsAnError) {
  auto bytes = framed(sample_payloads());
  bytes.resize(bytes.size() - 1);
  ScriptedStream src(bytes, 4);
  EXPECT_THROW(read_all(src), ProtocolError);
  ScriptedStream header_only(std::vector<std::uint8_t>{5, 0}, 1);
  EXPECT_THROW(read_frame(header_only), ProtocolError);
}

TEST(Framing, LengthAboveCapIsAnError) {
  const std::uint32_t len = static_cast<std::uint32_t>(wire::kMaxPayload) + 1;
  std::vector<std::uint8_t> bytes{static_cast<std::uint8_t>(len), static_cast<std::uint8_t>(len >> 8),
                                  static_cast<std::uint8_t>(len >> 16), static_cast<std::uint8_t>(len >> 24)};
  ScriptedStream src(bytes, 4);
  EXPECT_THROW(read_frame(src), ProtocolError);
  ScriptedStream sink({}, 1);
  EXPECT_THROW(write_frame(sink, std::vector<std::uint8_t>(wire::kMaxPayload + 1)), ProtocolError);
}

TEST(Framing, CleanEndOfStreamAtBoundary) {
  ScriptedStream empty({}, 1);
  EXPECT_FALSE(read_frame(empty).has_value());
}

TEST(Loopback, FramesCrossBetweenThreads) {
  auto [a, b] = make_loopback_pair();
  const auto payloads = sample_payloads();
  std::thread writer([&, s = a.get()] {
    for (const auto& p : payloads) write_frame(*s, p);
    s->close();
  });
  EXPECT_EQ(read_all(*b), payloads);
  writer.join();
  EXPECT_THROW(write_frame(*b, payloads[0]), ProtocolError);
}

TEST(Loopback, CloseUnblocksReader) {
  auto [a, b] = make_loopback_pair();
  std::thread closer([s = a.get()] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    s->close();
  });
  EXPECT_FALSE(read_frame(*b).has_value());
  closer.join();
}

TEST(Loopback, AcceptorHandsOutPeersUntilClosed) {
  LoopbackAcceptor acc;
  auto client = acc.connect();
  auto server = acc.accept();
  ASSERT_TRUE(server);
  write_frame(*client, std::vector<std::uint8_t>{1, 2, 3});
  EXPECT_EQ(*read_frame(*server), (std::vector<std::uint8_t>{1, 2, 3}));
  acc.close();
  EXPECT_EQ(acc.accept(), nullptr);
  EXPECT_THROW(acc.connect(), ProtocolError);
}

TEST(Tcp, EndpointParsing) {
  const auto ep = parse_endpoint("127.0.0.1:9000");
  EXPECT_EQ(ep.host, "127.0.0.1");
  EXPECT_EQ(ep.port, 9000);
  EXPECT_THROW(parse_endpoint("localhost"), ConfigError);
  EXPECT_THROW(parse_endpoint("host:99999"), ConfigError);
  EXPECT_THROW(parse_endpoint("host:abc"), ConfigError);
}

TEST(Tcp, FramesOverLocalSocket) {
  TcpAcceptor acc(parse_endpoint("127.0.0.1:0"));
  ASSERT_NE(acc.port(), 0);
  const auto payloads = sample_payloads();
  std::thread client([&] {
    auto s = tcp_connect({"127.0.0.1", acc.port()});
    for (const auto& p : payloads) write_frame(*s, p);
    s->close();
  });
  auto server = acc.accept();
  ASSERT_TRUE(server);
  EXPECT_EQ(read_all(*server), payloads);
  client.join();
  acc.close();
  EXPECT_EQ(acc.accept(), nullptr);
}

TEST(Tcp, ConnectToClosedPortFails) {
  std::uint16_t port = 0;
  {
    TcpAcceptor acc(parse_endpoint("127.0.0.1:0"));
    port = acc.port();
  }
  EXPECT_THROW(tcp_connect({"127.0.0.1", port}), ProtocolError);
}

}  // namespace
