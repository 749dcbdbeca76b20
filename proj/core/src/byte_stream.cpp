#include "edgeadapt/byte_stream.hpp"

#include <algorithm>
#include <string>

#include "edgeadapt/error.hpp"
#include "edgeadapt/wire.hpp"

namespace edgeadapt {
namespace {

// One direction of a loopback connection.
struct Channel {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::uint8_t> bytes;
  bool closed = false;
};

class LoopbackStream : public ByteStream {
 public:
  LoopbackStream(std::shared_ptr<Channel> in, std::shared_ptr<Channel> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~LoopbackStream() override { close(); }

  std::size_t read_some(std::span<std::uint8_t> buf) override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait(lock, [this] { return !in_->bytes.empty() || in_->closed; });
    if (in_->bytes.empty()) return 0;
    const std::size_t n = std::min(buf.size(), in_->bytes.size());
    std::copy_n(in_->bytes.begin(), n, buf.begin());
    in_->bytes.erase(in_->bytes.begin(), in_->bytes.begin() + static_cast<std::ptrdiff_t>(n));
    return n;
  }

  void write_all(std::span<const std::uint8_t> data) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw ProtocolError("write on closed loopback connection");
    out_->bytes.insert(out_->bytes.end(), data.begin(), data.end());
    out_->cv.notify_all();
  }

  void close() override {
    for (auto* ch : {in_.get(), out_.get()}) {
      std::lock_guard lock(ch->mu);
      ch->closed = true;
      ch->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Channel> in_;
  std::shared_ptr<Channel> out_;
};

void read_exact(ByteStream& s, std::span<std::uint8_t> out, bool at_boundary, bool& eof) {
  std::size_t got = 0;
  while (got < out.size()) {
    const std::size_t n = s.read_some(out.subspan(got));
    if (n == 0) {
      if (at_boundary && got == 0) {
        eof = true;
        return;
      }
      throw ProtocolError("connection closed inside a frame (" + std::to_string(got) + " of " +
                          std::to_string(out.size()) + " bytes)");
    }
    got += n;
  }
}

}  // namespace

void write_frame(ByteStream& stream, std::span<const std::uint8_t> payload) {
  if (payload.size() > wire::kMaxPayload) throw ProtocolError("frame exceeds protocol cap");
  std::vector<std::uint8_t> buf(4 + payload.size());
  const auto n = static_cast<std::uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<std::uint8_t>(n >> (8 * i));
  std::copy(payload.begin(), payload.end(), buf.begin() + 4);
  stream.write_all(buf);
}

std::optional<std::vector<std::uint8_t>> read_frame(ByteStream& stream) {
  std::uint8_t hdr[4];
  bool eof = false;
  read_exact(stream, hdr, true, eof);
  if (eof) return std::nullopt;
  const std::uint32_t len = static_cast<std::uint32_t>(hdr[0]) | (static_cast<std::uint32_t>(hdr[1]) << 8) |
                            (static_cast<std::uint32_t>(hdr[2]) << 16) |
                            (static_cast<std::uint32_t>(hdr[3]) << 24);
  if (len > wire::kMaxPayload) {
    throw ProtocolError("frame length " + std::to_string(len) + " exceeds protocol cap");
  }
  std::vector<std::uint8_t> payload(len);
  read_exact(stream, payload, false, eof);
  return payload;
}

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_loopback_pair() {
  auto a_to_b = std::make_shared<Channel>();
  auto b_to_a = std::make_shared<Channel>();
  return {std::make_unique<LoopbackStream>(b_to_a, a_to_b),
          std::make_unique<LoopbackStream>(a_to_b, b_to_a)};
}

std::unique_ptr<ByteStream> LoopbackAcceptor::accept() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return !pending_.empty() || closed_; });
  if (pending_.empty()) return nullptr;
  auto s = std::move(pending_.front());
  pending_.pop_front();
  return s;
}

void LoopbackAcceptor::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

std::unique_ptr<ByteStream> LoopbackAcceptor::connect() {
  auto [client, server] = make_loopback_pair();
  std::lock_guard lock(mu_);
  if (closed_) throw ProtocolError("loopback acceptor is closed");
  pending_.push_back(std::move(server));
  cv_.notify_all();
  return std::move(client);
}

}  // namespace edgeadapt
