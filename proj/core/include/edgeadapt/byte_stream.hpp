#pragma once

// Reliable ordered byte streams, length-prefixed framing on top of them, and
// an in-process loopback transport.

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace edgeadapt {

class ByteStream {
 public:
  virtual ~ByteStream() = default;
  /// Blocks until at least one byte is available; returns 0 at end-of-stream.
  /// Throws ProtocolError on transport failure.
  virtual std::size_t read_some(std::span<std::uint8_t> out) = 0;
  virtual void write_all(std::span<const std::uint8_t> data) = 0;
  /// Unblocks pending reads/writes on both ends. Idempotent.
  virtual void close() = 0;
};

/// Writes u32 LE length then the payload.
void write_frame(ByteStream& stream, std::span<const std::uint8_t> payload);

/// Reads one complete frame. Returns nullopt on a clean end-of-stream at a
/// frame boundary; throws ProtocolError on a partial trailing frame or a
/// length above the protocol cap.
std::optional<std::vector<std::uint8_t>> read_frame(ByteStream& stream);

/// Creates two connected in-memory endpoints.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_loopback_pair();

/// Server-side source of incoming connections.
class Acceptor {
 public:
  virtual ~Acceptor() = default;
  /// Blocks for the next connection; nullptr once closed.
  virtual std::unique_ptr<ByteStream> accept() = 0;
  virtual void close() = 0;
};

using Connector = std::function<std::unique_ptr<ByteStream>()>;

/// In-process acceptor: connect() hands the peer endpoint to accept().
class LoopbackAcceptor : public Acceptor {
 public:
  std::unique_ptr<ByteStream> accept() override;
  void close() override;
  /// Throws ProtocolError when the acceptor is closed.
  std::unique_ptr<ByteStream> connect();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::unique_ptr<ByteStream>> pending_;
  bool closed_ = false;
};

}  // namespace edgeadapt
