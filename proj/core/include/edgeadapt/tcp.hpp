#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "edgeadapt/byte_stream.hpp"

namespace edgeadapt {

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

/// Parses "host:port"; throws ConfigError.
Endpoint parse_endpoint(const std::string& text);

/// Blocking TCP connect; throws ProtocolError on failure.
std::unique_ptr<ByteStream> tcp_connect(const Endpoint& ep);

class TcpAcceptor : public Acceptor {
 public:
  explicit TcpAcceptor(const Endpoint& ep);
  ~TcpAcceptor() override;
  std::unique_ptr<ByteStream> accept() override;
  void close() override;
  std::uint16_t port() const { return port_; }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace edgeadapt
