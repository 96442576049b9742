#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>

namespace fedsim {

using Clock = std::chrono::steady_clock;

/// Blocking byte source. read_some parks until at least one byte or EOF is
/// available and returns 0 only at EOF. Throws kTimeout past the deadline.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  virtual std::size_t read_some(std::span<std::uint8_t> out) = 0;
  virtual void set_read_deadline(std::optional<Clock::time_point> deadline) {
    deadline_ = deadline;
  }

 protected:
  std::optional<Clock::time_point> deadline_;
};

/// Duplex byte stream: TCP and in-memory loopback share all protocol code
/// through this interface. close() shuts down both directions; the peer
/// observes EOF.
class ByteChannel : public ByteSource {
 public:
  virtual void write_all(std::span<const std::uint8_t> bytes) = 0;
  virtual void close() = 0;
};

/// Source over a fixed buffer handing out at most `chunk` bytes per read.
class MemorySource : public ByteSource {
 public:
  explicit MemorySource(std::span<const std::uint8_t> bytes,
                        std::size_t chunk = SIZE_MAX)
      : bytes_(bytes), chunk_(chunk == 0 ? 1 : chunk) {}

  std::size_t read_some(std::span<std::uint8_t> out) override;
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t chunk_;
  std::size_t pos_ = 0;
};

/// Connected in-memory channel pair.
std::pair<std::unique_ptr<ByteChannel>, std::unique_ptr<ByteChannel>>
make_loopback_pair();

class TcpChannel : public ByteChannel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {}
  ~TcpChannel() override;
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  std::size_t read_some(std::span<std::uint8_t> out) override;
  void write_all(std::span<const std::uint8_t> bytes) override;
  void close() override;

 private:
  int fd_;
};

struct Endpoint {
  std::string host = "0.0.0.0";
  std::uint16_t port = 8080;
};

/// Parses "host:port"; throws kValidationError.
Endpoint parse_endpoint(const std::string& text);

class TcpListener {
 public:
  explicit TcpListener(const Endpoint& bind);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  /// Actual bound port (useful when binding port 0).
  std::uint16_t port() const noexcept { return port_; }
  /// Waits up to `timeout` for a connection; nullptr on timeout.
  std::unique_ptr<TcpChannel> accept(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Connects, retrying until `timeout` elapses (the server may still be
/// starting). Throws kIoError.
std::unique_ptr<TcpChannel> tcp_connect(
    const Endpoint& ep,
    std::chrono::milliseconds timeout = std::chrono::seconds(10));

}  // namespace fedsim
