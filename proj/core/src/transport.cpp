#include "fedsim/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "fedsim/error.hpp"

namespace fedsim {

std::size_t MemorySource::read_some(std::span<std::uint8_t> out) {
  const auto n = std::min({out.size(), chunk_, remaining()});
  std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), n, out.begin());
  pos_ += n;
  return n;
}

namespace {

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::uint8_t> data;
  bool closed = false;
};

class LoopbackChannel : public ByteChannel {
 public:
  LoopbackChannel(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~LoopbackChannel() override { close(); }

  std::size_t read_some(std::span<std::uint8_t> buf) override {
    std::unique_lock lock(in_->mu);
    auto ready = [this] { return !in_->data.empty() || in_->closed; };
    if (deadline_) {
      if (!in_->cv.wait_until(lock, *deadline_, ready)) {
        fail(ErrorCode::kTimeout, "loopback read deadline passed");
      }
    } else {
      in_->cv.wait(lock, ready);
    }
    const auto n = std::min(buf.size(), in_->data.size());
    std::copy_n(in_->data.begin(), n, buf.begin());
    in_->data.erase(in_->data.begin(), in_->data.begin() + static_cast<std::ptrdiff_t>(n));
    return n;
  }

  void write_all(std::span<const std::uint8_t> bytes) override {
    {
      std::lock_guard lock(out_->mu);
      if (out_->closed) fail(ErrorCode::kConnectionClosed, "loopback peer closed");
      out_->data.insert(out_->data.end(), bytes.begin(), bytes.end());
    }
    out_->cv.notify_all();
  }

  void close() override {
    for (auto* p : {in_.get(), out_.get()}) {
      {
        std::lock_guard lock(p->mu);
        p->closed = true;
      }
      p->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Pipe> in_;
  std::shared_ptr<Pipe> out_;
};

}  // namespace

std::pair<std::unique_ptr<ByteChannel>, std::unique_ptr<ByteChannel>>
make_loopback_pair() {
  auto a_to_b = std::make_shared<Pipe>();
  auto b_to_a = std::make_shared<Pipe>();
  return {std::make_unique<LoopbackChannel>(b_to_a, a_to_b),
          std::make_unique<LoopbackChannel>(a_to_b, b_to_a)};
}

TcpChannel::~TcpChannel() {
  if (fd_ >= 0) ::close(fd_);
}

std::size_t TcpChannel::read_some(std::span<std::uint8_t> out) {
  if (fd_ < 0) return 0;
  while (true) {
    if (deadline_) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          *deadline_ - Clock::now());
      if (left.count() <= 0) fail(ErrorCode::kTimeout, "tcp read deadline passed");
      pollfd pfd{fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<std::int64_t>(left.count(), INT32_MAX)));
      if (rc < 0 && errno == EINTR) continue;
      if (rc < 0) fail(ErrorCode::kIoError, std::string("poll: ") + std::strerror(errno));
      if (rc == 0) continue;  // loop re-checks the deadline
    }
    const auto n = ::recv(fd_, out.data(), out.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    // A reset peer is indistinguishable from an abrupt close for our purposes.
    if (n < 0 && errno == ECONNRESET) return 0;
    if (n < 0) fail(ErrorCode::kIoError, std::string("recv: ") + std::strerror(errno));
    return static_cast<std::size_t>(n);
  }
}

void TcpChannel::write_all(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    if (fd_ < 0) fail(ErrorCode::kConnectionClosed, "socket closed");
    const auto n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0 && (errno == EPIPE || errno == ECONNRESET)) {
      fail(ErrorCode::kConnectionClosed, "peer closed during send");
    }
    if (n < 0) fail(ErrorCode::kIoError, std::string("send: ") + std::strerror(errno));
    sent += static_cast<std::size_t>(n);
  }
}

void TcpChannel::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    fail(ErrorCode::kValidationError, "expected host:port, got '" + text + "'");
  }
  Endpoint ep;
  ep.host = text.substr(0, colon);
  if (ep.host.empty()) ep.host = "0.0.0.0";
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    fail(ErrorCode::kValidationError, "bad port in '" + text + "'");
  }
  if (port < 0 || port > 65535) {
    fail(ErrorCode::kValidationError, "port out of range in '" + text + "'");
  }
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

namespace {

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  const std::string host = ep.host == "localhost" ? "127.0.0.1" : ep.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    fail(ErrorCode::kIoError, "cannot resolve host '" + ep.host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

TcpListener::TcpListener(const Endpoint& bind) {
  fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd_ < 0) fail(ErrorCode::kIoError, std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  auto addr = resolve(bind);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    const std::string why = std::strerror(errno);
    ::close(fd_);
    fail(ErrorCode::kIoError, "bind " + bind.host + ":" + std::to_string(bind.port) + ": " + why);
  }
  if (::listen(fd_, 128) < 0) {
    const std::string why = std::strerror(errno);
    ::close(fd_);
    fail(ErrorCode::kIoError, "listen: " + why);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpChannel> TcpListener::accept(std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  while (true) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) return nullptr;
    pollfd pfd{fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc < 0) fail(ErrorCode::kIoError, std::string("poll: ") + std::strerror(errno));
    if (rc == 0) return nullptr;
    const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0 && (errno == EINTR || errno == ECONNABORTED)) continue;
    if (fd < 0) fail(ErrorCode::kIoError, std::string("accept: ") + std::strerror(errno));
    set_nodelay(fd);
    return std::make_unique<TcpChannel>(fd);
  }
}

std::unique_ptr<TcpChannel> tcp_connect(const Endpoint& ep,
                                        std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  auto addr = resolve(ep);
  std::string last_error;
  do {
    const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) fail(ErrorCode::kIoError, std::string("socket: ") + std::strerror(errno));
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      set_nodelay(fd);
      return std::make_unique<TcpChannel>(fd);
    }
    last_error = std::strerror(errno);
    ::close(fd);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  } while (Clock::now() < deadline);
  fail(ErrorCode::kIoError, "connect " + ep.host + ":" + std::to_string(ep.port) + ": " + last_error);
}

}  // namespace fedsim
