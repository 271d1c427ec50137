#pragma once

#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "fastquery/errors.hpp"
#include "fastquery/transcript.hpp"

#if defined(__unix__) || defined(__APPLE__)
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>
#define FASTQUERY_HAVE_SOCKETS 1
#endif

namespace fastquery::proto {

/// One end of a duplex byte channel carrying framed messages.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const Message& msg) = 0;
  virtual Message recv() = 0;
};

/// In-process duplex pipe. Both ends share two frame queues; safe to drive
/// from one thread (queues buffer) or from a thread per party.
class DuplexPipe {
 public:
  class End : public Channel {
   public:
    End(DuplexPipe* pipe, bool is_a) : pipe_(pipe), is_a_(is_a) {}
    void send(const Message& msg) override { pipe_->push(is_a_, encode_frame(msg)); }
    Message recv() override { return decode_frame(pipe_->pop(is_a_)); }

   private:
    DuplexPipe* pipe_;
    bool is_a_;
  };

  DuplexPipe() : a_end_(this, true), b_end_(this, false) {}

  Channel& end_a() { return a_end_; }
  Channel& end_b() { return b_end_; }

 private:
  void push(bool from_a, std::vector<uint8_t> frame) {
    {
      std::lock_guard<std::mutex> lk(mu_);
      (from_a ? a_to_b_ : b_to_a_).push_back(std::move(frame));
    }
    cv_.notify_all();
  }

  std::vector<uint8_t> pop(bool for_a) {
    std::unique_lock<std::mutex> lk(mu_);
    auto& q = for_a ? b_to_a_ : a_to_b_;
    cv_.wait(lk, [&] { return !q.empty(); });
    std::vector<uint8_t> frame = std::move(q.front());
    q.pop_front();
    return frame;
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::vector<uint8_t>> a_to_b_, b_to_a_;
  End a_end_;
  End b_end_;
};

#ifdef FASTQUERY_HAVE_SOCKETS

/// Loopback TCP transport with the identical frame format, so transcripts do
/// not depend on the transport.
class SocketChannel : public Channel {
 public:
  explicit SocketChannel(int fd) : fd_(fd) {}
  SocketChannel(const SocketChannel&) = delete;
  SocketChannel& operator=(const SocketChannel&) = delete;
  ~SocketChannel() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void send(const Message& msg) override {
    std::vector<uint8_t> frame = encode_frame(msg);
    size_t off = 0;
    while (off < frame.size()) {
      ssize_t n = ::send(fd_, frame.data() + off, frame.size() - off, 0);
      if (n <= 0) throw ProtocolError("socket send failed");
      off += static_cast<size_t>(n);
    }
  }

  Message recv() override {
    std::vector<uint8_t> header = recv_exact(kFrameHeaderLen);
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<uint32_t>(header[i]) << (8 * i);
    std::vector<uint8_t> payload = recv_exact(len);
    header.insert(header.end(), payload.begin(), payload.end());
    return decode_frame(header);
  }

 private:
  std::vector<uint8_t> recv_exact(size_t n) {
    std::vector<uint8_t> buf(n);
    size_t off = 0;
    while (off < n) {
      ssize_t r = ::recv(fd_, buf.data() + off, n - off, 0);
      if (r <= 0) throw ProtocolError("socket recv failed or peer closed");
      off += static_cast<size_t>(r);
    }
    return buf;
  }

  int fd_;
};

/// Listening socket bound to an ephemeral loopback port.
class LoopbackListener {
 public:
  LoopbackListener() {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw ProtocolError("socket() failed");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
      throw ProtocolError("bind() failed");
    if (::listen(fd_, 1) != 0) throw ProtocolError("listen() failed");
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }
  ~LoopbackListener() {
    if (fd_ >= 0) ::close(fd_);
  }

  uint16_t port() const { return port_; }

  std::unique_ptr<SocketChannel> accept() {
    int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) throw ProtocolError("accept() failed");
    return std::make_unique<SocketChannel>(fd);
  }

  static std::unique_ptr<SocketChannel> connect(uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ProtocolError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(fd);
      throw ProtocolError("connect() failed");
    }
    return std::make_unique<SocketChannel>(fd);
  }

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

#endif  // FASTQUERY_HAVE_SOCKETS

}  // namespace fastquery::proto
