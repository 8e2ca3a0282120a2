// Copyright (c) 2026 Fortress Simulator contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Normal-world supplicant relay and the mock untrusted cloud: a framed TCP
// protocol ("FTRS" envelope), a persisting store that models a curious
// provider, and the exact leak scanner the acceptance suite runs against
// stored bodies.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fortress/bytes.hpp"
#include "fortress/errors.hpp"
#include "fortress/tee_rt.hpp"

namespace fortress::relay {

enum class FrameType : uint8_t { Hello = 0, Payload = 1, Ack = 2 };

inline constexpr char kMagic[4] = {'F', 'T', 'R', 'S'};
inline constexpr uint8_t kVersion = 1;
inline constexpr size_t kHeaderSize = 12;
inline constexpr uint32_t kMaxFrameBody = 1u << 26;

struct WireFrame {
  uint8_t version = kVersion;
  FrameType ftype = FrameType::Hello;
  Bytes body;

  bool operator==(const WireFrame&) const = default;
};

/// magic | version u8 | ftype u8 | reserved u16 (0) | length u32 BE | body.
inline Bytes encode_frame(const WireFrame& f) {
  Bytes out;
  out.reserve(kHeaderSize + f.body.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(f.version);
  out.push_back(static_cast<uint8_t>(f.ftype));
  out.push_back(0);
  out.push_back(0);
  put_u32_be(out, static_cast<uint32_t>(f.body.size()));
  out.insert(out.end(), f.body.begin(), f.body.end());
  return out;
}

inline WireFrame decode_frame(ByteSpan raw) {
  if (raw.size() < kHeaderSize) throw ProtocolError("frame shorter than header");
  if (!std::equal(kMagic, kMagic + 4, raw.begin()))
    throw ProtocolError("bad frame magic");
  if (raw[4] != kVersion)
    throw ProtocolError("unsupported version " + std::to_string(raw[4]));
  if (raw[5] > static_cast<uint8_t>(FrameType::Ack))
    throw ProtocolError("unknown frame type " + std::to_string(raw[5]));
  if (raw[6] != 0 || raw[7] != 0) throw ProtocolError("reserved bytes set");
  uint32_t length = get_u32_be(raw.subspan(8));
  if (length > kMaxFrameBody) throw ProtocolError("frame body too large");
  if (raw.size() - kHeaderSize != length)
    throw ProtocolError("length field does not match body");
  WireFrame f;
  f.version = raw[4];
  f.ftype = static_cast<FrameType>(raw[5]);
  f.body.assign(raw.begin() + kHeaderSize, raw.end());
  return f;
}

// ------------------------------------------------------------- socket io

namespace detail {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  Socket& operator=(Socket&& other) noexcept {
    if (this != &other) {
      close_fd();
      fd_ = other.fd_;
      other.fd_ = -1;
    }
    return *this;
  }
  ~Socket() { close_fd(); }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close_fd() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline void write_all(int fd, ByteSpan data) {
  size_t sent = 0;
  while (sent < data.size()) {
    ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) throw ConnectError("send failed");
    sent += static_cast<size_t>(n);
  }
}

/// Read exactly n bytes, honoring the deadline. Returns false on orderly
/// EOF at a frame boundary (nothing read yet).
inline bool read_exact(int fd, uint8_t* out, size_t n, int timeout_ms) {
  using Clock = std::chrono::steady_clock;
  auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
  size_t got = 0;
  while (got < n) {
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                         deadline - Clock::now())
                         .count();
    if (remaining <= 0) throw Timeout("socket read timed out");
    pollfd pfd{fd, POLLIN, 0};
    int pr = ::poll(&pfd, 1, static_cast<int>(remaining));
    if (pr < 0) throw ConnectError("poll failed");
    if (pr == 0) throw Timeout("socket read timed out");
    ssize_t r = ::recv(fd, out + got, n - got, 0);
    if (r == 0) {
      if (got == 0) return false;
      throw ProtocolError("connection closed mid-frame");
    }
    if (r < 0) throw ConnectError("recv failed");
    got += static_cast<size_t>(r);
  }
  return true;
}

inline void send_frame(int fd, const WireFrame& f) {
  write_all(fd, encode_frame(f));
}

/// Receive one frame; nullopt on orderly EOF before a header.
inline std::optional<WireFrame> recv_frame(int fd, int timeout_ms) {
  std::array<uint8_t, kHeaderSize> header{};
  if (!read_exact(fd, header.data(), header.size(), timeout_ms))
    return std::nullopt;
  if (!std::equal(kMagic, kMagic + 4, header.begin()))
    throw ProtocolError("bad frame magic");
  if (header[4] != kVersion) throw ProtocolError("unsupported version");
  if (header[5] > static_cast<uint8_t>(FrameType::Ack))
    throw ProtocolError("unknown frame type");
  if (header[6] != 0 || header[7] != 0) throw ProtocolError("reserved bytes set");
  uint32_t length = get_u32_be(ByteSpan(header).subspan(8));
  if (length > kMaxFrameBody) throw ProtocolError("frame body too large");
  WireFrame f;
  f.version = header[4];
  f.ftype = static_cast<FrameType>(header[5]);
  f.body.resize(length);
  if (length > 0 && !read_exact(fd, f.body.data(), length, timeout_ms))
    throw ProtocolError("connection closed mid-frame");
  return f;
}

inline Socket connect_to(const std::string& host, uint16_t port) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) throw ConnectError("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw ConnectError("bad host address " + host);
  if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
    throw ConnectError("cannot connect to " + host + ":" + std::to_string(port));
  return s;
}

}  // namespace detail

// ------------------------------------------------------------- the relay

inline constexpr int kDefaultTimeoutMs = 5000;

/// Send one payload frame and block for the ack echoing its length. The
/// relay runs in the normal world and sees only obfuscated bytes. One
/// retry on connect failure or timeout.
inline uint32_t relay_bytes(ByteSpan body, const std::string& host, uint16_t port,
                            int timeout_ms = kDefaultTimeoutMs) {
  auto attempt = [&]() -> uint32_t {
    detail::Socket s = detail::connect_to(host, port);
    WireFrame frame;
    frame.ftype = FrameType::Payload;
    frame.body.assign(body.begin(), body.end());
    detail::send_frame(s.fd(), frame);
    auto ack = detail::recv_frame(s.fd(), timeout_ms);
    if (!ack) throw ProtocolError("connection closed before ack");
    if (ack->ftype != FrameType::Ack || ack->body.size() != 4)
      throw AckMismatch("reply is not a well-formed ack");
    uint32_t echoed = get_u32_be(ack->body);
    if (echoed != body.size())
      throw AckMismatch("ack echoed " + std::to_string(echoed) + " bytes, sent " +
                        std::to_string(body.size()));
    return echoed;
  };
  try {
    return attempt();
  } catch (const ConnectError&) {
    return attempt();
  } catch (const Timeout&) {
    return attempt();
  }
}

inline uint32_t supplicant_relay(const tee::ObfuscatedPayload& payload,
                                 const std::string& host, uint16_t port,
                                 int timeout_ms = kDefaultTimeoutMs) {
  return relay_bytes(tee::serialize_payload(payload), host, port, timeout_ms);
}

// ------------------------------------------------------------- the cloud

/// Mock untrusted cloud: validates envelopes, persists every payload body
/// as a file named by arrival index, acks everything valid, and never
/// forgets what it saw.
class CloudServer {
 public:
  CloudServer(uint16_t port, std::filesystem::path store_dir)
      : requested_port_(port), store_dir_(std::move(store_dir)) {}

  ~CloudServer() { stop(); }
  CloudServer(const CloudServer&) = delete;
  CloudServer& operator=(const CloudServer&) = delete;

  void start() {
    std::filesystem::create_directories(store_dir_);
    listen_ = detail::Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!listen_.valid()) throw BindError("socket() failed");
    int one = 1;
    ::setsockopt(listen_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(requested_port_);
    if (::bind(listen_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
      throw BindError("cannot bind port " + std::to_string(requested_port_));
    if (::listen(listen_.fd(), 16) != 0) throw BindError("listen() failed");
    socklen_t len = sizeof(addr);
    ::getsockname(listen_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
  }

  void stop() {
    if (!running_.exchange(false)) return;
    listen_.close_fd();
    if (acceptor_.joinable()) acceptor_.join();
    std::lock_guard<std::mutex> lock(workers_mutex_);
    for (auto& t : workers_)
      if (t.joinable()) t.join();
    workers_.clear();
  }

  uint16_t port() const { return port_; }
  const std::filesystem::path& store_dir() const { return store_dir_; }
  uint64_t frames_stored() const { return next_index_.load(); }

 private:
  void accept_loop() {
    while (running_) {
      pollfd pfd{listen_.fd(), POLLIN, 0};
      int pr = ::poll(&pfd, 1, 100);
      if (!running_) break;
      if (pr <= 0) continue;
      int conn = ::accept(listen_.fd(), nullptr, nullptr);
      if (conn < 0) continue;
      std::lock_guard<std::mutex> lock(workers_mutex_);
      workers_.emplace_back([this, conn] { serve_connection(conn); });
    }
  }

  void serve_connection(int fd) {
    detail::Socket s(fd);
    try {
      while (running_) {
        auto frame = detail::recv_frame(s.fd(), kDefaultTimeoutMs);
        if (!frame) return;  // client done
        if (frame->ftype == FrameType::Ack)
          throw ProtocolError("unexpected ack from client");
        if (frame->ftype == FrameType::Payload) persist(frame->body);
        WireFrame ack;
        ack.ftype = FrameType::Ack;
        put_u32_be(ack.body, static_cast<uint32_t>(frame->body.size()));
        detail::send_frame(s.fd(), ack);
      }
    } catch (const Error&) {
      // malformed traffic: drop the connection, store nothing further
    }
  }

  void persist(const Bytes& body) {
    std::lock_guard<std::mutex> lock(store_mutex_);
    uint64_t index = next_index_.fetch_add(1);
    write_file(store_dir_ / std::to_string(index), body);
    std::ofstream idx(store_dir_ / "index.txt", std::ios::app);
    idx << index << " " << static_cast<int>(FrameType::Payload) << " "
        << body.size() << "\n";
  }

  uint16_t requested_port_;
  std::filesystem::path store_dir_;
  detail::Socket listen_;
  std::atomic<bool> running_{false};
  std::atomic<uint64_t> next_index_{0};
  uint16_t port_ = 0;
  std::thread acceptor_;
  std::mutex workers_mutex_;
  std::vector<std::thread> workers_;
  std::mutex store_mutex_;
};

inline std::unique_ptr<CloudServer> cloud_serve(uint16_t port,
                                                const std::filesystem::path& store_dir) {
  auto server = std::make_unique<CloudServer>(port, store_dir);
  server->start();
  return server;
}

// ------------------------------------------------------------ leak scan

/// Suffix automaton over the plaintext; gives exact longest-common-run
/// queries in linear time per body.
class SuffixAutomaton {
 public:
  explicit SuffixAutomaton(ByteSpan text) {
    states_.push_back(State{});
    int last = 0;
    for (uint8_t c : text) {
      int cur = static_cast<int>(states_.size());
      states_.push_back(State{});
      states_[cur].len = states_[last].len + 1;
      int p = last;
      while (p >= 0 && !states_[p].next.contains(c)) {
        states_[p].next[c] = cur;
        p = states_[p].link;
      }
      if (p < 0) {
        states_[cur].link = 0;
      } else {
        int q = states_[p].next[c];
        if (states_[p].len + 1 == states_[q].len) {
          states_[cur].link = q;
        } else {
          int clone = static_cast<int>(states_.size());
          states_.push_back(states_[q]);
          states_[clone].len = states_[p].len + 1;
          while (p >= 0 && states_[p].next[c] == q) {
            states_[p].next[c] = clone;
            p = states_[p].link;
          }
          states_[q].link = clone;
          states_[cur].link = clone;
        }
      }
      last = cur;
    }
  }

  size_t longest_common_run(ByteSpan body) const {
    size_t best = 0, length = 0;
    int v = 0;
    for (uint8_t c : body) {
      while (v != 0 && !states_[v].next.contains(c)) {
        v = states_[v].link;
        length = static_cast<size_t>(states_[v].len);
      }
      auto it = states_[v].next.find(c);
      if (it != states_[v].next.end()) {
        v = it->second;
        ++length;
      } else {
        v = 0;
        length = 0;
      }
      best = std::max(best, length);
    }
    return best;
  }

 private:
  struct State {
    int len = 0;
    int link = -1;
    std::map<uint8_t, int> next;
  };
  std::vector<State> states_;
};

/// Longest contiguous byte run shared between the plaintext and any stored
/// body; runs shorter than `window` report as 0.
inline size_t leak_scan(const std::filesystem::path& store_dir, ByteSpan plaintext,
                        size_t window) {
  if (window == 0) throw Error("leak_scan window must be >= 1");
  if (plaintext.empty() || !std::filesystem::exists(store_dir)) return 0;
  SuffixAutomaton sam(plaintext);
  size_t best = 0;
  for (const auto& entry : std::filesystem::directory_iterator(store_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.empty() ||
        name.find_first_not_of("0123456789") != std::string::npos)
      continue;
    Bytes body = read_file(entry.path());
    best = std::max(best, sam.longest_common_run(body));
  }
  return best >= window ? best : 0;
}

}  // namespace fortress::relay
