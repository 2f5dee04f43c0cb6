#include "splitinfer/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fmt/format.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <deque>

#include "splitinfer/bytes.hpp"

namespace splitinfer {
namespace {

constexpr char kFrameMagic[4] = {'S', 'P', 'L', 'F'};
using Clock = std::chrono::steady_clock;

double MsSince(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void SleepMs(double ms) {
  if (ms > 0.0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

bool IsFrameType(uint8_t t) { return t >= 1 && t <= 5; }

// Owns a socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { Close(); }
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      Close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  int fd() const { return fd_; }
  void Close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

void SendAll(int fd, std::span<const uint8_t> bytes) {
  size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, fmt::format("send: {}", std::strerror(errno)));
    }
    sent += static_cast<size_t>(n);
  }
}

// Reads exactly out.size() bytes. Returns the number read before EOF.
// timeout_ms < 0 blocks indefinitely.
size_t RecvExact(int fd, std::span<uint8_t> out, int timeout_ms) {
  size_t got = 0;
  while (got < out.size()) {
    if (timeout_ms >= 0) {
      pollfd p{fd, POLLIN, 0};
      const int r = ::poll(&p, 1, timeout_ms);
      if (r == 0) throw Error(ErrorCode::kTimeout, "no reply within the timeout");
      if (r < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kIo, fmt::format("poll: {}", std::strerror(errno)));
      }
    }
    const ssize_t n = ::recv(fd, out.data() + got, out.size() - got, 0);
    if (n == 0) return got;
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == ECONNRESET || errno == EPIPE || errno == EBADF || errno == ENOTCONN) return got;
      throw Error(ErrorCode::kIo, fmt::format("recv: {}", std::strerror(errno)));
    }
    got += static_cast<size_t>(n);
  }
  return got;
}

struct FrameHeader {
  FrameType type;
  uint64_t session_id;
  uint64_t seq;
  uint32_t body_len;
};

FrameHeader ParseHeader(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, ErrorCode::kTruncatedFrame);
  auto magic = r.GetBytes(4);
  if (!std::equal(magic.begin(), magic.end(), kFrameMagic)) {
    throw Error(ErrorCode::kBadMagic, "frame does not start with SPLF");
  }
  const auto version = r.Get<uint8_t>();
  if (version != kFrameVersion) {
    throw Error(ErrorCode::kBadVersion, fmt::format("frame version {} unsupported", version));
  }
  const auto type = r.Get<uint8_t>();
  if (!IsFrameType(type)) {
    throw Error(ErrorCode::kMalformed, fmt::format("unknown frame type {}", type));
  }
  FrameHeader h{static_cast<FrameType>(type), r.Get<uint64_t>(), r.Get<uint64_t>(),
                r.Get<uint32_t>()};
  if (h.body_len > kMaxFrameBody) {
    throw Error(ErrorCode::kMalformed, fmt::format("frame body of {} bytes too large", h.body_len));
  }
  return h;
}

struct ReadResult {
  bool eof = false;  // clean close before a new frame
  bool crc_ok = true;
  Frame frame;
};

// Reads one frame from a stream. A CRC mismatch consumes the frame and is
// reported without throwing so the session can stay in sync.
ReadResult ReadFrame(int fd, int timeout_ms) {
  ReadResult out;
  uint8_t header[kFrameHeaderSize];
  const size_t got = RecvExact(fd, header, timeout_ms);
  if (got == 0) {
    out.eof = true;
    return out;
  }
  if (got < kFrameHeaderSize) throw Error(ErrorCode::kTruncatedFrame, "stream ended inside a frame header");
  const FrameHeader h = ParseHeader(header);
  out.frame.type = h.type;
  out.frame.session_id = h.session_id;
  out.frame.seq = h.seq;
  std::vector<uint8_t> rest(static_cast<size_t>(h.body_len) + 4);
  if (RecvExact(fd, rest, timeout_ms) < rest.size()) {
    throw Error(ErrorCode::kTruncatedFrame, "stream ended inside a frame body");
  }
  uint32_t crc;
  std::memcpy(&crc, rest.data() + h.body_len, 4);
  rest.resize(h.body_len);
  out.crc_ok = Crc32(rest) == crc;
  out.frame.body = std::move(rest);
  return out;
}

void WriteFrame(int fd, const Frame& f) { SendAll(fd, EncodeFrame(f)); }

Frame ErrorFrame(uint64_t session, uint64_t seq, ErrorCode code, std::string message) {
  return {FrameType::kError, session, seq, EncodeErrorBody({code, std::move(message)})};
}

Socket Connect(const Endpoint& ep) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  if (::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res) != 0 || !res) {
    throw Error(ErrorCode::kConnectionRefused, "cannot resolve " + ep.host);
  }
  std::string last = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (s.fd() < 0) continue;
    if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return s;
    }
    last = std::strerror(errno);
  }
  ::freeaddrinfo(res);
  throw Error(ErrorCode::kConnectionRefused,
              fmt::format("connect to {}:{}: {}", ep.host, ep.port, last));
}

}  // namespace

std::string_view ToString(FrameType t) {
  switch (t) {
    case FrameType::kHello: return "HELLO";
    case FrameType::kActivation: return "ACTIVATION";
    case FrameType::kResult: return "RESULT";
    case FrameType::kError: return "ERROR";
    case FrameType::kBye: return "BYE";
  }
  return "?";
}

std::vector<uint8_t> EncodeFrame(const Frame& f) {
  if (f.body.size() > kMaxFrameBody) {
    throw Error(ErrorCode::kInvalidParameter, "frame body too large");
  }
  std::vector<uint8_t> out;
  out.reserve(kFrameHeaderSize + f.body.size() + 4);
  ByteWriter w(out);
  w.PutBytes(std::span(reinterpret_cast<const uint8_t*>(kFrameMagic), 4));
  w.Put<uint8_t>(kFrameVersion);
  w.Put<uint8_t>(static_cast<uint8_t>(f.type));
  w.Put<uint64_t>(f.session_id);
  w.Put<uint64_t>(f.seq);
  w.Put<uint32_t>(static_cast<uint32_t>(f.body.size()));
  w.PutBytes(f.body);
  w.Put<uint32_t>(Crc32(f.body));
  return out;
}

Frame DecodeFrame(std::span<const uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize) {
    throw Error(ErrorCode::kTruncatedFrame,
                fmt::format("{} bytes is shorter than a frame header", bytes.size()));
  }
  const FrameHeader h = ParseHeader(bytes.first(kFrameHeaderSize));
  ByteReader r(bytes.subspan(kFrameHeaderSize), ErrorCode::kTruncatedFrame);
  if (r.remaining() < static_cast<size_t>(h.body_len) + 4) {
    throw Error(ErrorCode::kTruncatedFrame,
                fmt::format("body_len {} exceeds the {} bytes remaining", h.body_len,
                            r.remaining() >= 4 ? r.remaining() - 4 : 0));
  }
  auto body = r.GetBytes(h.body_len);
  const auto crc = r.Get<uint32_t>();
  if (Crc32(body) != crc) throw Error(ErrorCode::kCrcMismatch, "frame body checksum mismatch");
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kMalformed, fmt::format("{} trailing bytes", r.remaining()));
  }
  return {h.type, h.session_id, h.seq, std::vector<uint8_t>(body.begin(), body.end())};
}

std::vector<uint8_t> EncodeHello(const HelloBody& h) {
  if (h.profile_name.size() > UINT16_MAX) {
    throw Error(ErrorCode::kInvalidParameter, "profile name too long");
  }
  std::vector<uint8_t> out;
  ByteWriter w(out);
  w.Put<uint8_t>(h.protocol_version);
  w.Put<uint16_t>(static_cast<uint16_t>(h.profile_name.size()));
  w.PutString(h.profile_name);
  return out;
}

HelloBody DecodeHello(std::span<const uint8_t> body) {
  ByteReader r(body, ErrorCode::kMalformed);
  HelloBody h;
  h.protocol_version = r.Get<uint8_t>();
  auto name = r.GetBytes(r.Get<uint16_t>());
  h.profile_name.assign(name.begin(), name.end());
  if (r.remaining() != 0) throw Error(ErrorCode::kMalformed, "trailing bytes in HELLO");
  return h;
}

std::vector<uint8_t> EncodeErrorBody(const ErrorBody& e) {
  const std::string msg = e.message.substr(0, UINT16_MAX);
  std::vector<uint8_t> out;
  ByteWriter w(out);
  w.Put<uint16_t>(static_cast<uint16_t>(e.code));
  w.Put<uint16_t>(static_cast<uint16_t>(msg.size()));
  w.PutString(msg);
  return out;
}

ErrorBody DecodeErrorBody(std::span<const uint8_t> body) {
  ByteReader r(body, ErrorCode::kMalformed);
  ErrorBody e;
  const auto code = r.Get<uint16_t>();
  e.code = code <= static_cast<uint16_t>(ErrorCode::kUnknownFigure) ? static_cast<ErrorCode>(code)
                                                                    : ErrorCode::kProtocol;
  auto msg = r.GetBytes(r.Get<uint16_t>());
  e.message.assign(msg.begin(), msg.end());
  return e;
}

std::vector<uint8_t> EncodeResult(std::span<const float> values) {
  std::vector<uint8_t> out;
  ByteWriter w(out);
  w.Put<uint32_t>(static_cast<uint32_t>(values.size()));
  for (float v : values) w.Put<float>(v);
  return out;
}

std::vector<float> DecodeResult(std::span<const uint8_t> body) {
  ByteReader r(body, ErrorCode::kMalformed);
  const auto n = r.Get<uint32_t>();
  if (r.remaining() != static_cast<size_t>(n) * 4) {
    throw Error(ErrorCode::kMalformed, "RESULT length does not match its count");
  }
  std::vector<float> v(n);
  for (auto& x : v) x = r.Get<float>();
  return v;
}

Endpoint ParseEndpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon + 1 == text.size()) {
    throw Error(ErrorCode::kInvalidParameter, fmt::format("endpoint '{}' is not host:port", text));
  }
  Endpoint ep;
  ep.host = std::string(text.substr(0, colon));
  if (ep.host.empty()) ep.host = "127.0.0.1";
  int port = 0;
  for (char c : text.substr(colon + 1)) {
    if (c < '0' || c > '9') {
      throw Error(ErrorCode::kInvalidParameter, fmt::format("bad port in '{}'", text));
    }
    port = port * 10 + (c - '0');
    if (port > 65535) throw Error(ErrorCode::kInvalidParameter, fmt::format("bad port in '{}'", text));
  }
  ep.port = static_cast<uint16_t>(port);
  return ep;
}

// ---------------------------------------------------------------- server

TailServer::TailServer(const StagedBackbone& model, ServerConfig config)
    : model_(model), config_(std::move(config)) {}

TailServer::~TailServer() { Stop(); }

void TailServer::Start() {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(config_.listen.port);
  const char* host = config_.listen.host.empty() ? nullptr : config_.listen.host.c_str();
  if (::getaddrinfo(host, port.c_str(), &hints, &res) != 0 || !res) {
    throw Error(ErrorCode::kBindFailure, "cannot resolve " + config_.listen.host);
  }
  std::string last = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, config_.backlog) == 0) {
      listen_fd_ = fd;
      break;
    }
    last = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (listen_fd_ < 0) {
    throw Error(ErrorCode::kBindFailure,
                fmt::format("bind {}:{}: {}", config_.listen.host, config_.listen.port, last));
  }
  sockaddr_storage addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port
                                           : reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  accept_thread_ = std::thread([this] { AcceptLoop(); });
}

void TailServer::Stop() {
  if (stopping_.exchange(true)) return;
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  if (accept_thread_.joinable()) accept_thread_.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mu_);
    for (int fd : session_fds_) ::shutdown(fd, SHUT_RDWR);
    threads.swap(session_threads_);
  }
  for (auto& t : threads) t.join();
}

void TailServer::AcceptLoop() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      return;
    }
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    session_fds_.push_back(fd);
    session_threads_.emplace_back([this, fd] {
      try {
        Serve(fd);
      } catch (const std::exception&) {
        // The peer went away mid-reply; nothing left to report to.
      }
      std::lock_guard inner(mu_);
      session_fds_.erase(std::find(session_fds_.begin(), session_fds_.end(), fd));
      ::close(fd);
    });
  }
}

void TailServer::Serve(int fd) {
  auto send_error = [&](uint64_t session, uint64_t seq, ErrorCode code, std::string msg) {
    ++errors_sent_;
    WriteFrame(fd, ErrorFrame(session, seq, code, std::move(msg)));
  };
  bool greeted = false;
  uint64_t session = 0;
  std::optional<uint64_t> last_seq;
  const int server_split = model_.server_split();
  while (true) {
    ReadResult in;
    try {
      in = ReadFrame(fd, -1);
    } catch (const Error& e) {
      // Framing is lost; report once and drop the connection.
      send_error(session, 0, e.code(), e.what());
      return;
    }
    if (in.eof) return;
    const Frame& f = in.frame;
    if (!in.crc_ok) {
      send_error(f.session_id, f.seq, ErrorCode::kCrcMismatch, "frame body checksum mismatch");
      continue;
    }
    if (!greeted) {
      if (f.type != FrameType::kHello) {
        send_error(f.session_id, f.seq, ErrorCode::kProtocol, "expected HELLO");
        return;
      }
      HelloBody hello;
      try {
        hello = DecodeHello(f.body);
      } catch (const Error& e) {
        send_error(f.session_id, f.seq, e.code(), e.what());
        return;
      }
      if (hello.protocol_version != kProtocolVersion) {
        send_error(f.session_id, f.seq, ErrorCode::kBadVersion,
                   fmt::format("protocol version {} unsupported", hello.protocol_version));
        return;
      }
      if (hello.profile_name != config_.profile_name) {
        send_error(f.session_id, f.seq, ErrorCode::kProtocol,
                   fmt::format("profile '{}' does not match server profile '{}'",
                               hello.profile_name, config_.profile_name));
        return;
      }
      greeted = true;
      session = f.session_id;
      WriteFrame(fd, {FrameType::kHello, session, f.seq,
                      EncodeHello({kProtocolVersion, config_.profile_name})});
      continue;
    }
    if (f.type == FrameType::kBye) {
      WriteFrame(fd, {FrameType::kBye, session, f.seq, {}});
      ++sessions_served_;
      return;
    }
    if (f.type != FrameType::kActivation) {
      send_error(session, f.seq, ErrorCode::kProtocol,
                 fmt::format("unexpected {} frame", ToString(f.type)));
      continue;
    }
    if (last_seq && f.seq <= *last_seq) {
      send_error(session, f.seq, ErrorCode::kProtocol,
                 fmt::format("seq {} does not follow {}", f.seq, *last_seq));
      continue;
    }
    last_seq = f.seq;
    try {
      const CompressedActivation c = ParseContainer(f.body);
      if (c.split.index < 1 || c.split.index > server_split) {
        throw Error(ErrorCode::kInvalidSplit,
                    fmt::format("split {} cannot be served remotely", c.split.index));
      }
      const Tensor act = DecodeActivation(c);
      const Tensor out = model_.ForwardTail(act, c.split);
      WriteFrame(fd, {FrameType::kResult, session, f.seq, EncodeResult(out.data())});
    } catch (const Error& e) {
      send_error(session, f.seq, e.code(), e.what());
    }
  }
}

// ---------------------------------------------------------------- client

std::vector<FrameOutcome> RunHead(const StagedBackbone& model, const std::vector<Tensor>& frames,
                                  const HeadConfig& config) {
  const int l = config.split;
  if (l < 0 || l > model.server_split()) {
    throw Error(ErrorCode::kInvalidSplit,
                fmt::format("split {} outside 0..{}", l, model.server_split()));
  }
  if (config.pipeline_depth < 1) {
    throw Error(ErrorCode::kInvalidParameter, "pipeline depth must be >= 1");
  }
  std::vector<FrameOutcome> outcomes(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) outcomes[i].index = i;

  if (l == SplitPoint::kLocal) {
    for (size_t i = 0; i < frames.size(); ++i) {
      const auto t0 = Clock::now();
      outcomes[i].result = model.ForwardFull(frames[i]);
      outcomes[i].head_ms = MsSince(t0);
      outcomes[i].total_ms = outcomes[i].head_ms;
      outcomes[i].ok = true;
    }
    return outcomes;
  }

  Socket sock = Connect(config.connect);
  const int fd = sock.fd();
  const int timeout = static_cast<int>(config.timeout.count());
  const uint64_t session = config.session_id;

  WriteFrame(fd, {FrameType::kHello, session, 0,
                  EncodeHello({kProtocolVersion, config.profile_name})});
  {
    ReadResult r = ReadFrame(fd, timeout);
    if (r.eof) throw Error(ErrorCode::kProtocol, "server closed during handshake");
    if (r.frame.type == FrameType::kError) {
      throw Error(ErrorCode::kProtocol,
                  "handshake rejected: " + DecodeErrorBody(r.frame.body).message);
    }
    if (!r.crc_ok || r.frame.type != FrameType::kHello) {
      throw Error(ErrorCode::kProtocol, "bad handshake reply");
    }
  }

  SplitMix64 rng(MixSeed(config.seed, session));
  auto inject = [&] {
    if (config.inject_path) SleepMs(PathDelaySample(*config.inject_path, 1, rng));
  };

  struct Pending {
    size_t index;
    uint64_t seq;
    Clock::time_point sent_at;
    Clock::time_point started_at;
  };
  std::deque<Pending> pending;
  size_t next = 0;
  uint64_t seq = 0;
  while (next < frames.size() || !pending.empty()) {
    while (next < frames.size() && pending.size() < static_cast<size_t>(config.pipeline_depth)) {
      FrameOutcome& o = outcomes[next];
      const auto start = Clock::now();
      Tensor act;
      if (l == model.server_split()) {
        model.ValidateInput(frames[next].shape());
        act = frames[next];
      } else {
        act = model.ForwardHead(frames[next], SplitPoint{l});
      }
      o.head_ms = MsSince(start);
      const auto t1 = Clock::now();
      Frame f{FrameType::kActivation, session, ++seq,
              SerializeContainer(EncodeActivation(act, SplitPoint{l}, config.codec))};
      o.codec_ms = MsSince(t1);
      o.body_bytes = f.body.size();
      const auto sent_at = Clock::now();
      inject();
      WriteFrame(fd, f);
      pending.push_back({next, seq, sent_at, start});
      ++next;
    }
    ReadResult r = ReadFrame(fd, timeout);
    if (r.eof) throw Error(ErrorCode::kProtocol, "server closed the session");
    if (!r.crc_ok) throw Error(ErrorCode::kCrcMismatch, "reply checksum mismatch");
    const Pending p = pending.front();
    if (r.frame.seq != p.seq) {
      throw Error(ErrorCode::kProtocol,
                  fmt::format("reply seq {} does not match pending seq {}", r.frame.seq, p.seq));
    }
    pending.pop_front();
    inject();
    FrameOutcome& o = outcomes[p.index];
    o.network_ms = MsSince(p.sent_at);
    if (r.frame.type == FrameType::kResult) {
      std::vector<float> v = DecodeResult(r.frame.body);
      const size_t n = v.size();
      o.result = Tensor({n}, std::move(v));
      o.ok = true;
    } else if (r.frame.type == FrameType::kError) {
      const ErrorBody e = DecodeErrorBody(r.frame.body);
      o.error = std::string(ToString(e.code)) + ": " + e.message;
    } else {
      throw Error(ErrorCode::kProtocol,
                  fmt::format("unexpected {} reply", ToString(r.frame.type)));
    }
    o.total_ms = MsSince(p.started_at);
  }

  try {
    WriteFrame(fd, {FrameType::kBye, session, ++seq, {}});
    ReadFrame(fd, timeout);
  } catch (const Error&) {
    // Results are complete; a lost goodbye is not a failure.
  }
  return outcomes;
}

std::string TimingLogToCsv(const std::vector<FrameOutcome>& outcomes, int split) {
  std::string out = "frame,split,ok,head_ms,codec_ms,network_ms,total_ms,body_bytes,error\n";
  for (const auto& o : outcomes) {
    std::string err = o.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += fmt::format("{},{},{},{:.3f},{:.3f},{:.3f},{:.3f},{},{}\n", o.index, split,
                       o.ok ? 1 : 0, o.head_ms, o.codec_ms, o.network_ms, o.total_ms,
                       o.body_bytes, err);
  }
  return out;
}

}  // namespace splitinfer
