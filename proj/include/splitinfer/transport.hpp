#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "splitinfer/backbone.hpp"
#include "splitinfer/channel.hpp"
#include "splitinfer/codec.hpp"
#include "splitinfer/error.hpp"
#include "splitinfer/tensor.hpp"

namespace splitinfer {

enum class FrameType : uint8_t {
  kHello = 1,
  kActivation = 2,
  kResult = 3,
  kError = 4,
  kBye = 5,
};

std::string_view ToString(FrameType t);

struct Frame {
  FrameType type = FrameType::kHello;
  uint64_t session_id = 0;
  uint64_t seq = 0;
  std::vector<uint8_t> body;

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline constexpr uint8_t kFrameVersion = 1;
inline constexpr uint8_t kProtocolVersion = 1;
// magic(4) version(1) type(1) session(8) seq(8) body_len(4)
inline constexpr size_t kFrameHeaderSize = 26;
inline constexpr uint32_t kMaxFrameBody = 256u << 20;

// "SPLF" | version u8 | type u8 | session u64 | seq u64 | body_len u32 | body |
// crc32(body) u32, little-endian.
std::vector<uint8_t> EncodeFrame(const Frame& f);
// Decodes exactly one frame occupying all of `bytes`.
Frame DecodeFrame(std::span<const uint8_t> bytes);

struct HelloBody {
  uint8_t protocol_version = kProtocolVersion;
  std::string profile_name;
};
std::vector<uint8_t> EncodeHello(const HelloBody& h);
HelloBody DecodeHello(std::span<const uint8_t> body);

struct ErrorBody {
  ErrorCode code = ErrorCode::kProtocol;
  std::string message;
};
std::vector<uint8_t> EncodeErrorBody(const ErrorBody& e);
ErrorBody DecodeErrorBody(std::span<const uint8_t> body);

// u32 count | f32 * count
std::vector<uint8_t> EncodeResult(std::span<const float> values);
std::vector<float> DecodeResult(std::span<const uint8_t> body);

struct Endpoint {
  std::string host = "127.0.0.1";
  uint16_t port = 0;
};
// "host:port"
Endpoint ParseEndpoint(std::string_view text);

struct ServerConfig {
  std::string profile_name;
  Endpoint listen;  // port 0 picks an ephemeral port
  int backlog = 16;
};

// Tail half of split inference. Each accepted connection is a session served
// by its own thread; frames within a session are handled in order.
class TailServer {
 public:
  TailServer(const StagedBackbone& model, ServerConfig config);
  ~TailServer();
  TailServer(const TailServer&) = delete;
  TailServer& operator=(const TailServer&) = delete;

  // Binds and starts accepting. Throws kBindFailure.
  void Start();
  uint16_t port() const { return port_; }
  // Closes the listener and all sessions, then joins every thread.
  void Stop();
  size_t sessions_served() const { return sessions_served_.load(); }
  size_t errors_sent() const { return errors_sent_.load(); }

 private:
  void AcceptLoop();
  void Serve(int fd);

  const StagedBackbone& model_;
  ServerConfig config_;
  int listen_fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::vector<std::thread> session_threads_;
  std::vector<int> session_fds_;
  std::atomic<size_t> sessions_served_{0};
  std::atomic<size_t> errors_sent_{0};
};

struct HeadConfig {
  std::string profile_name;
  Endpoint connect;
  int split = 1;
  CodecOptions codec;
  // Artificial one-way delay added before each send and after each receive.
  std::optional<PathConfig> inject_path;
  uint64_t seed = 1;
  uint64_t session_id = 1;
  std::chrono::milliseconds timeout{30000};
  int pipeline_depth = 1;
};

struct FrameOutcome {
  size_t index = 0;
  bool ok = false;
  Tensor result;
  std::string error;
  double head_ms = 0.0;
  double codec_ms = 0.0;
  double network_ms = 0.0;
  double total_ms = 0.0;
  size_t body_bytes = 0;  // frame body only, headers excluded
};

// Head half of split inference over `frames`. l = 0 runs locally without
// connecting. Throws kConnectionRefused, kTimeout or kProtocol for session
// level failures; in-band ERROR replies become per-frame failures.
std::vector<FrameOutcome> RunHead(const StagedBackbone& model, const std::vector<Tensor>& frames,
                                  const HeadConfig& config);

// frame,split,ok,head_ms,codec_ms,network_ms,total_ms,body_bytes,error
std::string TimingLogToCsv(const std::vector<FrameOutcome>& outcomes, int split);

}  // namespace splitinfer
