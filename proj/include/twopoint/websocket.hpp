#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace twopoint::net {

enum class Opcode : std::uint8_t {
  kContinuation = 0x0,
  kText = 0x1,
  kBinary = 0x2,
  kClose = 0x8,
  kPing = 0x9,
  kPong = 0xA,
};

struct Frame {
  Opcode opcode = Opcode::kText;
  bool fin = true;
  std::string payload;
};

/// Sec-WebSocket-Accept for a client key.
std::string websocket_accept_key(std::string_view client_key);

/// Server frames are unmasked; client frames must carry a mask.
std::string encode_frame(std::string_view payload, Opcode opcode = Opcode::kText,
                         std::optional<std::array<std::uint8_t, 4>> mask = std::nullopt);

/// Incremental frame parser.
class FrameDecoder {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }
  /// Next complete frame, unmasked. Throws std::runtime_error on frames
  /// larger than the limit.
  std::optional<Frame> next();

 private:
  std::string buffer_;
};

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> headers;  // keys lower-cased

  std::string header(const std::string& name) const;
  bool is_websocket_upgrade() const;
};

/// Parses a request head once "\r\n\r\n" has arrived; nullopt until then.
std::optional<HttpRequest> parse_http_request(std::string_view data, std::size_t* consumed = nullptr);

std::string websocket_handshake_response(const HttpRequest& req);

std::string content_type_for(std::string_view path);

}  // namespace twopoint::net
