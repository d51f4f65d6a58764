#include "twopoint/websocket.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

namespace twopoint::net {

namespace {

constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
constexpr std::uint64_t kMaxPayload = 1 << 20;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string websocket_accept_key(std::string_view client_key) {
  const std::string joined = std::string(client_key) + std::string(kGuid);
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(joined.data()), joined.size(), digest);
  unsigned char out[4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1];
  const int n = EVP_EncodeBlock(out, digest, SHA_DIGEST_LENGTH);
  return std::string(reinterpret_cast<char*>(out), static_cast<std::size_t>(n));
}

std::string encode_frame(std::string_view payload, Opcode opcode,
                         std::optional<std::array<std::uint8_t, 4>> mask) {
  std::string out;
  out.push_back(static_cast<char>(0x80 | static_cast<std::uint8_t>(opcode)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::uint64_t len = payload.size();
  if (len < 126) {
    out.push_back(static_cast<char>(mask_bit | len));
  } else if (len <= 0xffff) {
    out.push_back(static_cast<char>(mask_bit | 126));
    out.push_back(static_cast<char>((len >> 8) & 0xff));
    out.push_back(static_cast<char>(len & 0xff));
  } else {
    out.push_back(static_cast<char>(mask_bit | 127));
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  }
  if (mask) {
    for (std::uint8_t b : *mask) out.push_back(static_cast<char>(b));
    for (std::size_t i = 0; i < payload.size(); ++i) {
      out.push_back(static_cast<char>(payload[i] ^ (*mask)[i % 4]));
    }
  } else {
    out.append(payload);
  }
  return out;
}

std::optional<Frame> FrameDecoder::next() {
  const auto* p = reinterpret_cast<const std::uint8_t*>(buffer_.data());
  const std::size_t avail = buffer_.size();
  if (avail < 2) return std::nullopt;
  Frame f;
  f.fin = (p[0] & 0x80) != 0;
  f.opcode = static_cast<Opcode>(p[0] & 0x0f);
  const bool masked = (p[1] & 0x80) != 0;
  std::uint64_t len = p[1] & 0x7f;
  std::size_t pos = 2;
  if (len == 126) {
    if (avail < 4) return std::nullopt;
    len = (std::uint64_t{p[2]} << 8) | p[3];
    pos = 4;
  } else if (len == 127) {
    if (avail < 10) return std::nullopt;
    len = 0;
    for (int i = 0; i < 8; ++i) len = (len << 8) | p[2 + i];
    pos = 10;
  }
  if (len > kMaxPayload) throw std::runtime_error("websocket frame too large");
  std::array<std::uint8_t, 4> key{};
  if (masked) {
    if (avail < pos + 4) return std::nullopt;
    std::copy_n(p + pos, 4, key.begin());
    pos += 4;
  }
  if (avail < pos + len) return std::nullopt;
  f.payload.assign(buffer_, pos, static_cast<std::size_t>(len));
  if (masked) {
    for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] = static_cast<char>(f.payload[i] ^ key[i % 4]);
  }
  buffer_.erase(0, pos + static_cast<std::size_t>(len));
  return f;
}

std::string HttpRequest::header(const std::string& name) const {
  const auto it = headers.find(lower(name));
  return it == headers.end() ? "" : it->second;
}

bool HttpRequest::is_websocket_upgrade() const {
  return lower(header("upgrade")) == "websocket" && !header("sec-websocket-key").empty();
}

std::optional<HttpRequest> parse_http_request(std::string_view data, std::size_t* consumed) {
  const auto end = data.find("\r\n\r\n");
  if (end == std::string_view::npos) return std::nullopt;
  std::istringstream in(std::string(data.substr(0, end)));
  HttpRequest req;
  std::string line, version;
  std::getline(in, line);
  std::istringstream first(line);
  first >> req.method >> req.path >> version;
  if (req.method.empty() || req.path.empty()) throw std::runtime_error("malformed HTTP request");
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    req.headers[lower(trim(line.substr(0, colon)))] = trim(line.substr(colon + 1));
  }
  if (consumed) *consumed = end + 4;
  return req;
}

std::string websocket_handshake_response(const HttpRequest& req) {
  return "HTTP/1.1 101 Switching Protocols\r\n"
         "Upgrade: websocket\r\n"
         "Connection: Upgrade\r\n"
         "Sec-WebSocket-Accept: " +
         websocket_accept_key(req.header("sec-websocket-key")) + "\r\n\r\n";
}

std::string content_type_for(std::string_view path) {
  auto ends = [&](std::string_view ext) {
    return path.size() >= ext.size() && path.substr(path.size() - ext.size()) == ext;
  };
  if (ends(".html")) return "text/html; charset=utf-8";
  if (ends(".js") || ends(".mjs")) return "text/javascript";
  if (ends(".css")) return "text/css";
  if (ends(".json")) return "application/json";
  if (ends(".svg")) return "image/svg+xml";
  if (ends(".png")) return "image/png";
  return "application/octet-stream";
}

}  // namespace twopoint::net
