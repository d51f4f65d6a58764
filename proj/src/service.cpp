#include "twopoint/service.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <system_error>

#include "twopoint/channel.hpp"
#include "twopoint/kinematics.hpp"
#include "twopoint/stream_decoder.hpp"
#include "twopoint/tracking.hpp"
#include "twopoint/websocket.hpp"

namespace twopoint::runtime {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

double ServiceStats::percentile_ms(double q) const {
  if (compute_ms.empty()) return 0.0;
  std::vector<double> v = compute_ms;
  std::sort(v.begin(), v.end());
  // nearest-rank
  const auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

double ServiceStats::max_ms() const {
  return compute_ms.empty() ? 0.0 : *std::max_element(compute_ms.begin(), compute_ms.end());
}

json to_json(const ServiceStats& s) {
  return {{"ticks", s.ticks},
          {"skipped", s.skipped},
          {"deadline_misses", s.deadline_misses},
          {"controls_applied", s.controls_applied},
          {"p50_ms", s.percentile_ms(50)},
          {"p99_ms", s.percentile_ms(99)},
          {"max_ms", s.max_ms()}};
}

namespace {

bool finite_number(const json& v) { return v.is_number() && std::isfinite(v.get<double>()); }

std::optional<Finger> finger_field(const json& v) {
  try {
    if (v.is_string()) return parse_finger(v.get<std::string>());
    if (v.is_number_integer()) {
      const auto i = v.get<long long>();
      if (i >= 0 && i < static_cast<long long>(kFingers)) return static_cast<Finger>(i);
    }
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

}  // namespace

std::string validate_control(const json& msg) {
  if (!msg.is_object()) return "message must be a JSON object";
  if (!msg.contains("type") || !msg["type"].is_string()) return "missing string field 'type'";
  const std::string type = msg["type"];
  if (type == "set_activation") {
    if (!msg.contains("values") || !msg["values"].is_array() || msg["values"].size() != kFingers) {
      return "'values' must be an array of 5 numbers";
    }
    for (const auto& v : msg["values"]) {
      if (!finite_number(v)) return "'values' must be finite numbers";
      const double x = v.get<double>();
      if (x < -1.0 || x > 1.0) return "'values' must lie in [-1, 1]";
    }
    return "";
  }
  if (type == "set_gains") {
    if (!msg.contains("k_alpha") && !msg.contains("k_F")) return "set_gains needs k_alpha and/or k_F";
    if (msg.contains("k_alpha")) {
      if (!finite_number(msg["k_alpha"]) || msg["k_alpha"].get<double>() < 0.0) return "k_alpha must be >= 0";
    }
    if (msg.contains("k_F")) {
      if (!finite_number(msg["k_F"]) || msg["k_F"].get<double>() <= 0.0) return "k_F must be > 0";
    }
    return "";
  }
  if (type == "session") {
    const std::string action = msg.value("action", "");
    if (action == "stop") return "";
    if (action != "start") return "'action' must be \"start\" or \"stop\"";
    if (msg.value("mode", "sine") != "sine") return "only mode \"sine\" is supported";
    if (msg.contains("freq") && (!finite_number(msg["freq"]) || msg["freq"].get<double>() <= 0.0)) {
      return "'freq' must be > 0";
    }
    if (msg.contains("finger") && !finger_field(msg["finger"])) return "unknown finger";
    if (msg.contains("duration") && (!finite_number(msg["duration"]) || msg["duration"].get<double>() <= 0.0)) {
      return "'duration' must be > 0";
    }
    if (msg.contains("source")) {
      const auto& s = msg["source"];
      if (!s.is_string() || (s != "scripted" && s != "human")) return "'source' must be \"scripted\" or \"human\"";
    }
    return "";
  }
  if (type == "load_model") {
    if (!msg.contains("path") || !msg["path"].is_string()) return "missing string field 'path'";
    return "";
  }
  if (type == "export_session") return "";
  return "unknown message type '" + type + "'";
}

namespace {

struct Chunk {
  std::vector<double> frames;  // kWindowStep frames x 12, frame-major
  Clock::time_point ready;
};

struct ProducerCommand {
  enum Kind { kLabels, kStartSine, kStopSine } kind = kLabels;
  FingerLabels labels;
  Finger finger = Finger::kIndex;
  double freq = 0.1;
  std::size_t start_sample = 0;
};

struct Control {
  enum Kind { kMessage, kConnected, kDisconnected } kind = kMessage;
  json msg;
  std::shared_ptr<const models::ModelCheckpoint> model;
};

struct ActiveSession {
  TrackingSession record;
  std::size_t start_sample = 0;
  std::optional<double> duration;
  bool scripted = false;
  bool paused = false;
  int consecutive_drops = 0;
};

void set_nonblocking(int fd) {
  const int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

[[noreturn]] void throw_errno(const std::string& what) {
  throw std::system_error(errno, std::generic_category(), what);
}

json labels_json(const FingerLabels& l) { return json(l.values); }

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  std::shared_ptr<const models::ModelCheckpoint> initial_model;
  SubjectModel subject;

  int listen_fd = -1;
  std::atomic<bool> stopping{false};
  std::atomic<bool> finished{false};

  Channel<Chunk> chunks;
  Channel<ProducerCommand> producer_commands;
  Channel<Control> controls;
  Channel<std::string> outbox;

  std::thread producer_thread, loop_thread, io_thread;

  mutable std::mutex result_mu;
  ServiceStats final_stats;
  std::vector<json> results;

  std::mutex done_mu;
  std::condition_variable done_cv;

  Impl(ServiceConfig cfg, std::shared_ptr<const models::ModelCheckpoint> ckpt)
      : config(std::move(cfg)),
        initial_model(std::move(ckpt)),
        subject(subject_model(*initial_model)),
        chunks(config.realtime ? 64 : 2) {}

  // ---- sample producer ----------------------------------------------------
  void run_producer() {
    SynthSource source(subject.mixing, subject.config, config.seed, config.artifacts);
    const auto hop = std::chrono::microseconds(static_cast<long long>(kHopSeconds * 1e6));
    auto next_due = Clock::now();
    std::array<double, kChannels> frame{};
    while (!stopping) {
      while (auto cmd = producer_commands.try_pop()) {
        switch (cmd->kind) {
          case ProducerCommand::kLabels: source.set_labels(cmd->labels); break;
          case ProducerCommand::kStartSine: source.start_sine(cmd->finger, cmd->freq, cmd->start_sample); break;
          case ProducerCommand::kStopSine: source.stop_sine(); break;
        }
      }
      if (config.realtime) {
        next_due += hop;
        std::this_thread::sleep_until(next_due);
      }
      Chunk chunk;
      chunk.frames.resize(kWindowStep * kChannels);
      for (std::size_t i = 0; i < kWindowStep; ++i) {
        source.next(frame);
        std::copy(frame.begin(), frame.end(), chunk.frames.begin() + static_cast<std::ptrdiff_t>(i * kChannels));
      }
      chunk.ready = Clock::now();
      if (!chunks.push(std::move(chunk))) break;
    }
  }

  // ---- decode / kinematics loop -------------------------------------------
  struct LoopState {
    explicit LoopState(std::shared_ptr<const models::ModelCheckpoint> ckpt) : decoder(std::move(ckpt)) {}
    StreamDecoder decoder;
    HandState hand;
    FingerLabels sliders;
    std::optional<ActiveSession> session;
    std::optional<TrackingSession> last_session;
    std::size_t seq = 0;
    bool connected = false;
    ServiceStats stats;
  };

  void emit(const json& j) { outbox.push(j.dump()); }

  void ack(LoopState& s, const json& msg) {
    json a = {{"type", "ack"}, {"request", msg["type"]}, {"seq", s.seq}};
    if (msg.contains("id")) a["id"] = msg["id"];
    emit(a);
    ++s.stats.controls_applied;
  }

  void error_reply(const json& msg, const std::string& text) {
    json e = {{"type", "error"}, {"message", text}};
    if (msg.is_object() && msg.contains("type")) e["request"] = msg["type"];
    if (msg.is_object() && msg.contains("id")) e["id"] = msg["id"];
    emit(e);
  }

  void finish_session(LoopState& s, bool aborted) {
    if (!s.session) return;
    auto& rec = s.session->record;
    rec.aborted = aborted;
    if (rec.t.size() >= 2) rec.metrics = eval::tracking_metrics(rec.target, rec.decoded);
    if (s.session->scripted) producer_commands.push(ProducerCommand{ProducerCommand::kStopSine, {}});
    json r = to_json(rec, false);
    r["type"] = aborted ? "session_abort" : "session_result";
    emit(r);
    {
      std::lock_guard lock(result_mu);
      results.push_back(to_json(rec, false));
    }
    s.last_session = std::move(rec);
    s.session.reset();
  }

  void apply_control(LoopState& s, Control& c) {
    if (c.kind == Control::kConnected) {
      s.connected = true;
      if (s.session) s.session->paused = false;
      return;
    }
    if (c.kind == Control::kDisconnected) {
      s.connected = false;
      if (s.session) s.session->paused = true;
      return;
    }
    const json& msg = c.msg;
    const std::string type = msg["type"];
    if (type == "set_activation") {
      for (std::size_t j = 0; j < kFingers; ++j) s.sliders[j] = msg["values"][j].get<double>();
      producer_commands.push({ProducerCommand::kLabels, s.sliders});
    } else if (type == "set_gains") {
      if (msg.contains("k_alpha")) s.hand.k_alpha = msg["k_alpha"].get<double>();
      if (msg.contains("k_F")) s.hand.k_force = msg["k_F"].get<double>();
    } else if (type == "session") {
      if (msg["action"] == "stop") {
        if (!s.session) {
          error_reply(msg, "no active session");
          return;
        }
        ack(s, msg);
        finish_session(s, false);
        return;
      }
      if (s.session) finish_session(s, false);
      ActiveSession a;
      a.record.freq_hz = msg.value("freq", 0.1);
      a.record.finger = msg.contains("finger") ? *finger_field(msg["finger"]) : Finger::kIndex;
      if (msg.contains("duration")) a.duration = msg["duration"].get<double>();
      a.scripted = msg.contains("source") ? msg["source"] == "scripted" : config.scripted;
      a.record.mode = "sine";
      a.start_sample = s.decoder.samples_seen();
      a.paused = !s.connected;
      if (a.scripted) {
        ProducerCommand cmd{ProducerCommand::kStartSine, {}};
        cmd.finger = a.record.finger;
        cmd.freq = a.record.freq_hz;
        cmd.start_sample = a.start_sample;
        producer_commands.push(cmd);
      }
      s.session = std::move(a);
    } else if (type == "load_model") {
      s.decoder.set_model(c.model);
    } else if (type == "export_session") {
      const TrackingSession* rec = s.session ? &s.session->record : (s.last_session ? &*s.last_session : nullptr);
      if (!rec) {
        error_reply(msg, "no session recorded");
        return;
      }
      ack(s, msg);
      json r = to_json(*rec, true);
      r["type"] = "session_record";
      r["active"] = s.session.has_value();
      emit(r);
      return;
    }
    ack(s, msg);
  }

  void run_loop() {
    LoopState s(initial_model);
    s.hand.k_alpha = config.k_alpha;
    s.hand.k_force = config.k_force;
    const auto hop = std::chrono::duration<double>(kHopSeconds);
    const auto deadline = std::chrono::duration<double, std::milli>(kTickDeadlineMs);

    while (!stopping) {
      auto chunk = chunks.pop_for(config.realtime ? 2 * hop : std::chrono::duration<double>(0.5));
      if (!chunk) {
        if (stopping || chunks.closed()) break;
        if (config.realtime && s.decoder.samples_seen() >= kWindowLength) {
          // underrun: the hop passed without samples
          ++s.seq;
          ++s.stats.skipped;
        }
        continue;
      }
      const auto t0 = Clock::now();
      while (auto c = controls.try_pop()) apply_control(s, *c);

      const std::size_t before = s.decoder.dropped_ticks();
      std::optional<DecodeTick> tick;
      for (std::size_t i = 0; i < kWindowStep; ++i) {
        std::span<const double, kChannels> frame(chunk->frames.data() + i * kChannels, kChannels);
        if (auto r = s.decoder.push(frame)) tick = r;
      }
      if (!tick) {
        if (s.decoder.dropped_ticks() == before) continue;  // still filling the window
        ++s.seq;
        ++s.stats.skipped;
        if (s.session && !s.session->paused) {
          ++s.session->record.dropped_ticks;
          if (++s.session->consecutive_drops > kMaxConsecutiveDrops) finish_session(s, true);
        }
        continue;
      }

      s.hand = kinematics_step(s.hand, tick->labels, kHopSeconds);
      const auto forces = force_map(tick->labels, s.hand.k_force);
      json msg = {{"type", "tick"},
                  {"seq", s.seq},
                  {"t", tick->t},
                  {"labels", labels_json(tick->labels)},
                  {"forces", forces},
                  {"angles", json::array()},
                  {"skipped", s.stats.skipped}};
      for (const auto& f : s.hand.fingers) msg["angles"].push_back(f.angle_deg);

      bool session_done = false;
      if (s.session) {
        auto& a = *s.session;
        const std::size_t newest = s.decoder.samples_seen() - 1;
        const double ts = (static_cast<double>(newest) - static_cast<double>(a.start_sample)) / kSampleRate;
        const double target = sine_target(a.record.freq_hz, ts);
        msg["target"] = target;
        msg["finger"] = finger_name(a.record.finger);
        if (!a.paused) {
          a.consecutive_drops = 0;
          a.record.t.push_back(ts);
          a.record.target.push_back(target);
          a.record.decoded.push_back(tick->labels[a.record.finger]);
        }
        session_done = a.duration && ts >= *a.duration;
      }
      emit(msg);
      ++s.seq;
      if (session_done) finish_session(s, false);

      const auto t1 = Clock::now();
      const std::chrono::duration<double, std::milli> compute = t1 - t0;
      s.stats.compute_ms.push_back(compute.count());
      bool missed = compute > deadline;
      if (config.realtime && t1 - chunk->ready > deadline) missed = true;
      if (missed) ++s.stats.deadline_misses;
      ++s.stats.ticks;
      if (config.max_ticks && s.stats.ticks >= config.max_ticks) break;
    }
    if (s.session) finish_session(s, false);
    {
      std::lock_guard lock(result_mu);
      final_stats = s.stats;
    }
    {
      std::lock_guard lock(done_mu);
      finished = true;
    }
    done_cv.notify_all();
  }

  // ---- client I/O -----------------------------------------------------------
  enum class ConnState { kPending, kRaw, kWebSocket, kClosing };

  struct Conn {
    int fd = -1;
    ConnState state = ConnState::kPending;
    Clock::time_point opened;
    std::string in;
    std::string out;
    net::FrameDecoder frames;
    std::string fragments;
    bool active = false;
  };

  static void send_line(Conn& c, const std::string& text) {
    if (c.state == ConnState::kWebSocket) {
      c.out += net::encode_frame(text);
    } else {
      c.out += text;
      c.out += '\n';
    }
  }

  void reply_error(Conn& c, const json& msg, const std::string& text) {
    json e = {{"type", "error"}, {"message", text}};
    if (msg.is_object() && msg.contains("type")) e["request"] = msg["type"];
    if (msg.is_object() && msg.contains("id")) e["id"] = msg["id"];
    send_line(c, e.dump());
  }

  void handle_text(Conn& c, std::string_view text) {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view line = text.substr(pos, nl - pos);
      pos = nl + 1;
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
      if (line.empty()) continue;
      json msg = json::parse(line, nullptr, false);
      if (msg.is_discarded()) {
        reply_error(c, json(), "malformed JSON");
        continue;
      }
      if (const auto err = validate_control(msg); !err.empty()) {
        reply_error(c, msg, err);
        continue;
      }
      Control ctl{Control::kMessage, msg, nullptr};
      if (msg["type"] == "load_model") {
        try {
          ctl.model = std::make_shared<const models::ModelCheckpoint>(
              models::load_checkpoint(msg["path"].get<std::string>()));
        } catch (const std::exception& e) {
          reply_error(c, msg, std::string("load_model failed: ") + e.what());
          continue;
        }
      }
      controls.push(std::move(ctl));
    }
  }

  std::string static_response(const net::HttpRequest& req) {
    auto respond = [](int code, const std::string& reason, const std::string& type, const std::string& body) {
      std::ostringstream o;
      o << "HTTP/1.1 " << code << ' ' << reason << "\r\nContent-Type: " << type
        << "\r\nContent-Length: " << body.size() << "\r\nConnection: close\r\n\r\n"
        << body;
      return o.str();
    };
    if (config.ui_dir.empty() || req.method != "GET") return respond(404, "Not Found", "text/plain", "not found\n");
    std::string path = req.path.substr(0, req.path.find('?'));
    if (path.empty() || path == "/") path = "/index.html";
    if (path.find("..") != std::string::npos) return respond(403, "Forbidden", "text/plain", "forbidden\n");
    const auto file = config.ui_dir / path.substr(1);
    std::ifstream in(file, std::ios::binary);
    if (!in) return respond(404, "Not Found", "text/plain", "not found\n");
    std::ostringstream body;
    body << in.rdbuf();
    return respond(200, "OK", net::content_type_for(path), body.str());
  }

  bool has_active(const std::vector<Conn>& conns) const {
    return std::any_of(conns.begin(), conns.end(), [](const Conn& c) { return c.active; });
  }

  void activate(std::vector<Conn>& conns, Conn& c, ConnState state) {
    if (has_active(conns)) {
      send_line(c, json{{"type", "error"}, {"message", "busy: another client is connected"}}.dump());
      c.state = ConnState::kClosing;
      return;
    }
    c.state = state;
    c.active = true;
    controls.push(Control{Control::kConnected, {}, nullptr});
  }

  // Returns false when the connection should close.
  bool on_readable(std::vector<Conn>& conns, Conn& c) {
    char buf[8192];
    const ssize_t n = ::recv(c.fd, buf, sizeof buf, 0);
    if (n == 0) return false;
    if (n < 0) return errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR;
    if (c.state == ConnState::kClosing) return true;
    if (c.state == ConnState::kWebSocket) {
      c.frames.feed(std::string_view(buf, static_cast<std::size_t>(n)));
      while (auto f = c.frames.next()) {
        switch (f->opcode) {
          case net::Opcode::kText:
          case net::Opcode::kBinary:
          case net::Opcode::kContinuation:
            c.fragments += f->payload;
            if (f->fin) {
              handle_text(c, c.fragments);
              c.fragments.clear();
            }
            break;
          case net::Opcode::kPing: c.out += net::encode_frame(f->payload, net::Opcode::kPong); break;
          case net::Opcode::kClose:
            c.out += net::encode_frame("", net::Opcode::kClose);
            c.state = ConnState::kClosing;
            return true;
          default: break;
        }
      }
      return true;
    }
    c.in.append(buf, static_cast<std::size_t>(n));
    if (c.state == ConnState::kPending) {
      if (c.in.size() < 4 && std::string_view("GET ").starts_with(c.in)) return true;
      if (c.in.rfind("GET ", 0) == 0) {
        std::size_t consumed = 0;
        std::optional<net::HttpRequest> req;
        try {
          req = net::parse_http_request(c.in, &consumed);
        } catch (const std::exception&) {
          return false;
        }
        if (!req) return c.in.size() < 65536;
        c.in.erase(0, consumed);
        if (req->is_websocket_upgrade()) {
          if (has_active(conns)) {
            c.out += "HTTP/1.1 503 Service Unavailable\r\nContent-Length: 0\r\nConnection: close\r\n\r\n";
            c.state = ConnState::kClosing;
            return true;
          }
          c.out += net::websocket_handshake_response(*req);
          activate(conns, c, ConnState::kWebSocket);
          if (!c.in.empty()) {
            c.frames.feed(c.in);
            c.in.clear();
          }
        } else {
          c.out += static_response(*req);
          c.state = ConnState::kClosing;
        }
        return true;
      }
      activate(conns, c, ConnState::kRaw);
      if (c.state == ConnState::kClosing) return true;
    }
    const auto last_nl = c.in.rfind('\n');
    if (last_nl != std::string::npos) {
      handle_text(c, std::string_view(c.in).substr(0, last_nl));
      c.in.erase(0, last_nl + 1);
    }
    if (c.in.size() > (1u << 20)) return false;
    return true;
  }

  bool flush(Conn& c) {
    while (!c.out.empty()) {
      const ssize_t n = ::send(c.fd, c.out.data(), c.out.size(), MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK) break;
        if (errno == EINTR) continue;
        return false;
      }
      c.out.erase(0, static_cast<std::size_t>(n));
    }
    // A client that stops reading is dropped rather than buffered forever.
    return c.out.size() < (8u << 20);
  }

  void close_conn(Conn& c) {
    if (c.active) controls.push(Control{Control::kDisconnected, {}, nullptr});
    ::close(c.fd);
    c.fd = -1;
  }

  void run_io() {
    std::vector<Conn> conns;
    const auto pending_grace = std::chrono::milliseconds(250);
    while (!stopping) {
      std::vector<pollfd> fds;
      fds.push_back({listen_fd, POLLIN, 0});
      for (const auto& c : conns) {
        short ev = POLLIN;
        if (!c.out.empty()) ev |= POLLOUT;
        fds.push_back({c.fd, ev, 0});
      }
      ::poll(fds.data(), fds.size(), 2);

      if (fds[0].revents & POLLIN) {
        const int fd = ::accept(listen_fd, nullptr, nullptr);
        if (fd >= 0) {
          set_nonblocking(fd);
          const int one = 1;
          setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
          Conn c;
          c.fd = fd;
          c.opened = Clock::now();
          conns.push_back(std::move(c));
        }
      }
      for (std::size_t i = 0; i + 1 < fds.size() && i < conns.size(); ++i) {
        auto& c = conns[i];
        bool keep = true;
        if (fds[i + 1].revents & (POLLIN | POLLHUP | POLLERR)) keep = on_readable(conns, c);
        if (keep && c.state == ConnState::kPending && Clock::now() - c.opened > pending_grace) {
          // silent clients are raw line-protocol clients
          activate(conns, c, ConnState::kRaw);
        }
        if (!keep) close_conn(c);
      }

      // Telemetry and replies from the loop go to the active client only.
      while (auto m = outbox.try_pop()) {
        for (auto& c : conns) {
          if (c.fd >= 0 && c.active && c.state != ConnState::kClosing) send_line(c, *m);
        }
      }
      for (auto& c : conns) {
        if (c.fd < 0) continue;
        if (!flush(c) || (c.state == ConnState::kClosing && c.out.empty())) close_conn(c);
      }
      conns.erase(std::remove_if(conns.begin(), conns.end(), [](const Conn& c) { return c.fd < 0; }), conns.end());
    }
    for (auto& c : conns) {
      flush(c);
      close_conn(c);
    }
  }
};

Service::Service(ServiceConfig config, std::shared_ptr<const models::ModelCheckpoint> ckpt)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(ckpt))) {}

Service::~Service() { stop(); }

void Service::start() {
  auto& im = *impl_;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(im.config.port);
  if (const int rc = ::getaddrinfo(im.config.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw std::system_error(std::make_error_code(std::errc::invalid_argument),
                            "cannot resolve " + im.config.host + ": " + gai_strerror(rc));
  }
  im.listen_fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (im.listen_fd < 0) {
    freeaddrinfo(res);
    throw_errno("socket");
  }
  const int one = 1;
  setsockopt(im.listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(im.listen_fd, res->ai_addr, res->ai_addrlen) != 0) {
    const int err = errno;
    freeaddrinfo(res);
    ::close(im.listen_fd);
    im.listen_fd = -1;
    throw std::system_error(err, std::generic_category(), "bind " + im.config.host + ":" + port);
  }
  freeaddrinfo(res);
  if (::listen(im.listen_fd, 8) != 0) throw_errno("listen");
  set_nonblocking(im.listen_fd);
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  getsockname(im.listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
  bound_port_ = ntohs(addr.sin_port);

  im.producer_thread = std::thread([&im] { im.run_producer(); });
  im.loop_thread = std::thread([&im] { im.run_loop(); });
  im.io_thread = std::thread([&im] { im.run_io(); });
}

void Service::wait() {
  auto& im = *impl_;
  if (!im.loop_thread.joinable()) return;
  std::unique_lock lock(im.done_mu);
  im.done_cv.wait(lock, [&] { return im.finished.load(); });
}

bool Service::done() const { return impl_->finished; }

void Service::stop() {
  auto& im = *impl_;
  if (!im.loop_thread.joinable() && im.listen_fd < 0) return;
  // Give the I/O thread a moment to flush the loop's final messages.
  if (im.finished) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  im.stopping = true;
  im.chunks.close();
  im.producer_commands.close();
  im.controls.close();
  if (im.producer_thread.joinable()) im.producer_thread.join();
  if (im.loop_thread.joinable()) im.loop_thread.join();
  if (im.io_thread.joinable()) im.io_thread.join();
  im.outbox.close();
  if (im.listen_fd >= 0) ::close(im.listen_fd);
  im.listen_fd = -1;
}

ServiceStats Service::stats() const {
  std::lock_guard lock(impl_->result_mu);
  return impl_->final_stats;
}

std::vector<json> Service::session_results() const {
  std::lock_guard lock(impl_->result_mu);
  return impl_->results;
}

}  // namespace twopoint::runtime
