#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "twopoint/checkpoint.hpp"
#include "twopoint/synth.hpp"

namespace twopoint::runtime {

inline constexpr double kTickDeadlineMs = 50.0;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8765;  // 0 = pick a free port
  /// Pace the synthetic source at 1 kHz wall clock. When false the source
  /// runs as fast as the decode loop consumes it.
  bool realtime = true;
  /// Sessions without an explicit "source" field drive the synthetic subject
  /// with the target sine.
  bool scripted = false;
  std::uint64_t seed = 7;
  synth::ArtifactFlags artifacts;
  std::filesystem::path ui_dir;  // static assets; empty disables HTTP file serving
  std::size_t max_ticks = 0;     // 0 = run until stop()
  double k_alpha = 60.0;
  double k_force = 10.0;
};

struct ServiceStats {
  std::size_t ticks = 0;            // telemetry ticks sent to the loop's outbox
  std::size_t skipped = 0;          // seq numbers consumed without a tick
  std::size_t deadline_misses = 0;  // compute (or, in real time, delivery) over 50 ms
  std::size_t controls_applied = 0;
  std::vector<double> compute_ms;   // per tick

  double percentile_ms(double q) const;
  double max_ms() const;
};

nlohmann::json to_json(const ServiceStats& s);

/// Validates an inbound control message; returns an error text or "".
std::string validate_control(const nlohmann::json& msg);

/// Decode service: sample producer, decode/kinematics loop and client I/O on
/// three threads joined by queues.
class Service {
 public:
  Service(ServiceConfig config, std::shared_ptr<const models::ModelCheckpoint> ckpt);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the socket and launches the threads. Throws std::system_error.
  void start();
  int port() const { return bound_port_; }
  /// Blocks until max_ticks is reached or stop() is called.
  void wait();
  /// True once the decode loop has exited.
  bool done() const;
  void stop();

  ServiceStats stats() const;
  std::vector<nlohmann::json> session_results() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int bound_port_ = 0;
};

}  // namespace twopoint::runtime
