#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <variant>

#include "gatesim/error.hpp"
#include "gatesim/vehicle.hpp"

namespace gatesim::link {

/// Wire grammar of the command channel (one ASCII message per datagram):
///   "command"            enter SDK mode
///   "takeoff" | "land"
///   "rc A B C D"         signed integers in [-100, 100]
struct EnterSdk {};
struct Takeoff {};
struct Land {};
struct Rc {
  int a = 0;  // -> vy
  int b = 0;  // -> vx
  int c = 0;  // -> vz
  int d = 0;  // -> wz
};
using CommandMessage = std::variant<EnterSdk, Takeoff, Land, Rc>;

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string token)
      : Error(what + ": '" + token + "'"), token_(std::move(token)) {}
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

class TimeoutError : public Error {
 public:
  explicit TimeoutError(const std::string& what) : Error(what) {}
};

std::string encode_command(const CommandMessage& m);
CommandMessage decode_command(std::string_view line);  // throws ParseError

/// Rc channels map linearly onto the velocity command, full scale at the
/// plant saturation limits.
Rc rc_from_velocity(const vehicle::VelocityCommand& cmd,
                    const vehicle::PlantParams& p);
vehicle::VelocityCommand velocity_from_rc(const Rc& rc,
                                          const vehicle::PlantParams& p);

struct Response {
  bool ok = false;
  std::string error;  // reason when !ok
};

std::string encode_response(const Response& r);
Response decode_response(std::string_view line);  // throws ParseError

/// Telemetry line, fixed field order:
///   "time:T;x:X;y:Y;z:Z;yaw:W;vx:A;vy:B;vz:C"
struct TelemetryMessage {
  std::int64_t time_ms = 0;
  double x_mm = 0, y_mm = 0, z_mm = 0;
  double yaw_deg = 0;
  double vx_mm_s = 0, vy_mm_s = 0, vz_mm_s = 0;
};

std::string encode_telemetry(const TelemetryMessage& t);
TelemetryMessage decode_telemetry(std::string_view line);  // throws ParseError

TelemetryMessage telemetry_from_state(const vehicle::DroneState& s);

/// Largest datagram the protocol accepts.
constexpr std::size_t kMaxDatagram = 256;

constexpr std::uint16_t kDefaultCommandPort = 8889;
constexpr std::uint16_t kDefaultTelemetryPort = 8890;

/// Minimal RAII UDP socket bound to the loopback interface.
class UdpSocket {
 public:
  UdpSocket();
  ~UdpSocket();
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;

  /// Binds to 127.0.0.1:port; port 0 picks an ephemeral port.
  void bind(std::uint16_t port);
  std::uint16_t local_port() const;

  struct Endpoint {
    std::uint32_t addr = 0;  // network byte order
    std::uint16_t port = 0;  // network byte order
  };

  void send_to(std::string_view payload, const Endpoint& dest) const;
  /// Waits up to timeout_ms for a datagram; nullopt on timeout.
  std::optional<std::pair<std::string, Endpoint>> recv_from(
      int timeout_ms) const;

  static Endpoint loopback(std::uint16_t host_order_port);

 private:
  int fd_ = -1;
};

/// Command/telemetry server: owns the last-write-wins command mailbox the
/// simulation loop reads from. A background thread parses datagrams, applies
/// valid commands atomically and acknowledges each one; telemetry is emitted
/// towards the last command sender at 10 Hz of simulation time whenever the
/// loop publishes state.
class LinkServer {
 public:
  LinkServer(std::uint16_t command_port, std::uint16_t telemetry_port,
             const vehicle::PlantParams& plant);
  ~LinkServer();

  void start();
  void stop();

  std::uint16_t command_port() const { return socket_.local_port(); }

  /// Current mailbox command (zero until SDK mode + an rc arrive).
  vehicle::VelocityCommand current_command() const;
  bool sdk_mode() const;
  bool flying() const;

  /// Retargets telemetry, e.g. to a client that bound an ephemeral port.
  void set_telemetry_port(std::uint16_t port);

  /// Telemetry hook for the loop that owns the plant.
  void publish_state(const vehicle::DroneState& s);

 private:
  void rx_loop();

  UdpSocket socket_;
  std::uint16_t telemetry_port_;
  vehicle::PlantParams plant_;
  std::thread rx_thread_;
  std::atomic<bool> running_{false};

  mutable std::mutex mutex_;
  vehicle::VelocityCommand command_;
  bool sdk_mode_ = false;
  bool flying_ = false;
  std::optional<UdpSocket::Endpoint> last_sender_;
  double next_telemetry_s_ = 0.0;
};

/// Client side of the protocol: sends one command per call and waits for the
/// acknowledgement. Commands are never retried internally, so a velocity
/// command is applied at most once.
class LinkClient {
 public:
  LinkClient(std::uint16_t server_command_port, int timeout_ms = 500);

  Response send(const CommandMessage& m);  // throws TimeoutError

  /// Opens the telemetry receive socket (port 0 = ephemeral).
  void open_telemetry(std::uint16_t port);
  std::uint16_t telemetry_port() const;
  std::optional<TelemetryMessage> poll_telemetry(int timeout_ms);

 private:
  UdpSocket command_socket_;
  std::optional<UdpSocket> telemetry_socket_;
  UdpSocket::Endpoint server_;
  int timeout_ms_;
};

/// Wall-clock plant server: steps the plant in real time under mailbox
/// control until stop becomes true. Used by the standalone `serve` command.
void serve_plant(LinkServer& server, vehicle::DroneState state,
                 const vehicle::PlantParams& plant,
                 const std::atomic<bool>& stop);

}  // namespace gatesim::link
