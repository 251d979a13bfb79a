#include "gatesim/link.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <vector>

namespace gatesim::link {

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

int parse_rc_channel(std::string_view tok) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw ParseError("not an integer", std::string(tok));
  if (value < -100 || value > 100)
    throw ParseError("rc channel out of range", std::string(tok));
  return value;
}

int clamp_channel(double v) {
  return static_cast<int>(
      std::lround(std::clamp(v, -100.0, 100.0)));
}

double parse_double(std::string_view tok) {
  // std::from_chars for doubles is missing on some standard libraries.
  std::string buf(tok);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || buf.empty())
    throw ParseError("not a number", buf);
  return v;
}

}  // namespace

std::string encode_command(const CommandMessage& m) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, EnterSdk>) return "command";
        if constexpr (std::is_same_v<T, Takeoff>) return "takeoff";
        if constexpr (std::is_same_v<T, Land>) return "land";
        if constexpr (std::is_same_v<T, Rc>)
          return "rc " + std::to_string(v.a) + " " + std::to_string(v.b) +
                 " " + std::to_string(v.c) + " " + std::to_string(v.d);
      },
      m);
}

CommandMessage decode_command(std::string_view line) {
  if (line.size() > kMaxDatagram)
    throw ParseError("datagram too long",
                     std::string(line.substr(0, 16)) + "...");
  const auto tokens = split_ws(line);
  if (tokens.empty()) throw ParseError("empty message", "");

  const std::string_view verb = tokens[0];
  if (verb == "command") {
    if (tokens.size() != 1) throw ParseError("unexpected argument",
                                             std::string(tokens[1]));
    return EnterSdk{};
  }
  if (verb == "takeoff") {
    if (tokens.size() != 1) throw ParseError("unexpected argument",
                                             std::string(tokens[1]));
    return Takeoff{};
  }
  if (verb == "land") {
    if (tokens.size() != 1) throw ParseError("unexpected argument",
                                             std::string(tokens[1]));
    return Land{};
  }
  if (verb == "rc") {
    if (tokens.size() != 5)
      throw ParseError("rc needs 4 channels", std::string(line));
    return Rc{parse_rc_channel(tokens[1]), parse_rc_channel(tokens[2]),
              parse_rc_channel(tokens[3]), parse_rc_channel(tokens[4])};
  }
  throw ParseError("unknown verb", std::string(verb));
}

Rc rc_from_velocity(const vehicle::VelocityCommand& cmd,
                    const vehicle::PlantParams& p) {
  return Rc{clamp_channel(cmd.vy_mm_s / p.v_max_mm_s * 100.0),
            clamp_channel(cmd.vx_mm_s / p.v_max_mm_s * 100.0),
            clamp_channel(cmd.vz_mm_s / p.v_max_mm_s * 100.0),
            clamp_channel(cmd.wz_deg_s / p.w_max_deg_s * 100.0)};
}

vehicle::VelocityCommand velocity_from_rc(const Rc& rc,
                                          const vehicle::PlantParams& p) {
  return vehicle::VelocityCommand{rc.b / 100.0 * p.v_max_mm_s,
                                  rc.a / 100.0 * p.v_max_mm_s,
                                  rc.c / 100.0 * p.v_max_mm_s,
                                  rc.d / 100.0 * p.w_max_deg_s};
}

std::string encode_response(const Response& r) {
  return r.ok ? "ok" : "error " + r.error;
}

Response decode_response(std::string_view line) {
  if (line == "ok") return Response{true, ""};
  if (line.substr(0, 6) == "error ")
    return Response{false, std::string(line.substr(6))};
  if (line == "error") return Response{false, ""};
  throw ParseError("malformed response", std::string(line));
}

std::string encode_telemetry(const TelemetryMessage& t) {
  char buf[224];
  std::snprintf(buf, sizeof buf,
                "time:%lld;x:%.1f;y:%.1f;z:%.1f;yaw:%.2f;vx:%.1f;vy:%.1f;vz:%.1f",
                static_cast<long long>(t.time_ms), t.x_mm, t.y_mm, t.z_mm,
                t.yaw_deg, t.vx_mm_s, t.vy_mm_s, t.vz_mm_s);
  return buf;
}

TelemetryMessage decode_telemetry(std::string_view line) {
  static constexpr const char* kKeys[] = {"time", "x",  "y",  "z",
                                          "yaw",  "vx", "vy", "vz"};
  double values[8];
  size_t pos = 0;
  for (size_t k = 0; k < 8; ++k) {
    const size_t end = line.find(';', pos);
    const std::string_view field = line.substr(
        pos, end == std::string_view::npos ? std::string_view::npos
                                           : end - pos);
    const size_t colon = field.find(':');
    if (colon == std::string_view::npos)
      throw ParseError("missing field", std::string(kKeys[k]));
    if (field.substr(0, colon) != kKeys[k])
      throw ParseError("unexpected field", std::string(field.substr(0, colon)));
    values[k] = parse_double(field.substr(colon + 1));
    if (end == std::string_view::npos) {
      if (k != 7) throw ParseError("truncated telemetry", std::string(line));
      break;
    }
    pos = end + 1;
  }
  return TelemetryMessage{static_cast<std::int64_t>(values[0]),
                          values[1],
                          values[2],
                          values[3],
                          values[4],
                          values[5],
                          values[6],
                          values[7]};
}

TelemetryMessage telemetry_from_state(const vehicle::DroneState& s) {
  return TelemetryMessage{static_cast<std::int64_t>(std::llround(s.t_s * 1e3)),
                          s.position_mm.x(),
                          s.position_mm.y(),
                          s.position_mm.z(),
                          s.yaw_deg,
                          s.velocity_world_mm_s.x(),
                          s.velocity_world_mm_s.y(),
                          s.velocity_world_mm_s.z()};
}

UdpSocket::UdpSocket() {
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
}

UdpSocket::~UdpSocket() {
  if (fd_ >= 0) ::close(fd_);
}

void UdpSocket::bind(std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw Error(std::string("bind: ") + std::strerror(errno));
}

std::uint16_t UdpSocket::local_port() const {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0)
    throw Error(std::string("getsockname: ") + std::strerror(errno));
  return ntohs(addr.sin_port);
}

void UdpSocket::send_to(std::string_view payload, const Endpoint& dest) const {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = dest.addr;
  addr.sin_port = dest.port;
  ::sendto(fd_, payload.data(), payload.size(), 0,
           reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
}

std::optional<std::pair<std::string, UdpSocket::Endpoint>> UdpSocket::recv_from(
    int timeout_ms) const {
  pollfd pfd{fd_, POLLIN, 0};
  const int rc = ::poll(&pfd, 1, timeout_ms);
  if (rc <= 0) return std::nullopt;

  char buf[2048];
  sockaddr_in src{};
  socklen_t len = sizeof src;
  const ssize_t n = ::recvfrom(fd_, buf, sizeof buf, 0,
                               reinterpret_cast<sockaddr*>(&src), &len);
  if (n < 0) return std::nullopt;
  return std::make_pair(std::string(buf, static_cast<size_t>(n)),
                        Endpoint{src.sin_addr.s_addr, src.sin_port});
}

UdpSocket::Endpoint UdpSocket::loopback(std::uint16_t host_order_port) {
  return Endpoint{htonl(INADDR_LOOPBACK), htons(host_order_port)};
}

LinkServer::LinkServer(std::uint16_t command_port,
                       std::uint16_t telemetry_port,
                       const vehicle::PlantParams& plant)
    : telemetry_port_(telemetry_port), plant_(plant) {
  socket_.bind(command_port);
}

LinkServer::~LinkServer() { stop(); }

void LinkServer::start() {
  if (running_.exchange(true)) return;
  rx_thread_ = std::thread([this] { rx_loop(); });
}

void LinkServer::stop() {
  if (!running_.exchange(false)) return;
  if (rx_thread_.joinable()) rx_thread_.join();
}

vehicle::VelocityCommand LinkServer::current_command() const {
  std::lock_guard lock(mutex_);
  return command_;
}

bool LinkServer::sdk_mode() const {
  std::lock_guard lock(mutex_);
  return sdk_mode_;
}

bool LinkServer::flying() const {
  std::lock_guard lock(mutex_);
  return flying_;
}

void LinkServer::set_telemetry_port(std::uint16_t port) {
  std::lock_guard lock(mutex_);
  telemetry_port_ = port;
}

void LinkServer::rx_loop() {
  while (running_.load()) {
    const auto datagram = socket_.recv_from(50);
    if (!datagram) continue;
    const auto& [payload, sender] = *datagram;

    Response resp{true, ""};
    if (payload.size() > kMaxDatagram) {
      resp = Response{false, "too long"};
    } else {
      try {
        const CommandMessage m = decode_command(payload);
        std::lock_guard lock(mutex_);
        last_sender_ = sender;
        if (std::holds_alternative<EnterSdk>(m)) {
          sdk_mode_ = true;
        } else if (std::holds_alternative<Takeoff>(m)) {
          flying_ = true;
        } else if (std::holds_alternative<Land>(m)) {
          flying_ = false;
          command_ = vehicle::VelocityCommand{};
        } else {
          if (!sdk_mode_) {
            resp = Response{false, "not in sdk mode"};
          } else {
            command_ = velocity_from_rc(std::get<Rc>(m), plant_);
          }
        }
      } catch (const ParseError&) {
        resp = Response{false, "parse"};
      }
    }
    socket_.send_to(encode_response(resp), sender);
  }
}

void LinkServer::publish_state(const vehicle::DroneState& s) {
  std::optional<UdpSocket::Endpoint> dest;
  {
    std::lock_guard lock(mutex_);
    if (s.t_s + 1e-12 < next_telemetry_s_ || !last_sender_) return;
    next_telemetry_s_ = s.t_s + 0.1;
    dest = UdpSocket::Endpoint{last_sender_->addr, htons(telemetry_port_)};
  }
  socket_.send_to(encode_telemetry(telemetry_from_state(s)), *dest);
}

LinkClient::LinkClient(std::uint16_t server_command_port, int timeout_ms)
    : server_(UdpSocket::loopback(server_command_port)),
      timeout_ms_(timeout_ms) {
  command_socket_.bind(0);
}

Response LinkClient::send(const CommandMessage& m) {
  command_socket_.send_to(encode_command(m), server_);
  const auto reply = command_socket_.recv_from(timeout_ms_);
  if (!reply)
    throw TimeoutError("no response after " + std::to_string(timeout_ms_) +
                       " ms");
  return decode_response(reply->first);
}

void LinkClient::open_telemetry(std::uint16_t port) {
  telemetry_socket_.emplace();
  telemetry_socket_->bind(port);
}

std::uint16_t LinkClient::telemetry_port() const {
  if (!telemetry_socket_) throw Error("telemetry socket not open");
  return telemetry_socket_->local_port();
}

std::optional<TelemetryMessage> LinkClient::poll_telemetry(int timeout_ms) {
  if (!telemetry_socket_) throw Error("telemetry socket not open");
  const auto datagram = telemetry_socket_->recv_from(timeout_ms);
  if (!datagram) return std::nullopt;
  return decode_telemetry(datagram->first);
}

void serve_plant(LinkServer& server, vehicle::DroneState state,
                 const vehicle::PlantParams& plant,
                 const std::atomic<bool>& stop) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  while (!stop.load()) {
    const vehicle::VelocityCommand cmd =
        server.flying() ? server.current_command() : vehicle::VelocityCommand{};
    state = vehicle::step(state, cmd, plant);
    server.publish_state(state);

    const auto wall_target =
        t0 + std::chrono::duration_cast<clock::duration>(
                 std::chrono::duration<double>(state.t_s));
    std::this_thread::sleep_until(wall_target);
  }
}

}  // namespace gatesim::link
