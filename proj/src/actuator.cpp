#include "intentloop/actuator.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include "intentloop/error.hpp"
#include "intentloop/net.hpp"

namespace intentloop {

std::string MockTransport::exchange(std::string_view line, double stamp_s) {
  std::lock_guard lock(mu_);
  if (!open_) fail(ErrorKind::actuator, "mock transport is closed");
  lines_.emplace_back(line);
  constexpr std::string_view prefix = "PULSE ";
  if (line.starts_with(prefix)) {
    pulses_.push_back({stamp_s, std::stoi(std::string(line.substr(prefix.size())))});
  }
  return "OK";
}

std::vector<MockPulse> MockTransport::pulses() const {
  std::lock_guard lock(mu_);
  return pulses_;
}

std::vector<std::string> MockTransport::lines() const {
  std::lock_guard lock(mu_);
  return lines_;
}

TcpTransport::TcpTransport(const std::string& host, int port) : fd_(net::connect_tcp(host, port)) {}

TcpTransport::~TcpTransport() { close(); }

void TcpTransport::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::string TcpTransport::exchange(std::string_view line, double /*stamp_s*/) {
  if (fd_ < 0) fail(ErrorKind::actuator, "transport is closed");
  std::string out(line);
  out += '\n';
  if (!net::write_all(fd_, out.data(), out.size())) {
    close();
    fail(ErrorKind::actuator, "write to relay failed");
  }
  auto reply = net::read_line(fd_, pending_, 1000);
  if (!reply) {
    close();
    fail(ErrorKind::actuator, "relay did not acknowledge");
  }
  return *reply;
}

std::string actuator_send(Transport& transport, const PulseCommand& command) {
  if (!transport.is_open()) fail(ErrorKind::actuator, "transport is closed");
  const auto ms = static_cast<int>(std::lround(command.duration_s * 1000.0));
  const std::string reply = transport.exchange("PULSE " + std::to_string(ms), command.issue_time_s);
  if (reply != "OK") fail(ErrorKind::actuator, "unexpected relay reply '" + reply + "'");
  return reply;
}

ActuatorWorker::ActuatorWorker(Transport& transport, std::size_t capacity)
    : transport_(transport), capacity_(capacity), thread_([this] { run(); }) {}

ActuatorWorker::~ActuatorWorker() { stop(); }

bool ActuatorWorker::submit(const PulseCommand& command) {
  {
    std::lock_guard lock(mu_);
    if (stopping_ || queue_.size() >= capacity_) return false;
    queue_.push_back(command);
  }
  cv_.notify_one();
  return true;
}

void ActuatorWorker::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

std::vector<PulseLogEntry> ActuatorWorker::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

void ActuatorWorker::run() {
  for (;;) {
    PulseCommand cmd;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      cmd = queue_.front();
      queue_.pop_front();
    }
    PulseLogEntry entry{cmd, false, {}};
    try {
      actuator_send(transport_, cmd);
      entry.ok = true;
    } catch (const Error& e) {
      entry.error = e.what();
    }
    std::lock_guard lock(mu_);
    log_.push_back(std::move(entry));
  }
}

RelayServer::RelayServer(int port) {
  listen_fd_ = net::listen_tcp(port, &port_);
  thread_ = std::thread([this] { run(); });
}

RelayServer::~RelayServer() { stop(); }

void RelayServer::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    stopping_ = true;
  }
  if (thread_.joinable()) thread_.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
}

std::vector<std::string> RelayServer::received() const {
  std::lock_guard lock(mu_);
  return received_;
}

void RelayServer::run() {
  auto stopping = [this] {
    std::lock_guard lock(mu_);
    return stopping_;
  };
  while (!stopping()) {
    const int client = net::accept_with_timeout(listen_fd_, 50);
    if (client < 0) continue;
    std::string pending;
    while (!stopping()) {
      bool closed = false;
      auto line = net::read_line(client, pending, 50, &closed);
      if (closed) break;
      if (!line) continue;
      {
        std::lock_guard lock(mu_);
        received_.push_back(*line);
      }
      const std::string reply = line->starts_with("PULSE ") ? "OK\n" : "ERR\n";
      if (!net::write_all(client, reply.data(), reply.size())) break;
    }
    ::close(client);
  }
}

}  // namespace intentloop
