#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace intentloop {

struct PulseCommand {
  double issue_time_s = 0.0;
  double duration_s = 0.5;
  int trial = -1;
};

/// Line-oriented byte stream to the stimulator relay.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Sends one line (without newline) and returns the reply line. `stamp_s`
  /// is the stream time of the command, for transports that log it.
  virtual std::string exchange(std::string_view line, double stamp_s) = 0;
  virtual bool is_open() const = 0;
  virtual void close() = 0;
};

struct MockPulse {
  double time_s = 0.0;
  int duration_ms = 0;
};

/// In-memory transport that acknowledges every command and logs pulses.
class MockTransport final : public Transport {
 public:
  std::string exchange(std::string_view line, double stamp_s) override;
  bool is_open() const override { return open_; }
  void close() override { open_ = false; }

  std::vector<MockPulse> pulses() const;
  std::vector<std::string> lines() const;

 private:
  mutable std::mutex mu_;
  bool open_ = true;
  std::vector<MockPulse> pulses_;
  std::vector<std::string> lines_;
};

/// Client side of the `PULSE <ms>\n` -> `OK\n` protocol over TCP.
class TcpTransport final : public Transport {
 public:
  TcpTransport(const std::string& host, int port);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  std::string exchange(std::string_view line, double stamp_s) override;
  bool is_open() const override { return fd_ >= 0; }
  void close() override;

 private:
  int fd_ = -1;
  std::string pending_;
};

/// Writes `PULSE <ms>` and expects `OK`. Throws an actuator error on a closed
/// transport or a bad reply.
std::string actuator_send(Transport& transport, const PulseCommand& command);

struct PulseLogEntry {
  PulseCommand command;
  bool ok = false;
  std::string error;
};

/// Consumes pulse commands from a bounded queue on its own thread so the
/// decision ticker never waits on the transport.
class ActuatorWorker {
 public:
  ActuatorWorker(Transport& transport, std::size_t capacity = 8);
  ~ActuatorWorker();
  ActuatorWorker(const ActuatorWorker&) = delete;
  ActuatorWorker& operator=(const ActuatorWorker&) = delete;

  /// Non-blocking; false when the queue is full.
  bool submit(const PulseCommand& command);
  /// Waits for queued commands, then stops the thread.
  void stop();
  std::vector<PulseLogEntry> log() const;

 private:
  void run();

  Transport& transport_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<PulseCommand> queue_;
  std::vector<PulseLogEntry> log_;
  bool stopping_ = false;
  std::thread thread_;
};

/// `PULSE <ms>` server used as a stand-in relay: replies `OK` to each command
/// and records what it received. Listens on 127.0.0.1.
class RelayServer {
 public:
  explicit RelayServer(int port = 0);
  ~RelayServer();
  RelayServer(const RelayServer&) = delete;
  RelayServer& operator=(const RelayServer&) = delete;

  int port() const { return port_; }
  std::vector<std::string> received() const;
  void stop();

 private:
  void run();

  int listen_fd_ = -1;
  int port_ = 0;
  mutable std::mutex mu_;
  std::vector<std::string> received_;
  bool stopping_ = false;
  std::thread thread_;
};

}  // namespace intentloop
