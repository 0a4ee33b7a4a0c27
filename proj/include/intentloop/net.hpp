#pragma once

#include <cstddef>
#include <optional>
#include <string>

// Thin POSIX socket helpers shared by the stream and actuator transports.
namespace intentloop::net {

/// Connected TCP socket; throws an i/o error on failure.
int connect_tcp(const std::string& host, int port);

/// Listening socket on 127.0.0.1; `port` 0 picks a free port written to `bound`.
int listen_tcp(int port, int* bound);

/// Accepted client fd, or -1 after `timeout_ms` without a connection.
int accept_with_timeout(int listen_fd, int timeout_ms);

bool write_all(int fd, const void* data, std::size_t size);

/// Reads exactly `size` bytes; false on EOF or error.
bool read_exact(int fd, void* data, std::size_t size);

/// Next '\n'-terminated line (newline and '\r' stripped). `pending` carries
/// bytes between calls. Returns nullopt on timeout or close; `closed` reports
/// which.
std::optional<std::string> read_line(int fd, std::string& pending, int timeout_ms,
                                     bool* closed = nullptr);

/// "host:port" split; throws a usage error on malformed input.
std::pair<std::string, int> parse_host_port(const std::string& text);

}  // namespace intentloop::net
