#include "intentloop/stream.hpp"

#include <unistd.h>

#include <cmath>
#include <cstring>

#include "intentloop/error.hpp"
#include "intentloop/net.hpp"

namespace intentloop {

namespace {

template <typename T>
void put(std::vector<unsigned char>& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get(const unsigned char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

std::uint64_t to_us(double t_s) { return static_cast<std::uint64_t>(std::llround(t_s * 1e6)); }

StreamFrame frame_at(const Recording& rec, std::size_t i) {
  StreamFrame f;
  f.seq = static_cast<std::uint32_t>(i);
  f.t_us = to_us(static_cast<double>(i) / rec.rate);
  f.samples.resize(rec.channels.size());
  for (std::size_t c = 0; c < f.samples.size(); ++c) {
    f.samples[c] = static_cast<float>(rec.data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)));
  }
  return f;
}

}  // namespace

std::vector<unsigned char> encode_frame(const StreamFrame& frame) {
  if (frame.samples.size() > UINT16_MAX) fail(ErrorKind::parameter, "too many channels for a frame");
  std::vector<unsigned char> out;
  out.reserve(kFrameHeaderBytes + 4 * frame.samples.size());
  out.push_back(kFrameMagic[0]);
  out.push_back(kFrameMagic[1]);
  put<std::uint32_t>(out, frame.seq);
  put<std::uint64_t>(out, frame.t_us);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(frame.samples.size()));
  for (float v : frame.samples) put<float>(out, v);
  return out;
}

std::optional<StreamFrame> decode_frame(std::span<const unsigned char> bytes, std::size_t* consumed) {
  if (bytes.size() < kFrameHeaderBytes) return std::nullopt;
  if (bytes[0] != kFrameMagic[0] || bytes[1] != kFrameMagic[1]) {
    fail(ErrorKind::format, "bad stream frame magic");
  }
  const auto n_ch = get<std::uint16_t>(bytes.data() + 14);
  const std::size_t total = kFrameHeaderBytes + 4 * static_cast<std::size_t>(n_ch);
  if (bytes.size() < total) return std::nullopt;
  StreamFrame f;
  f.seq = get<std::uint32_t>(bytes.data() + 2);
  f.t_us = get<std::uint64_t>(bytes.data() + 6);
  f.samples.resize(n_ch);
  if (n_ch > 0) std::memcpy(f.samples.data(), bytes.data() + kFrameHeaderBytes, 4 * n_ch);
  if (consumed) *consumed = total;
  return f;
}

RecordingSource::RecordingSource(Recording recording, bool paced)
    : recording_(std::move(recording)), paced_(paced) {}

std::optional<StreamFrame> RecordingSource::next() {
  if (index_ >= recording_.samples()) return std::nullopt;
  StreamFrame f = frame_at(recording_, index_++);
  if (paced_) {
    const auto now = std::chrono::steady_clock::now();
    if (!start_) start_ = now;
    std::this_thread::sleep_until(*start_ + std::chrono::microseconds(f.t_us));
  }
  return f;
}

TcpFrameSource::TcpFrameSource(const std::string& host, int port, std::vector<std::string> channels,
                               double rate)
    : fd_(net::connect_tcp(host, port)), channels_(std::move(channels)), rate_(rate) {}

TcpFrameSource::~TcpFrameSource() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<StreamFrame> TcpFrameSource::next() {
  if (fd_ < 0) return std::nullopt;
  unsigned char header[kFrameHeaderBytes];
  if (!net::read_exact(fd_, header, sizeof(header))) return std::nullopt;
  const auto n_ch = get<std::uint16_t>(header + 14);
  std::vector<unsigned char> buf(header, header + sizeof(header));
  buf.resize(kFrameHeaderBytes + 4 * static_cast<std::size_t>(n_ch));
  if (!net::read_exact(fd_, buf.data() + kFrameHeaderBytes, buf.size() - kFrameHeaderBytes)) {
    return std::nullopt;
  }
  auto frame = decode_frame(buf);
  if (frame && frame->samples.size() != channels_.size()) {
    fail(ErrorKind::format, "frame carries " + std::to_string(frame->samples.size()) +
                                " channels, expected " + std::to_string(channels_.size()));
  }
  return frame;
}

FrameServer::FrameServer(Recording recording, int port, bool paced)
    : recording_(std::move(recording)), paced_(paced) {
  listen_fd_ = net::listen_tcp(port, &port_);
  thread_ = std::thread([this] { run(); });
}

FrameServer::~FrameServer() {
  wait();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void FrameServer::wait() {
  if (thread_.joinable()) thread_.join();
}

void FrameServer::run() {
  const int client = net::accept_with_timeout(listen_fd_, 10000);
  if (client < 0) return;
  RecordingSource source(recording_, paced_);
  while (auto frame = source.next()) {
    const auto bytes = encode_frame(*frame);
    if (!net::write_all(client, bytes.data(), bytes.size())) break;
  }
  ::close(client);
}

}  // namespace intentloop
