#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "intentloop/dsp.hpp"

namespace intentloop {

/// Wire frame, little-endian:
///   magic(2) = 'I''L' | seq(4) | t_us(8) | n_ch(2) | n_ch x f32
struct StreamFrame {
  std::uint32_t seq = 0;
  std::uint64_t t_us = 0;
  std::vector<float> samples;

  double time_s() const { return static_cast<double>(t_us) / 1e6; }
};

inline constexpr unsigned char kFrameMagic[2] = {'I', 'L'};
inline constexpr std::size_t kFrameHeaderBytes = 16;

std::vector<unsigned char> encode_frame(const StreamFrame& frame);
/// Decodes one frame from the front of `bytes`. Returns nullopt when more bytes
/// are needed; throws a format error on a bad magic. `consumed` gets the frame
/// length.
std::optional<StreamFrame> decode_frame(std::span<const unsigned char> bytes,
                                        std::size_t* consumed = nullptr);

/// A frame plus its stream-clock timestamp in seconds.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// Blocks until the next frame; nullopt at end of stream.
  virtual std::optional<StreamFrame> next() = 0;
  virtual double rate() const = 0;
  virtual const std::vector<std::string>& channels() const = 0;
};

/// Frames from an in-memory recording. With pacing, each frame is released at
/// its timestamp relative to the first call.
class RecordingSource final : public FrameSource {
 public:
  RecordingSource(Recording recording, bool paced = false);

  std::optional<StreamFrame> next() override;
  double rate() const override { return recording_.rate; }
  const std::vector<std::string>& channels() const override { return recording_.channels; }
  const Recording& recording() const { return recording_; }

 private:
  Recording recording_;
  bool paced_;
  std::size_t index_ = 0;
  std::optional<std::chrono::steady_clock::time_point> start_;
};

/// Frames read from a TCP connection. The channel layout and rate are not on
/// the wire and must be supplied.
class TcpFrameSource final : public FrameSource {
 public:
  TcpFrameSource(const std::string& host, int port, std::vector<std::string> channels,
                 double rate);
  ~TcpFrameSource() override;
  TcpFrameSource(const TcpFrameSource&) = delete;
  TcpFrameSource& operator=(const TcpFrameSource&) = delete;

  std::optional<StreamFrame> next() override;
  double rate() const override { return rate_; }
  const std::vector<std::string>& channels() const override { return channels_; }

 private:
  int fd_ = -1;
  std::vector<std::string> channels_;
  double rate_;
};

/// Serves a recording as a frame stream to the first client on 127.0.0.1,
/// optionally paced in real time. Used by the `serve` tool and tests.
class FrameServer {
 public:
  FrameServer(Recording recording, int port = 0, bool paced = false);
  ~FrameServer();
  FrameServer(const FrameServer&) = delete;
  FrameServer& operator=(const FrameServer&) = delete;

  int port() const { return port_; }
  /// Blocks until the stream has been sent (or the client left).
  void wait();

 private:
  void run();

  Recording recording_;
  bool paced_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace intentloop
