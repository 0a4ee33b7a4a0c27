#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "intentloop/actuator.hpp"
#include "intentloop/dsp.hpp"
#include "intentloop/model.hpp"
#include "intentloop/session_io.hpp"
#include "intentloop/stream.hpp"

namespace intentloop {

struct Prediction {
  double time_s = 0.0;
  double raw = 0.0;
  double smoothed = 0.0;
  int predicted_class = 0;  ///< 1 = pre-movement
  double latency_ms = 0.0;
};

/// 0.3 * prev + 0.5 * curr, optionally divided by 0.8.
double smooth(double prev_raw, double curr_raw, bool normalize = false);

enum class GatePhase { disarmed, armed, pulsing, refractory };

std::string_view to_string(GatePhase phase);

struct GateConfig {
  double pulse_duration_s = 0.5;
};

struct GateState {
  GatePhase phase = GatePhase::disarmed;
  double armed_since = 0.0;
  double pulse_started = 0.0;
  int trial = -1;  ///< incremented on every fixation-cross offset
  /// A tap or trial end arrived while pulsing; the pulse completes, then the
  /// gate disarms instead of entering the refractory phase.
  bool end_latched = false;
  double last_time = -1e300;
};

struct GateResult {
  GateState state;
  std::optional<PulseCommand> pulse;
  std::vector<std::string> protocol_errors;
};

/// Advances the gate to `now`: applies `events` (already due, in order),
/// expires a finished pulse, then offers `prediction`. A pulse is emitted only
/// from ARMED. Out-of-order timestamps, or a fixation offset while not
/// disarmed, force DISARMED and are reported as protocol errors.
GateResult gate_step(const GateState& state, std::span<const Marker> events,
                     const std::optional<Prediction>& prediction, double now, double threshold,
                     const GateConfig& config = {});

struct EngineConfig {
  double tick_s = 0.1;
  double window_s = 1.0;
  bool normalize_smoothing = false;
  GateConfig gate;
};

/// Causal per-channel filtering into a ring buffer plus the per-tick
/// classifier. Not thread-safe; the live runner serializes access.
class DecisionEngine {
 public:
  /// `source_channels` is the channel layout of incoming frames; every model
  /// channel must be among them.
  DecisionEngine(const IntentModel& model, const std::vector<std::string>& source_channels,
                 const EngineConfig& config = {});

  void push(std::span<const float> frame);
  void push(std::span<const double> frame);

  std::size_t total_written() const { return ring_.total_written(); }
  bool ready() const { return ring_.total_written() >= window_; }

  /// Filtered last window over the model channels; throws not-ready.
  Matrix snapshot() const { return ring_.latest(window_); }

  /// Slope features of the current window; throws not-ready.
  Vector features() const;

  /// Classifies the current window and updates the smoothing history.
  Prediction predict(double time_s);
  /// Classification of an externally captured window.
  Prediction predict_window(const Matrix& window, double time_s, Vector* features = nullptr);

  const IntentModel& model() const { return model_; }
  const EngineConfig& config() const { return config_; }

 private:
  IntentModel model_;
  EngineConfig config_;
  std::vector<std::size_t> source_index_;
  std::vector<FilterState> states_;
  RingBuffer ring_;
  std::size_t window_;
  double prev_raw_ = 0.0;
  std::vector<double> scratch_;
};

struct TickRecord {
  std::size_t index = 0;      ///< j in deadline = start + j * tick
  double deadline_s = 0.0;
  std::size_t samples = 0;    ///< samples consumed when the tick ran
  bool skipped = false;       ///< buffer under-filled
  Prediction prediction;
  Vector features;
  GatePhase phase = GatePhase::disarmed;  ///< after the gate step
  bool pulsed = false;
};

struct RunResult {
  std::vector<TickRecord> ticks;
  std::size_t skipped = 0;
  std::vector<PulseLogEntry> pulses;
  std::vector<std::string> protocol_errors;
  std::size_t frames = 0;

  std::size_t predictions() const { return ticks.size() - skipped; }
};

/// Deterministic run driven by stream time: the tick with deadline D sees the
/// samples stamped before D. Deadlines are start + j * tick on an integer
/// microsecond grid; deadlines up to the end of the stream are flushed.
/// Pulses go to `transport` synchronously when given.
RunResult replay(const IntentModel& model, FrameSource& source, const std::vector<Marker>& events,
                 const EngineConfig& config = {}, Transport* transport = nullptr);

/// Pending events whose timestamp precedes a given stream time.
class EventFeed {
 public:
  virtual ~EventFeed() = default;
  virtual std::vector<Marker> due(double stream_time_s) = 0;
};

class MarkerFeed final : public EventFeed {
 public:
  explicit MarkerFeed(std::vector<Marker> markers);
  std::vector<Marker> due(double stream_time_s) override;

 private:
  std::vector<Marker> markers_;
  std::size_t next_ = 0;
};

/// Marker lines read from a TCP connection on a background thread.
class TcpEventFeed final : public EventFeed {
 public:
  TcpEventFeed(const std::string& host, int port);
  ~TcpEventFeed() override;
  TcpEventFeed(const TcpEventFeed&) = delete;
  TcpEventFeed& operator=(const TcpEventFeed&) = delete;

  std::vector<Marker> due(double stream_time_s) override;

 private:
  void run();

  int fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::vector<Marker> pending_;
  std::thread thread_;
};

struct LiveConfig {
  EngineConfig engine;
  std::size_t actuator_queue = 8;
  /// Stop after this much wall time; 0 runs until the source ends.
  double max_seconds = 0.0;
};

/// Three threads: acquisition (frames into the engine), a 10 Hz ticker on
/// absolute wall-clock deadlines that owns the gate, and the actuator worker.
RunResult run_live(const IntentModel& model, FrameSource& source, EventFeed& events,
                   Transport& transport, const LiveConfig& config = {});

/// `tick  deadline_s  samples  skipped  raw  smoothed  class  phase  pulsed  latency_ms`
void write_predictions(const std::filesystem::path& path, const RunResult& result,
                       const Provenance& provenance = {});
/// `issue_time_s  duration_ms  trial  ok  error`
void write_pulses(const std::filesystem::path& path, const std::vector<PulseLogEntry>& pulses,
                  const Provenance& provenance = {});
std::vector<PulseLogEntry> read_pulses(const std::filesystem::path& path);

}  // namespace intentloop
