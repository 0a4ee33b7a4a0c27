#include "intentloop/realtime.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <sstream>

#include "intentloop/error.hpp"
#include "intentloop/features.hpp"
#include "intentloop/net.hpp"

namespace intentloop {

double smooth(double prev_raw, double curr_raw, bool normalize) {
  const double s = 0.3 * prev_raw + 0.5 * curr_raw;
  return normalize ? s / 0.8 : s;
}

std::string_view to_string(GatePhase phase) {
  switch (phase) {
    case GatePhase::disarmed: return "DISARMED";
    case GatePhase::armed: return "ARMED";
    case GatePhase::pulsing: return "PULSING";
    case GatePhase::refractory: return "REFRACTORY";
  }
  return "?";
}

namespace {
// Stream timestamps travel as integer microseconds.
constexpr double kClockSlack_s = 0.5e-6;
}  // namespace

GateResult gate_step(const GateState& state, std::span<const Marker> events,
                     const std::optional<Prediction>& prediction, double now, double threshold,
                     const GateConfig& config) {
  GateResult r{state, std::nullopt, {}};
  GateState& s = r.state;

  auto protocol = [&](std::string msg) {
    r.protocol_errors.push_back(std::move(msg));
    s.phase = GatePhase::disarmed;
    s.end_latched = false;
  };
  auto expire = [&](double t) {
    if (s.phase == GatePhase::pulsing && t >= s.pulse_started + config.pulse_duration_s - 1e-9) {
      s.phase = s.end_latched ? GatePhase::disarmed : GatePhase::refractory;
      s.end_latched = false;
    }
  };
  auto end_trial = [&] {
    if (s.phase == GatePhase::pulsing) {
      s.end_latched = true;
    } else {
      s.phase = GatePhase::disarmed;
    }
  };

  for (const Marker& e : events) {
    if (e.time_s < s.last_time - kClockSlack_s) {
      protocol("event '" + std::string(to_string(e.kind)) + "' at " + format_double(e.time_s) +
               " s precedes " + format_double(s.last_time) + " s");
      continue;
    }
    s.last_time = std::max(s.last_time, e.time_s);
    expire(e.time_s);
    switch (e.kind) {
      case MarkerKind::fixation_offset:
        ++s.trial;
        if (s.phase == GatePhase::disarmed) {
          s.phase = GatePhase::armed;
          s.armed_since = e.time_s;
        } else {
          protocol("fixation offset while " + std::string(to_string(s.phase)));
        }
        break;
      case MarkerKind::tap:
      case MarkerKind::trial_end:
      case MarkerKind::fixation_onset:
        end_trial();
        break;
      default:
        break;
    }
  }

  if (now < s.last_time - kClockSlack_s) {
    protocol("tick at " + format_double(now) + " s precedes " + format_double(s.last_time) + " s");
    return r;
  }
  s.last_time = std::max(s.last_time, now);
  expire(now);

  if (prediction && s.phase == GatePhase::armed && prediction->smoothed > threshold &&
      prediction->predicted_class == 1) {
    s.phase = GatePhase::pulsing;
    s.pulse_started = now;
    s.end_latched = false;
    r.pulse = PulseCommand{now, config.pulse_duration_s, s.trial};
  }
  return r;
}

// ---------------------------------------------------------------------------

DecisionEngine::DecisionEngine(const IntentModel& model,
                               const std::vector<std::string>& source_channels,
                               const EngineConfig& config)
    : model_(model),
      config_(config),
      ring_(model.channels.size(),
            std::max<std::size_t>(2 * window_samples(config.window_s * 1000.0, model.filter.rate), 1)),
      window_(window_samples(config.window_s * 1000.0, model.filter.rate)) {
  if (model_.channels.empty()) fail(ErrorKind::parameter, "model has no channels");
  if (model_.lda.dim() != model_.channels.size()) {
    fail(ErrorKind::parameter, "model channel count does not match its discriminant");
  }
  if (!(config_.tick_s > 0.0)) fail(ErrorKind::parameter, "tick interval must be positive");
  for (const auto& label : model_.channels) {
    const auto pos = std::find(source_channels.begin(), source_channels.end(), label);
    if (pos == source_channels.end()) {
      fail(ErrorKind::parameter, "stream lacks model channel '" + label + "'");
    }
    source_index_.push_back(static_cast<std::size_t>(pos - source_channels.begin()));
    states_.push_back(model_.filter.initial_state());
  }
  scratch_.resize(model_.channels.size());
}

void DecisionEngine::push(std::span<const float> frame) {
  for (std::size_t c = 0; c < source_index_.size(); ++c) {
    if (source_index_[c] >= frame.size()) fail(ErrorKind::format, "frame too short");
    scratch_[c] = filter_step(model_.filter, states_[c], static_cast<double>(frame[source_index_[c]]));
  }
  ring_.push(scratch_);
}

void DecisionEngine::push(std::span<const double> frame) {
  for (std::size_t c = 0; c < source_index_.size(); ++c) {
    if (source_index_[c] >= frame.size()) fail(ErrorKind::format, "frame too short");
    scratch_[c] = filter_step(model_.filter, states_[c], frame[source_index_[c]]);
  }
  ring_.push(scratch_);
}

Vector DecisionEngine::features() const { return slope_rows(snapshot(), model_.filter.rate); }

Prediction DecisionEngine::predict(double time_s) { return predict_window(snapshot(), time_s); }

Prediction DecisionEngine::predict_window(const Matrix& window, double time_s, Vector* features) {
  const Vector f = slope_rows(window, model_.filter.rate);
  Prediction p;
  p.time_s = time_s;
  p.raw = predict_proba(model_.lda, f);
  p.predicted_class = predict_class(model_.lda, f);
  p.smoothed = smooth(prev_raw_, p.raw, config_.normalize_smoothing);
  prev_raw_ = p.raw;
  if (features) *features = f;
  return p;
}

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t to_us(double t_s) { return std::llround(t_s * 1e6); }

double elapsed_ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace

RunResult replay(const IntentModel& model, FrameSource& source, const std::vector<Marker>& events,
                 const EngineConfig& config, Transport* transport) {
  if (std::abs(source.rate() - model.filter.rate) > 1e-9) {
    fail(ErrorKind::parameter, "stream rate " + format_double(source.rate()) +
                                   " Hz differs from the model's " +
                                   format_double(model.filter.rate) + " Hz");
  }
  DecisionEngine engine(model, source.channels(), config);
  MockTransport fallback;
  Transport& out = transport ? *transport : fallback;

  std::vector<Marker> queue = events;
  std::stable_sort(queue.begin(), queue.end(),
                   [](const Marker& a, const Marker& b) { return a.time_s < b.time_s; });
  std::size_t next_event = 0;

  const std::int64_t tick_us = to_us(config.tick_s);
  const std::int64_t period_us = to_us(1.0 / source.rate());
  RunResult result;
  GateState gate;
  std::int64_t start_us = 0;
  std::int64_t last_us = 0;
  std::size_t j = 1;

  auto deadline = [&](std::size_t idx) { return start_us + static_cast<std::int64_t>(idx) * tick_us; };

  auto tick = [&](std::size_t idx) {
    const std::int64_t d_us = deadline(idx);
    const double now = static_cast<double>(d_us) / 1e6;
    std::vector<Marker> due;
    while (next_event < queue.size() && to_us(queue[next_event].time_s) < d_us) {
      due.push_back(queue[next_event++]);
    }
    TickRecord rec;
    rec.index = idx;
    rec.deadline_s = now;
    rec.samples = engine.total_written();
    std::optional<Prediction> pred;
    if (engine.ready()) {
      const auto t0 = Clock::now();
      pred = engine.predict_window(engine.snapshot(), now, &rec.features);
      pred->latency_ms = elapsed_ms(t0, Clock::now());
      rec.prediction = *pred;
    } else {
      rec.skipped = true;
      rec.prediction.time_s = now;
      ++result.skipped;
    }
    auto step = gate_step(gate, due, pred, now, model.threshold, config.gate);
    gate = step.state;
    for (auto& e : step.protocol_errors) result.protocol_errors.push_back(std::move(e));
    if (step.pulse) {
      rec.pulsed = true;
      PulseLogEntry entry{*step.pulse, false, {}};
      try {
        actuator_send(out, *step.pulse);
        entry.ok = true;
      } catch (const Error& e) {
        entry.error = e.what();
      }
      result.pulses.push_back(std::move(entry));
    }
    rec.phase = gate.phase;
    result.ticks.push_back(std::move(rec));
  };

  bool first = true;
  while (auto frame = source.next()) {
    const auto t_us = static_cast<std::int64_t>(frame->t_us);
    if (first) {
      start_us = t_us;
      first = false;
    } else if (t_us < last_us) {
      fail(ErrorKind::protocol, "frame timestamps went backwards at seq " + std::to_string(frame->seq));
    }
    while (t_us >= deadline(j)) tick(j++);
    engine.push(std::span<const float>(frame->samples));
    last_us = t_us;
    ++result.frames;
  }
  if (!first) {
    const std::int64_t end_us = last_us + period_us;
    while (deadline(j) <= end_us) tick(j++);
  }
  return result;
}

// ---------------------------------------------------------------------------

MarkerFeed::MarkerFeed(std::vector<Marker> markers) : markers_(std::move(markers)) {
  std::stable_sort(markers_.begin(), markers_.end(),
                   [](const Marker& a, const Marker& b) { return a.time_s < b.time_s; });
}

std::vector<Marker> MarkerFeed::due(double stream_time_s) {
  std::vector<Marker> out;
  while (next_ < markers_.size() && markers_[next_].time_s < stream_time_s) {
    out.push_back(markers_[next_++]);
  }
  return out;
}

TcpEventFeed::TcpEventFeed(const std::string& host, int port) : fd_(net::connect_tcp(host, port)) {
  thread_ = std::thread([this] { run(); });
}

TcpEventFeed::~TcpEventFeed() {
  stopping_ = true;
  if (thread_.joinable()) thread_.join();
  if (fd_ >= 0) ::close(fd_);
}

void TcpEventFeed::run() {
  std::string pending;
  while (!stopping_) {
    bool closed = false;
    auto line = net::read_line(fd_, pending, 50, &closed);
    if (closed) return;
    if (!line || line->empty() || (*line)[0] == '#') continue;
    try {
      Marker m = parse_marker_line(*line);
      std::lock_guard lock(mu_);
      pending_.push_back(std::move(m));
    } catch (const Error&) {
      // Malformed lines are dropped; the gate never sees them.
    }
  }
}

std::vector<Marker> TcpEventFeed::due(double stream_time_s) {
  std::lock_guard lock(mu_);
  std::vector<Marker> out;
  auto split = std::stable_partition(pending_.begin(), pending_.end(),
                                     [&](const Marker& m) { return m.time_s < stream_time_s; });
  out.assign(pending_.begin(), split);
  pending_.erase(pending_.begin(), split);
  std::stable_sort(out.begin(), out.end(),
                   [](const Marker& a, const Marker& b) { return a.time_s < b.time_s; });
  return out;
}

// ---------------------------------------------------------------------------

RunResult run_live(const IntentModel& model, FrameSource& source, EventFeed& events,
                   Transport& transport, const LiveConfig& config) {
  if (std::abs(source.rate() - model.filter.rate) > 1e-9) {
    fail(ErrorKind::parameter, "stream rate differs from the model's");
  }
  DecisionEngine engine(model, source.channels(), config.engine);
  const std::int64_t period_us = to_us(1.0 / source.rate());

  std::mutex mu;
  bool done = false;
  bool stop = false;
  std::size_t frames = 0;
  std::int64_t latest_us = 0;
  Clock::time_point latest_arrival{};
  std::string acquisition_error;

  std::thread acquisition([&] {
    try {
      while (auto frame = source.next()) {
        const auto arrival = Clock::now();
        std::lock_guard lock(mu);
        engine.push(std::span<const float>(frame->samples));
        latest_us = static_cast<std::int64_t>(frame->t_us);
        latest_arrival = arrival;
        ++frames;
        if (stop) break;
      }
    } catch (const std::exception& e) {
      std::lock_guard lock(mu);
      acquisition_error = e.what();
    }
    std::lock_guard lock(mu);
    done = true;
  });

  ActuatorWorker worker(transport, config.actuator_queue);
  RunResult result;
  std::vector<PulseLogEntry> dropped;
  GateState gate;
  const auto tick = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(config.engine.tick_s));
  const auto start = Clock::now();

  for (std::size_t j = 1;; ++j) {
    const auto deadline = start + static_cast<Clock::rep>(j) * tick;
    std::this_thread::sleep_until(deadline);

    Matrix window;
    std::size_t samples = 0;
    double now = 0.0;
    bool finished = false;
    Clock::time_point arrival;
    {
      std::lock_guard lock(mu);
      samples = engine.total_written();
      if (engine.ready()) window = engine.snapshot();
      now = static_cast<double>(latest_us + (samples > 0 ? period_us : 0)) / 1e6;
      arrival = latest_arrival;
      finished = done;
    }

    TickRecord rec;
    rec.index = j;
    rec.deadline_s = now;
    rec.samples = samples;
    std::optional<Prediction> pred;
    if (window.size() > 0) {
      pred = engine.predict_window(window, now, &rec.features);
      pred->latency_ms = std::max(0.0, elapsed_ms(arrival, Clock::now()));
      rec.prediction = *pred;
    } else {
      rec.skipped = true;
      rec.prediction.time_s = now;
      ++result.skipped;
    }
    const auto due = events.due(now);
    auto step = gate_step(gate, due, pred, now, model.threshold, config.engine.gate);
    gate = step.state;
    for (auto& e : step.protocol_errors) result.protocol_errors.push_back(std::move(e));
    if (step.pulse) {
      rec.pulsed = true;
      if (!worker.submit(*step.pulse)) dropped.push_back({*step.pulse, false, "actuator queue full"});
    }
    rec.phase = gate.phase;
    result.ticks.push_back(std::move(rec));

    const bool timed_out =
        config.max_seconds > 0.0 &&
        std::chrono::duration<double>(Clock::now() - start).count() >= config.max_seconds;
    if (finished || timed_out) break;
  }

  {
    std::lock_guard lock(mu);
    stop = true;
  }
  acquisition.join();
  worker.stop();
  result.pulses = worker.log();
  result.pulses.insert(result.pulses.end(), dropped.begin(), dropped.end());
  result.frames = frames;
  if (!acquisition_error.empty()) fail(ErrorKind::io, "acquisition failed: " + acquisition_error);
  return result;
}

// ---------------------------------------------------------------------------

void write_predictions(const std::filesystem::path& path, const RunResult& result,
                       const Provenance& provenance) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  write_provenance(out, provenance);
  out << "tick\tdeadline_s\tsamples\tskipped\traw\tsmoothed\tclass\tphase\tpulsed\tlatency_ms\n";
  for (const auto& t : result.ticks) {
    out << t.index << '\t' << format_double(t.deadline_s) << '\t' << t.samples << '\t'
        << (t.skipped ? 1 : 0) << '\t';
    if (t.skipped) {
      out << "\t\t\t";
    } else {
      out << format_double(t.prediction.raw) << '\t' << format_double(t.prediction.smoothed) << '\t'
          << t.prediction.predicted_class << '\t';
    }
    out << to_string(t.phase) << '\t' << (t.pulsed ? 1 : 0) << '\t';
    if (!t.skipped) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.3f", t.prediction.latency_ms);
      out << buf;
    }
    out << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

void write_pulses(const std::filesystem::path& path, const std::vector<PulseLogEntry>& pulses,
                  const Provenance& provenance) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  write_provenance(out, provenance);
  out << "issue_time_s\tduration_ms\ttrial\tok\terror\n";
  for (const auto& p : pulses) {
    out << format_double(p.command.issue_time_s) << '\t'
        << std::lround(p.command.duration_s * 1000.0) << '\t' << p.command.trial << '\t'
        << (p.ok ? 1 : 0) << '\t' << p.error << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

std::vector<PulseLogEntry> read_pulses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::vector<PulseLogEntry> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() < 4) fail(ErrorKind::format, "short pulse log line: " + line);
    PulseLogEntry e;
    e.command.issue_time_s = parse_double(cols[0]);
    e.command.duration_s = parse_double(cols[1]) / 1000.0;
    e.command.trial = std::stoi(cols[2]);
    e.ok = cols[3] == "1";
    if (cols.size() > 4) e.error = cols[4];
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace intentloop
