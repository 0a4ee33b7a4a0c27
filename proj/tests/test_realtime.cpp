#include <doctest.h>

#include <chrono>
#include <cmath>

#include "gate_property.hpp"
#include "helpers.hpp"
#include "intentloop/error.hpp"
#include "intentloop/features.hpp"
#include "intentloop/pipeline.hpp"
#include "intentloop/realtime.hpp"
#include "intentloop/synth.hpp"

using namespace intentloop;

namespace {

struct Fixture {
  SynthSession session;
  IntentModel model;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    x.session = generate_session(testing::small_config(23, 30), Condition::intention);
    x.model = train_from_onsets(x.session.recording, x.session.truth.onsets()).model;
    return x;
  }();
  return f;
}

Recording eeg_only(const Recording& r) {
  std::vector<std::string> eeg;
  for (const auto& c : r.channels) {
    if (c != "EMG") eeg.push_back(c);
  }
  Recording out = select_channels(r, eeg);
  out.markers = r.markers;
  return out;
}

Prediction pred(double smoothed, int cls, double t) {
  Prediction p;
  p.time_s = t;
  p.smoothed = smoothed;
  p.raw = smoothed;
  p.predicted_class = cls;
  return p;
}

GateState armed_at(double t) {
  GateState s;
  const Marker offset{t, MarkerKind::fixation_offset, ""};
  return gate_step(s, std::span<const Marker>(&offset, 1), std::nullopt, t, 0.5).state;
}

}  // namespace

TEST_SUITE("realtime") {
  TEST_CASE("smoothing weights") {
    CHECK(smooth(0.6, 0.8) == doctest::Approx(0.58));
    CHECK(smooth(1.0, 1.0) == doctest::Approx(0.8));
    CHECK(smooth(0.0, 0.0) == 0.0);
    CHECK(smooth(1.0, 1.0, true) == doctest::Approx(1.0));
  }

  TEST_CASE("armed gate pulses above threshold") {
    const GateState s = armed_at(1.0);
    REQUIRE(s.phase == GatePhase::armed);
    const auto r = gate_step(s, {}, pred(0.60, 1, 1.5), 1.5, 0.57);
    REQUIRE(r.pulse);
    CHECK(r.pulse->duration_s == 0.5);
    CHECK(r.pulse->trial == 0);
    CHECK(r.state.phase == GatePhase::pulsing);
  }

  TEST_CASE("disarmed gate never pulses") {
    const auto r = gate_step(GateState{}, {}, pred(0.99, 1, 1.0), 1.0, 0.57);
    CHECK_FALSE(r.pulse);
    CHECK(r.state.phase == GatePhase::disarmed);
  }

  TEST_CASE("idle class does not pulse even above threshold") {
    const auto r = gate_step(armed_at(1.0), {}, pred(0.9, 0, 1.2), 1.2, 0.57);
    CHECK_FALSE(r.pulse);
    CHECK(r.state.phase == GatePhase::armed);
  }

  TEST_CASE("threshold is strict") {
    CHECK_FALSE(gate_step(armed_at(1.0), {}, pred(0.57, 1, 1.2), 1.2, 0.57).pulse);
  }

  TEST_CASE("pulse lasts exactly the pulse duration, then refractory until the trial ends") {
    GateState s = gate_step(armed_at(1.0), {}, pred(0.9, 1, 2.0), 2.0, 0.5).state;
    s = gate_step(s, {}, pred(0.9, 1, 2.4), 2.4, 0.5).state;
    CHECK(s.phase == GatePhase::pulsing);
    auto r = gate_step(s, {}, pred(0.9, 1, 2.5), 2.5, 0.5);
    CHECK(r.state.phase == GatePhase::refractory);
    CHECK_FALSE(r.pulse);
    const Marker tap{2.6, MarkerKind::tap, ""};
    r = gate_step(r.state, std::span<const Marker>(&tap, 1), pred(0.9, 1, 2.7), 2.7, 0.5);
    CHECK(r.state.phase == GatePhase::disarmed);
    CHECK_FALSE(r.pulse);
  }

  TEST_CASE("tap during a pulse lets the pulse finish, then disarms") {
    GateState s = gate_step(armed_at(1.0), {}, pred(0.9, 1, 2.0), 2.0, 0.5).state;
    const Marker tap{2.1, MarkerKind::tap, ""};
    auto r = gate_step(s, std::span<const Marker>(&tap, 1), std::nullopt, 2.2, 0.5);
    CHECK(r.state.phase == GatePhase::pulsing);
    r = gate_step(r.state, {}, std::nullopt, 2.5, 0.5);
    CHECK(r.state.phase == GatePhase::disarmed);
  }

  TEST_CASE("out-of-order events are protocol errors that disarm") {
    const GateState s = armed_at(5.0);
    const Marker late{4.0, MarkerKind::tone, ""};
    auto r = gate_step(s, std::span<const Marker>(&late, 1), pred(0.9, 1, 5.1), 5.1, 0.5);
    CHECK(r.protocol_errors.size() == 1);
    CHECK(r.state.phase == GatePhase::disarmed);
    CHECK_FALSE(r.pulse);

    r = gate_step(s, {}, pred(0.9, 1, 4.5), 4.5, 0.5);
    CHECK(r.protocol_errors.size() == 1);
    CHECK(r.state.phase == GatePhase::disarmed);
  }

  TEST_CASE("second fixation offset while armed is a protocol error") {
    const Marker again{1.5, MarkerKind::fixation_offset, ""};
    const auto r = gate_step(armed_at(1.0), std::span<const Marker>(&again, 1), std::nullopt, 1.6, 0.5);
    CHECK(r.protocol_errors.size() == 1);
    CHECK(r.state.phase == GatePhase::disarmed);
    CHECK(r.state.trial == 1);
  }

  TEST_CASE("random gate traces respect the safety rules") {
    const auto report = testing::run_gate_traces(3000, 77);
    CHECK(report.pulses > 100);
    CHECK(report.protocol_errors > 0);
    CHECK(report.pulses_outside_armed == 0);
    CHECK(report.double_pulses == 0);
    CHECK(report.missed_pulses == 0);
    CHECK(report.bad_pulse_durations == 0);
    CHECK(report.wrong_command_duration == 0);
  }

  TEST_CASE("engine rejects a stream without the model channels") {
    const auto& f = fixture();
    CHECK_THROWS_AS(DecisionEngine(f.model, {"X", "Y"}), Error);
    EngineConfig bad;
    bad.tick_s = 0.0;
    CHECK_THROWS_AS(DecisionEngine(f.model, f.model.recording_channels, bad), Error);
  }

  TEST_CASE("replay features equal offline slopes of the causally filtered recording") {
    const auto& f = fixture();
    const Recording eeg = eeg_only(f.session.recording);
    RecordingSource source(eeg);
    const RunResult run = replay(f.model, source, eeg.markers);
    const Recording filtered = select_channels(filter_eeg(eeg, f.model.filter), f.model.channels);

    std::size_t compared = 0;
    double worst = 0.0;
    for (const auto& t : run.ticks) {
      if (t.skipped) continue;
      Segment seg;
      seg.rate = filtered.rate;
      seg.channels = filtered.channels;
      seg.data = filtered.data.middleCols(static_cast<Eigen::Index>(t.samples) - 250, 250);
      const Vector offline = slope_features(seg, f.model.channels);
      worst = std::max(worst, (offline - t.features).cwiseAbs().maxCoeff());
      // The tick sees exactly the samples stamped before its deadline.
      CHECK(static_cast<double>(t.samples) == doctest::Approx(std::ceil(t.deadline_s * eeg.rate - 1e-9)));
      ++compared;
    }
    CHECK(compared > 100);
    CHECK(worst < 1e-6);
  }

  TEST_CASE("sixty seconds of stream give 600 ticks") {
    Recording r;
    r.rate = 250.0;
    r.channels = fixture().model.recording_channels;
    r.data = Matrix::Zero(static_cast<Eigen::Index>(r.channels.size()), 250 * 60);
    RecordingSource source(r);
    const RunResult run = replay(fixture().model, source, {});
    CHECK(run.ticks.size() >= 599);
    CHECK(run.ticks.size() <= 601);
    CHECK(run.skipped == 9);
    CHECK(run.frames == 15000);
    CHECK(run.ticks.front().deadline_s == doctest::Approx(0.1));
  }

  TEST_CASE("replay is deterministic and pulses reach the mock actuator") {
    const auto& f = fixture();
    const Recording eeg = eeg_only(f.session.recording);
    RecordingSource a(eeg), b(eeg);
    MockTransport mock;
    const RunResult ra = replay(f.model, a, eeg.markers, {}, &mock);
    const RunResult rb = replay(f.model, b, eeg.markers);
    REQUIRE(ra.ticks.size() == rb.ticks.size());
    for (std::size_t i = 0; i < ra.ticks.size(); ++i) {
      CHECK(ra.ticks[i].prediction.raw == rb.ticks[i].prediction.raw);
      CHECK(ra.ticks[i].phase == rb.ticks[i].phase);
    }
    REQUIRE(ra.pulses.size() > 0);
    CHECK(ra.pulses.size() == rb.pulses.size());
    CHECK(ra.protocol_errors.empty());
    const auto logged = mock.pulses();
    REQUIRE(logged.size() == ra.pulses.size());
    for (std::size_t i = 0; i < logged.size(); ++i) {
      CHECK(logged[i].duration_ms == 500);
      CHECK(logged[i].time_s == ra.pulses[i].command.issue_time_s);
    }
  }

  TEST_CASE("closed transport logs actuator errors and the run continues") {
    const auto& f = fixture();
    const Recording eeg = eeg_only(f.session.recording);
    RecordingSource open_src(eeg), closed_src(eeg);
    MockTransport closed;
    closed.close();
    const RunResult ok = replay(f.model, open_src, eeg.markers);
    const RunResult bad = replay(f.model, closed_src, eeg.markers, {}, &closed);
    CHECK(bad.ticks.size() == ok.ticks.size());
    REQUIRE(bad.pulses.size() == ok.pulses.size());
    for (const auto& p : bad.pulses) {
      CHECK_FALSE(p.ok);
      CHECK_FALSE(p.error.empty());
    }
    try {
      actuator_send(closed, PulseCommand{});
      FAIL("expected actuator error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::actuator);
    }
  }

  TEST_CASE("actuator worker delivers every queued trigger") {
    MockTransport mock;
    {
      ActuatorWorker worker(mock);
      for (int i = 0; i < 3; ++i) CHECK(worker.submit(PulseCommand{1.0 + i, 0.5, i}));
      worker.stop();
      const auto log = worker.log();
      REQUIRE(log.size() == 3);
      for (const auto& e : log) CHECK(e.ok);
    }
    REQUIRE(mock.pulses().size() == 3);
    CHECK(mock.lines().front() == "PULSE 500");
  }

  TEST_CASE("pulse log round-trips") {
    testing::TempDir dir("pulses");
    std::vector<PulseLogEntry> log{{{12.3, 0.5, 4}, true, ""}, {{20.25, 0.5, 7}, false, "closed"}};
    write_pulses(dir / "pulses.tsv", log, {{"seed", "3"}});
    const auto back = read_pulses(dir / "pulses.tsv");
    REQUIRE(back.size() == 2);
    CHECK(back[0].command.issue_time_s == 12.3);
    CHECK(back[0].command.trial == 4);
    CHECK(back[0].ok);
    CHECK_FALSE(back[1].ok);
    CHECK(back[1].error == "closed");
  }

  TEST_CASE("live run paces ticks at 10 Hz") {
    const auto& f = fixture();
    Recording eeg = eeg_only(f.session.recording);
    eeg.data = eeg.data.leftCols(250 * 3).eval();
    eeg.markers.clear();
    RecordingSource source(eeg, true);
    MarkerFeed feed({});
    MockTransport mock;
    LiveConfig config;
    config.max_seconds = 10.0;
    const auto start = std::chrono::steady_clock::now();
    const RunResult run = run_live(f.model, source, feed, mock, config);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(run.frames == 750);
    CHECK(run.ticks.size() >= 27);
    CHECK(run.ticks.size() <= 34);
    CHECK(wall < 5.0);
    CHECK(run.predictions() > 15);
  }

  TEST_CASE("tcp stream and relay reproduce the in-memory replay") {
    const auto& f = fixture();
    const Recording eeg = eeg_only(f.session.recording);
    RecordingSource local(eeg);
    const RunResult reference = replay(f.model, local, eeg.markers);

    FrameServer server(eeg);
    RelayServer relay;
    TcpFrameSource remote("127.0.0.1", server.port(), eeg.channels, eeg.rate);
    TcpTransport transport("127.0.0.1", relay.port());
    const RunResult run = replay(f.model, remote, eeg.markers, {}, &transport);
    server.wait();

    REQUIRE(run.ticks.size() == reference.ticks.size());
    REQUIRE(run.pulses.size() == reference.pulses.size());
    for (std::size_t i = 0; i < run.pulses.size(); ++i) {
      CHECK(run.pulses[i].ok);
      CHECK(run.pulses[i].command.issue_time_s == reference.pulses[i].command.issue_time_s);
    }
    transport.close();
    relay.stop();
    const auto lines = relay.received();
    CHECK(lines.size() == run.pulses.size());
    for (const auto& l : lines) CHECK(l == "PULSE 500");
  }
}
