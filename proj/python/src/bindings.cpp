#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "intentloop/error.hpp"
#include "intentloop/eval.hpp"
#include "intentloop/model_io.hpp"
#include "intentloop/pipeline.hpp"
#include "intentloop/realtime.hpp"
#include "intentloop/session_io.hpp"
#include "intentloop/stats.hpp"
#include "intentloop/synth.hpp"

namespace py = pybind11;
using namespace intentloop;

namespace {

py::dict run_to_dict(const RunResult& run) {
  std::vector<double> times, raw, smoothed;
  std::vector<bool> skipped;
  for (const auto& t : run.ticks) {
    times.push_back(t.deadline_s);
    raw.push_back(t.prediction.raw);
    smoothed.push_back(t.prediction.smoothed);
    skipped.push_back(t.skipped);
  }
  std::vector<double> pulses;
  for (const auto& p : run.pulses) pulses.push_back(p.command.issue_time_s);
  py::dict d;
  d["tick_times"] = times;
  d["raw"] = raw;
  d["smoothed"] = smoothed;
  d["skipped"] = skipped;
  d["pulses"] = pulses;
  d["protocol_errors"] = run.protocol_errors;
  d["frames"] = run.frames;
  return d;
}

}  // namespace

PYBIND11_MODULE(_intentloop, m) {
  m.doc() = "Readiness-potential decoding and closed-loop stimulation";

  py::register_exception<Error>(m, "IntentLoopError", PyExc_RuntimeError);

  py::enum_<Condition>(m, "Condition")
      .value("intention", Condition::intention)
      .value("involuntary", Condition::involuntary)
      .value("augmented", Condition::augmented);

  py::enum_<MarkerKind>(m, "MarkerKind")
      .value("fixation_onset", MarkerKind::fixation_onset)
      .value("fixation_offset", MarkerKind::fixation_offset)
      .value("tap", MarkerKind::tap)
      .value("tone", MarkerKind::tone)
      .value("ems", MarkerKind::ems)
      .value("estimate", MarkerKind::estimate)
      .value("trial_end", MarkerKind::trial_end);

  py::class_<Marker>(m, "Marker")
      .def(py::init<>())
      .def(py::init([](double t, MarkerKind k, std::string payload) { return Marker{t, k, std::move(payload)}; }),
           py::arg("time_s"), py::arg("kind"), py::arg("payload") = "")
      .def_readwrite("time_s", &Marker::time_s)
      .def_readwrite("kind", &Marker::kind)
      .def_readwrite("payload", &Marker::payload)
      .def("__repr__", [](const Marker& mk) { return "<Marker " + format_marker(mk) + ">"; });

  py::class_<Recording>(m, "Recording")
      .def(py::init<>())
      .def_readwrite("rate", &Recording::rate)
      .def_readwrite("channels", &Recording::channels)
      .def_readwrite("data", &Recording::data)
      .def_readwrite("markers", &Recording::markers)
      .def_property_readonly("samples", &Recording::samples)
      .def_property_readonly("duration_s", &Recording::duration_s)
      .def("markers_of", &Recording::markers_of)
      .def("channel_index", &Recording::channel_index)
      .def("validate", &Recording::validate);

  m.def("save_session", [](const std::filesystem::path& prefix, const Recording& r) { save_session(prefix, r); });
  m.def("load_session", [](const std::filesystem::path& p) { return load_session(p); });

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_trials", &SynthConfig::n_trials)
      .def_readwrite("seed", &SynthConfig::seed)
      .def_readwrite("channels", &SynthConfig::channels)
      .def("noise_free", [](SynthConfig& c) -> SynthConfig& { return c.noise_free(); }, py::return_value_policy::reference)
      .def("set", [](SynthConfig& c, const std::string& k, const std::string& v) { apply_synth_option(c, k, v); })
      .def("options", [](const SynthConfig& c) { return synth_options(c); });

  py::class_<SynthTrial>(m, "SynthTrial")
      .def_readonly("index", &SynthTrial::index)
      .def_readonly("onset_s", &SynthTrial::onset_s)
      .def_readonly("tap_s", &SynthTrial::tap_s)
      .def_readonly("ems_s", &SynthTrial::ems_s)
      .def_readonly("tone_delay_ms", &SynthTrial::tone_delay_ms)
      .def_readonly("estimate_ms", &SynthTrial::estimate_ms);

  py::class_<SynthGroundTruth>(m, "GroundTruth")
      .def_readonly("condition", &SynthGroundTruth::condition)
      .def_readonly("onset_offset_ms", &SynthGroundTruth::onset_offset_ms)
      .def_readonly("weights", &SynthGroundTruth::weights)
      .def_readonly("trials", &SynthGroundTruth::trials)
      .def("onsets", &SynthGroundTruth::onsets)
      .def("taps", &SynthGroundTruth::taps);

  m.def(
      "generate_session",
      [](const SynthConfig& c, Condition cond, const std::vector<double>& rts) {
        auto s = generate_session(c, cond, rts);
        return py::make_tuple(std::move(s.recording), std::move(s.truth));
      },
      py::arg("config"), py::arg("condition") = Condition::intention, py::arg("intention_rts_s") = std::vector<double>{});

  py::class_<FilterSpec>(m, "FilterSpec")
      .def_readonly("low_hz", &FilterSpec::low_hz)
      .def_readonly("high_hz", &FilterSpec::high_hz)
      .def_readonly("rate", &FilterSpec::rate)
      .def_readonly("order", &FilterSpec::order)
      .def_property_readonly("sos", [](const FilterSpec& f) {
        std::vector<std::array<double, 6>> out;
        for (const auto& s : f.sections) out.push_back({s.b0, s.b1, s.b2, 1.0, s.a1, s.a2});
        return out;
      })
      .def("response", &FilterSpec::response)
      .def("stable", &FilterSpec::stable);

  m.def("design_bandpass", &design_bandpass, py::arg("low_hz"), py::arg("high_hz"), py::arg("rate"),
        py::arg("order") = 4);
  m.def("filter_causal", [](const FilterSpec& f, const std::vector<double>& x) { return filter_apply(f, x).signal; });
  m.def("filter_zero_phase", [](const FilterSpec& f, const std::vector<double>& x) { return filter_zero_phase(f, x); });
  m.def("slope_rows", &slope_rows, py::arg("data"), py::arg("rate"));

  py::class_<OnsetResult>(m, "OnsetResult")
      .def_readonly("onset_offset_ms", &OnsetResult::onset_offset_ms)
      .def_readonly("onsets_s", &OnsetResult::onsets_s)
      .def_readonly("threshold", &OnsetResult::threshold);
  m.def("detect_onset", [](const Recording& r, const std::string& emg) { return detect_onset(r, emg); },
        py::arg("recording"), py::arg("emg_channel") = "EMG");

  py::class_<IntentModel>(m, "IntentModel")
      .def_readonly("channels", &IntentModel::channels)
      .def_readonly("recording_channels", &IntentModel::recording_channels)
      .def_readonly("threshold", &IntentModel::threshold)
      .def_property_readonly("ranking", [](const IntentModel& mdl) { return mdl.ranking.order; })
      .def_property_readonly("weights", [](const IntentModel& mdl) { return mdl.lda.weights; })
      .def_property_readonly("bias", [](const IntentModel& mdl) { return mdl.lda.bias; })
      .def_property_readonly("chosen_k", [](const IntentModel& mdl) { return mdl.meta.chosen_k; })
      .def_property_readonly("cv_f1", [](const IntentModel& mdl) { return mdl.meta.cv_f1; })
      .def_property_readonly("cv_auc", [](const IntentModel& mdl) { return mdl.meta.cv_auc; })
      .def_property_readonly("mean_accuracy", [](const IntentModel& mdl) { return mdl.meta.mean_accuracy; })
      .def("predict_proba", [](const IntentModel& mdl, const Eigen::VectorXd& x) { return predict_proba(mdl.lda, x); });

  m.def("train", [](const Recording& r) { return train_from_recording(r).model; }, py::arg("recording"));
  m.def(
      "train_from_onsets", [](const Recording& r, const std::vector<double>& onsets) { return train_from_onsets(r, onsets).model; },
      py::arg("recording"), py::arg("onsets_s"));
  m.def("save_model", [](const std::filesystem::path& p, const IntentModel& mdl) { save_model(p, mdl); });
  m.def("load_model", [](const std::filesystem::path& p) { return load_model(p); });

  m.def(
      "replay",
      [](const IntentModel& mdl, const Recording& r, double tick_s) {
        std::vector<std::string> eeg;
        for (const auto& c : r.channels) {
          if (c != "EMG") eeg.push_back(c);
        }
        Recording stream = select_channels(r, eeg);
        RecordingSource source(stream);
        EngineConfig cfg;
        cfg.tick_s = tick_s;
        MockTransport mock;
        RunResult run;
        {
          py::gil_scoped_release release;
          run = replay(mdl, source, r.markers, cfg, &mock);
        }
        return run_to_dict(run);
      },
      py::arg("model"), py::arg("recording"), py::arg("tick_s") = 0.1);

  m.def("quantile", [](const std::vector<double>& v, double q) { return stats::quantile(v, q); });
  m.def("bh_adjust", [](const std::vector<double>& p) { return stats::bh_adjust(p); });
  m.def("tukey_keep", [](const std::vector<double>& v, double k) { return tukey_reject(v, k); }, py::arg("values"),
        py::arg("k") = 3.0);
  m.def("ledoit_wolf", [](const Eigen::MatrixXd& x) {
    const auto r = lw_covariance(x);
    return py::make_tuple(r.covariance, r.shrinkage);
  });

  m.def(
      "erp",
      [](const Recording& r, const std::vector<double>& onsets, const std::string& channel) {
        const Erp e = erp_extract(r, onsets, channel);
        return py::make_tuple(e.times_ms, e.mean, e.count());
      },
      py::arg("recording"), py::arg("onsets_s"), py::arg("channel") = "FCz");

  m.def(
      "contrast",
      [](const Matrix& a, const Matrix& b, const std::vector<double>& times, std::size_t permutations, std::uint64_t seed) {
        PermutationConfig pc;
        pc.permutations = permutations;
        pc.seed = seed;
        const auto c = contrast(a, b, times, 150.0, 250.0, 0.05, pc);
        py::dict d;
        d["t"] = c.t;
        d["p"] = c.p;
        d["p_adjusted"] = c.p_adjusted;
        d["significant"] = c.significant;
        d["window_diff"] = c.window_diff;
        d["window_t"] = c.window_t;
        d["window_p"] = c.window_p;
        return d;
      },
      py::arg("a"), py::arg("b"), py::arg("times_ms"), py::arg("permutations") = 10000, py::arg("seed") = 1);
}
