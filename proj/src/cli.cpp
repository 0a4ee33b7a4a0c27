#include "intentloop/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "intentloop/actuator.hpp"
#include "intentloop/eval.hpp"
#include "intentloop/labeling.hpp"
#include "intentloop/model_io.hpp"
#include "intentloop/stream.hpp"

#ifndef INTENTLOOP_VERSION
#define INTENTLOOP_VERSION "0.0.0"
#endif

namespace intentloop {

namespace fs = std::filesystem;

int exit_code(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::usage: return kExitUsage;
    case ErrorCategory::data: return kExitData;
    case ErrorCategory::pipeline: return kExitPipeline;
  }
  return kExitPipeline;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_flag(std::string_view text) {
  if (text == "1" || text == "true" || text == "on" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "off" || text == "no") return false;
  fail(ErrorKind::usage, "expected a boolean, got '" + std::string(text) + "'");
}

std::size_t parse_count(std::string_view text, std::string_view key) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || p != end) fail(ErrorKind::usage, std::string(key) + " expects an integer");
  return v;
}

struct RunOption {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename Ref>
RunOption real(const char* key, Ref ref) {
  return {key, [ref](const RunConfig& c) { return format_double(ref(c)); },
          [ref](RunConfig& c, std::string_view v) { ref(c) = parse_double(v); }};
}

template <typename Ref>
RunOption count(const char* key, Ref ref) {
  return {key, [ref](const RunConfig& c) { return std::to_string(ref(c)); },
          [ref, key](RunConfig& c, std::string_view v) {
            ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(parse_count(v, key));
          }};
}

const std::vector<RunOption>& run_options() {
  static const std::vector<RunOption> table{
      real("train.band_low_hz", [](auto& c) -> auto& { return c.train.band_low_hz; }),
      real("train.band_high_hz", [](auto& c) -> auto& { return c.train.band_high_hz; }),
      count("train.filter_order", [](auto& c) -> auto& { return c.train.filter_order; }),
      {"train.emg_channel", [](const RunConfig& c) { return c.train.emg_channel; },
       [](RunConfig& c, std::string_view v) { c.train.emg_channel = std::string(v); }},
      real("train.window_ms", [](auto& c) -> auto& { return c.train.segments.window_ms; }),
      real("train.idle_offset_ms", [](auto& c) -> auto& { return c.train.segments.idle_offset_ms; }),
      real("train.max_abs_uv", [](auto& c) -> auto& { return c.train.rejection.max_abs_uv; }),
      real("train.variance_factor", [](auto& c) -> auto& { return c.train.rejection.variance_factor; }),
      {"train.ordering",
       [](const RunConfig& c) {
         return std::string(c.train.ordering == DriftOrdering::absolute ? "absolute" : "signed");
       },
       [](RunConfig& c, std::string_view v) {
         if (v == "absolute") {
           c.train.ordering = DriftOrdering::absolute;
         } else if (v == "signed") {
           c.train.ordering = DriftOrdering::signed_;
         } else {
           fail(ErrorKind::usage, "train.ordering is absolute or signed");
         }
       }},
      count("train.folds", [](auto& c) -> auto& { return c.train.grid.folds; }),
      count("train.k_min", [](auto& c) -> auto& { return c.train.grid.k_min; }),
      count("train.k_max", [](auto& c) -> auto& { return c.train.grid.k_max; }),
      count("train.k_step", [](auto& c) -> auto& { return c.train.grid.k_step; }),
      count("train.seed", [](auto& c) -> auto& { return c.train.grid.seed; }),
      real("train.target_fpr", [](auto& c) -> auto& { return c.train.target_fpr; }),
      real("engine.tick_s", [](auto& c) -> auto& { return c.engine.tick_s; }),
      real("engine.window_s", [](auto& c) -> auto& { return c.engine.window_s; }),
      {"engine.normalize_smoothing",
       [](const RunConfig& c) { return std::string(c.engine.normalize_smoothing ? "1" : "0"); },
       [](RunConfig& c, std::string_view v) { c.engine.normalize_smoothing = parse_flag(v); }},
      real("engine.pulse_duration_s", [](auto& c) -> auto& { return c.engine.gate.pulse_duration_s; }),
  };
  return table;
}

}  // namespace

void RunConfig::apply(std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  if (key.starts_with("train.") || key.starts_with("engine.")) {
    for (const auto& o : run_options()) {
      if (key == o.key) {
        o.set(*this, v);
        return;
      }
    }
    fail(ErrorKind::usage, "unknown option '" + std::string(key) + "'");
  }
  try {
    apply_synth_option(synth, key, v);
  } catch (const std::invalid_argument&) {
    fail(ErrorKind::usage, "bad value for " + std::string(key) + ": '" + v + "'");
  } catch (const std::out_of_range&) {
    fail(ErrorKind::usage, "value out of range for " + std::string(key));
  }
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::usage, "cannot open config file " + path);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::usage, path + ":" + std::to_string(number) + ": expected key = value");
    }
    apply(trim(std::string_view(body).substr(0, eq)), std::string_view(body).substr(eq + 1));
  }
}

std::vector<std::pair<std::string, std::string>> RunConfig::options() const {
  auto out = synth_options(synth);
  for (const auto& o : run_options()) out.emplace_back(o.key, o.get(*this));
  return out;
}

std::string RunConfig::text() const {
  std::string out;
  for (const auto& [k, v] : options()) out += k + " = " + v + "\n";
  return out;
}

Provenance make_provenance(const RunConfig& config, std::string_view command) {
  return {{"command", std::string(command)},
          {"seed", std::to_string(config.synth.seed)},
          {"version", INTENTLOOP_VERSION},
          {"config_hash", config_hash(config.text())}};
}

Endpoint parse_endpoint(std::string_view text) {
  Endpoint e;
  if (text == "mock") return e;
  if (text.starts_with("file:")) {
    e.kind = Endpoint::Kind::file;
    e.path = std::string(text.substr(5));
    if (e.path.empty()) fail(ErrorKind::usage, "file: endpoint needs a path");
    return e;
  }
  if (text.starts_with("tcp:")) {
    const auto rest = text.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos) fail(ErrorKind::usage, "tcp endpoint is tcp:HOST:PORT");
    e.kind = Endpoint::Kind::tcp;
    e.host = std::string(rest.substr(0, colon));
    if (e.host.empty()) e.host = "127.0.0.1";
    const std::size_t port = parse_count(rest.substr(colon + 1), "port");
    if (port == 0 || port > 65535) fail(ErrorKind::usage, "port out of range");
    e.port = static_cast<int>(port);
    return e;
  }
  fail(ErrorKind::usage, "unrecognized endpoint '" + std::string(text) + "'");
}

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "key = value file; command-line flags take precedence")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "Override one option, KEY=VALUE (repeatable)");
  cmd->add_option("--seed", c.seed, "Random seed");
}

RunConfig resolve(const Common& c) {
  RunConfig config;
  if (!c.config_file.empty()) config.apply_file(c.config_file);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(ErrorKind::usage, "--set expects KEY=VALUE, got '" + s + "'");
    config.apply(trim(std::string_view(s).substr(0, eq)), std::string_view(s).substr(eq + 1));
  }
  if (c.seed) config.synth.seed = *c.seed;
  return config;
}

void require_file(const fs::path& path, std::string_view what) {
  if (!fs::exists(path)) fail(ErrorKind::usage, std::string(what) + " not found: " + path.string());
}

fs::path ensure_dir(const std::string& dir) {
  const fs::path p = dir.empty() ? fs::path(".") : fs::path(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + p.string() + ": " + ec.message());
  return p;
}

void write_resolved(const fs::path& path, const RunConfig& config, const Provenance& provenance,
                    const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  write_provenance(out, provenance);
  for (const auto& [k, v] : extra) out << k << " = " << v << "\n";
  out << config.text();
}

fs::path session_signal(const std::string& path_or_prefix) {
  const auto paths = SessionPaths::resolve(path_or_prefix);
  require_file(paths.signal, "session");
  require_file(paths.markers, "marker sidecar");
  return paths.signal;
}

std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) out += (i ? "," : "") + labels[i];
  return out;
}

std::vector<std::string> split_labels(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::unique_ptr<Transport> open_actuator(const std::string& spec) {
  const Endpoint e = parse_endpoint(spec);
  switch (e.kind) {
    case Endpoint::Kind::mock: return std::make_unique<MockTransport>();
    case Endpoint::Kind::tcp: return std::make_unique<TcpTransport>(e.host, e.port);
    case Endpoint::Kind::file: break;
  }
  fail(ErrorKind::usage, "--actuator is mock or tcp:HOST:PORT");
}

Recording eeg_only(const Recording& rec, const std::string& emg_channel) {
  const auto emg = rec.find_channel(emg_channel);
  if (!emg) return rec;
  Recording out;
  out.rate = rec.rate;
  out.markers = rec.markers;
  const auto keep = static_cast<Eigen::Index>(rec.channels.size() - 1);
  out.data.resize(keep, rec.data.cols());
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < rec.channels.size(); ++c) {
    if (c == *emg) continue;
    out.channels.push_back(rec.channels[c]);
    out.data.row(row++) = rec.data.row(static_cast<Eigen::Index>(c));
  }
  return out;
}

void print_run(std::ostream& out, const RunResult& r, const fs::path& dir) {
  out << "ticks " << r.ticks.size() << " (skipped " << r.skipped << "), pulses " << r.pulses.size()
      << ", protocol errors " << r.protocol_errors.size() << "\n";
  for (const auto& e : r.protocol_errors) out << "  " << e << "\n";
  out << "logs in " << dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// Commands

struct GenerateArgs {
  Common common;
  std::string out;
  std::string condition = "intention";
  std::optional<std::size_t> trials;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  RunConfig config = resolve(a.common);
  if (a.trials) config.synth.n_trials = *a.trials;
  const Condition condition = condition_from_string(a.condition);
  config.synth.validate();
  const auto paths = SessionPaths::from_prefix(a.out);
  if (!paths.signal.parent_path().empty()) ensure_dir(paths.signal.parent_path().string());

  const SynthSession s = generate_session(config.synth, condition);
  Provenance prov = make_provenance(config, "generate");
  prov.emplace_back("condition", std::string(to_string(condition)));
  save_session(a.out, s.recording, prov);
  write_ground_truth(paths.truth, s.truth, prov);
  write_resolved(paths.config, config, prov, {{"condition", std::string(to_string(condition))}});
  out << "wrote " << paths.signal.string() << ": " << to_string(condition) << ", "
      << s.truth.trials.size() << " trials, " << s.recording.channels.size() << " channels, "
      << std::fixed << std::setprecision(1) << s.recording.duration_s() << " s\n";
  return kExitOk;
}

struct TrainArgs {
  Common common;
  std::string session;
  std::string model;
  bool truth_onsets = false;
  std::string audit;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig config = resolve(a.common);
  const fs::path signal = session_signal(a.session);
  const auto paths = SessionPaths::resolve(a.session);
  if (a.truth_onsets) require_file(paths.truth, "ground truth");
  if (a.common.seed) config.train.grid.seed = *a.common.seed;

  const Recording raw = load_session(signal);
  TrainingOutcome t;
  if (a.truth_onsets) {
    const auto truth = read_ground_truth(paths.truth);
    t = train_from_onsets(raw, truth.onsets(), config.train);
  } else {
    t = train_from_recording(raw, config.train);
  }
  Provenance prov = make_provenance(config, "train");
  prov.emplace_back("session", signal.string());
  const fs::path model_path(a.model);
  if (!model_path.parent_path().empty()) ensure_dir(model_path.parent_path().string());
  save_model(model_path, t.model, prov);
  write_resolved(fs::path(a.model + ".config"), config, prov, {{"session", signal.string()}});
  if (!a.audit.empty()) write_label_audit(a.audit, t.training_set.audit, prov);

  const auto& m = t.model.meta;
  out << std::fixed << std::setprecision(3) << "cv_f1 " << m.cv_f1 << "  cv_auc " << m.cv_auc
      << "  k " << m.chosen_k << "  threshold " << t.model.threshold << "\n"
      << std::setprecision(1) << "onset offset " << m.onset_offset_ms << " ms, trials used "
      << m.trials_used << ", rejected " << m.trials_rejected << "\n"
      << "channels " << join_labels(t.model.channels) << "\n"
      << "wrote " << model_path.string() << "\n";
  return kExitOk;
}

struct StreamArgs {
  Common common;
  std::string model;
  std::string source;
  std::string events;
  std::string actuator = "mock";
  std::string log_dir = ".";
  std::string channels;
  double max_seconds = 0.0;
};

std::vector<Marker> file_events(const StreamArgs& a, const Endpoint& source) {
  if (!a.events.empty()) {
    const Endpoint e = parse_endpoint(a.events);
    if (e.kind != Endpoint::Kind::file) fail(ErrorKind::usage, "replay reads events from file:PATH");
    require_file(e.path, "event file");
    return read_markers(e.path);
  }
  if (source.kind == Endpoint::Kind::file) {
    const auto paths = SessionPaths::resolve(source.path);
    if (fs::exists(paths.markers)) return read_markers(paths.markers);
  }
  return {};
}

void write_logs(const fs::path& dir, const RunResult& r, const RunConfig& config,
                const Provenance& prov, const std::string& command) {
  write_predictions(dir / "predictions.tsv", r, prov);
  write_pulses(dir / "pulses.tsv", r.pulses, prov);
  write_resolved(dir / (command + ".config"), config, prov);
}

int cmd_replay(const StreamArgs& a, std::ostream& out) {
  RunConfig config = resolve(a.common);
  require_file(a.model, "model");
  const Endpoint src = parse_endpoint(a.source);
  if (src.kind != Endpoint::Kind::file) fail(ErrorKind::usage, "replay needs --source file:PATH");
  const fs::path signal = session_signal(src.path);
  const IntentModel model = load_model(a.model);
  const auto events = file_events(a, src);
  auto transport = open_actuator(a.actuator);
  const fs::path dir = ensure_dir(a.log_dir);

  RecordingSource source(load_session(signal), false);
  const RunResult r = replay(model, source, events, config.engine, transport.get());
  Provenance prov = make_provenance(config, "replay");
  prov.emplace_back("model", a.model);
  prov.emplace_back("source", a.source);
  write_logs(dir, r, config, prov, "replay");
  print_run(out, r, dir);
  return kExitOk;
}

int cmd_run(const StreamArgs& a, std::ostream& out) {
  RunConfig config = resolve(a.common);
  require_file(a.model, "model");
  const IntentModel model = load_model(a.model);
  const Endpoint src = parse_endpoint(a.source);

  std::unique_ptr<FrameSource> source;
  std::vector<Marker> recorded_events;
  if (src.kind == Endpoint::Kind::file) {
    const fs::path signal = session_signal(src.path);
    source = std::make_unique<RecordingSource>(load_session(signal), true);
    recorded_events = file_events(a, src);
  } else if (src.kind == Endpoint::Kind::tcp) {
    auto layout = a.channels.empty() ? model.recording_channels : split_labels(a.channels);
    source = std::make_unique<TcpFrameSource>(src.host, src.port, std::move(layout), model.filter.rate);
  } else {
    fail(ErrorKind::usage, "--source is file:PATH or tcp:HOST:PORT");
  }

  std::unique_ptr<EventFeed> feed;
  const Endpoint ev = a.events.empty() ? Endpoint{} : parse_endpoint(a.events);
  if (ev.kind == Endpoint::Kind::tcp) {
    feed = std::make_unique<TcpEventFeed>(ev.host, ev.port);
  } else {
    if (ev.kind == Endpoint::Kind::file) {
      require_file(ev.path, "event file");
      recorded_events = read_markers(ev.path);
    }
    feed = std::make_unique<MarkerFeed>(recorded_events);
  }
  auto transport = open_actuator(a.actuator);
  const fs::path dir = ensure_dir(a.log_dir);

  LiveConfig live;
  live.engine = config.engine;
  live.max_seconds = a.max_seconds;
  const RunResult r = run_live(model, *source, *feed, *transport, live);
  Provenance prov = make_provenance(config, "run");
  prov.emplace_back("model", a.model);
  prov.emplace_back("source", a.source);
  write_logs(dir, r, config, prov, "run");
  print_run(out, r, dir);
  return kExitOk;
}

struct EvaluateArgs {
  Common common;
  std::vector<std::string> sessions;
  std::string model;
  std::vector<std::string> pulses;  ///< paired with sessions by position
  std::string out_dir = ".";
  std::string condition;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  RunConfig config = resolve(a.common);
  std::vector<fs::path> signals;
  for (const auto& s : a.sessions) signals.push_back(session_signal(s));
  if (!a.model.empty()) require_file(a.model, "model");
  if (a.pulses.size() > a.sessions.size()) fail(ErrorKind::usage, "more --pulses logs than --session inputs");
  for (const auto& p : a.pulses) require_file(p, "pulse log");
  const fs::path dir = ensure_dir(a.out_dir);
  std::optional<IntentModel> model;
  if (!a.model.empty()) model = load_model(a.model);

  Provenance prov = make_provenance(config, "evaluate");
  TrialTable all;
  std::vector<SessionReport> reports;
  std::vector<std::pair<Condition, Erp>> erps;

  for (std::size_t i = 0; i < signals.size(); ++i) {
    const auto paths = SessionPaths::resolve(signals[i]);
    const Recording rec = load_session(signals[i]);
    const std::string name = paths.signal.stem().string();
    std::optional<SynthGroundTruth> truth;
    if (fs::exists(paths.truth)) truth = read_ground_truth(paths.truth);

    Condition condition = Condition::intention;
    if (!a.condition.empty()) {
      condition = condition_from_string(a.condition);
    } else if (truth) {
      condition = truth->condition;
    }

    TrialTable table = trial_table(rec.markers, condition);
    std::vector<PulseLogEntry> pulses;
    const bool has_pulses = i < a.pulses.size();
    if (has_pulses) {
      pulses = read_pulses(a.pulses[i]);
      if (condition == Condition::augmented) attach_pulses(table, pulses);
    }

    if (model && truth) {
      SessionReport r = classifier_report(name, *model, rec, *truth, config.engine);
      if (has_pulses) pulse_timing(r, pulses, *truth);
      reports.push_back(r);
    }

    std::vector<double> onsets;
    if (truth) {
      onsets = truth->onsets();
    } else {
      const double offset_s = detect_onset(rec, config.train.emg_channel).onset_offset_ms / 1000.0;
      for (const auto& row : table) {
        if (row.tap_s < 0.0) continue;
        onsets.push_back(row.ems_controlled() ? row.ems_s : row.tap_s - offset_s);
      }
    }
    const std::string erp_channel = config.synth.erp.channel;
    if (rec.find_channel(erp_channel) && !onsets.empty()) {
      erps.emplace_back(condition, erp_extract(rec, onsets, erp_channel));
    }
    for (auto& row : table) row.trial += static_cast<int>(all.size());
    all.insert(all.end(), table.begin(), table.end());
  }

  const TrialTable screened = screen_trials(all);
  write_trial_table(dir / "trials.tsv", screened, prov);
  const BindingSummary binding = binding_summary(screened);
  write_binding_csv(dir / "binding.csv", binding, prov);
  for (const auto& w : binding.warnings) out << "warning: " << w << "\n";
  out << std::fixed << std::setprecision(1);
  for (const auto& row : binding.rows) {
    out << "binding " << row.group << ": n " << row.n << ", mean " << row.mean_ms << " ms, sd "
        << row.sd_ms << " ms\n";
  }

  for (Condition c : {Condition::intention, Condition::involuntary, Condition::augmented}) {
    std::vector<const Erp*> group;
    for (const auto& [cond, erp] : erps) {
      if (cond == c) group.push_back(&erp);
    }
    if (group.empty()) continue;
    Erp merged = *group.front();
    std::size_t rows = 0;
    for (const Erp* e : group) rows += e->count();
    merged.epochs.resize(static_cast<Eigen::Index>(rows), group.front()->epochs.cols());
    Eigen::Index r = 0;
    for (const Erp* e : group) {
      merged.epochs.middleRows(r, e->epochs.rows()) = e->epochs;
      r += e->epochs.rows();
    }
    merged.mean = merged.epochs.colwise().mean().transpose();
    write_erp_csv(dir / ("erp_" + std::string(to_string(c)) + ".csv"), merged, prov);
    out << "erp " << to_string(c) << ": " << merged.count() << " epochs, 150-250 ms mean "
        << std::setprecision(2) << merged.window_mean(150.0, 250.0) << " uV\n"
        << std::setprecision(1);
  }

  if (!reports.empty()) {
    write_report_csv(dir / "report.csv", reports, prov);
    write_report_summary(out, reports);
  }
  write_resolved(dir / "evaluate.config", config, prov);
  out << "reports in " << dir.string() << "\n";
  return kExitOk;
}

struct ServeArgs {
  std::string session;
  int port = 0;
  bool keep_emg = false;
  bool fast = false;
  int relay_port = -1;
  std::string emg_channel = "EMG";
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  const fs::path signal = session_signal(a.session);
  Recording rec = load_session(signal);
  if (!a.keep_emg) rec = eeg_only(rec, a.emg_channel);
  std::unique_ptr<RelayServer> relay;
  if (a.relay_port >= 0) {
    relay = std::make_unique<RelayServer>(a.relay_port);
    out << "relay on 127.0.0.1:" << relay->port() << std::endl;
  }
  FrameServer server(rec, a.port, !a.fast);
  out << "frames on 127.0.0.1:" << server.port() << " (" << rec.channels.size() << " channels: "
      << join_labels(rec.channels) << ")" << std::endl;
  server.wait();
  if (relay) {
    relay->stop();
    out << "relay received " << relay->received().size() << " commands\n";
  }
  return kExitOk;
}

struct CalibrateArgs {
  Common common;
  double target = 0.71;
  std::size_t sessions = 4;
  std::size_t iterations = 8;
  double lo = 1.0;
  double hi = 60.0;
};

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  const RunConfig config = resolve(a.common);
  CalibrationConfig c;
  c.target_f1 = a.target;
  c.sessions = a.sessions;
  c.iterations = a.iterations;
  c.rms_lo = a.lo;
  c.rms_hi = a.hi;
  const CalibrationResult r = calibrate_noise(config.synth, c);
  out << std::fixed << std::setprecision(3);
  for (const auto& s : r.history) out << "rms " << s.rms_uv << " uV -> mean cv f1 " << s.mean_f1 << "\n";
  out << "noise.rms_uv = " << r.rms_uv << "  (mean cv f1 " << r.mean_f1 << ")\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Movement-intention detection and closed-loop stimulation gating", "intentloop"};
  app.set_version_flag("--version", INTENTLOOP_VERSION);
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Simulate a session with ground truth");
  add_common(g, gen.common);
  g->add_option("--out", gen.out, "Output prefix (<prefix>.ilrc, .markers.tsv, .truth.tsv)")->required();
  g->add_option("--condition", gen.condition, "intention, involuntary or augmented");
  g->add_option("--trials", gen.trials, "Number of trials")->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Fit a model on a labeled session");
  add_common(t, tr.common);
  t->add_option("--session", tr.session, "Session prefix or .ilrc file")->required();
  t->add_option("--model", tr.model, "Output model file")->required();
  t->add_flag("--truth-onsets", tr.truth_onsets, "Use ground-truth onsets instead of EMG detection");
  t->add_option("--audit", tr.audit, "Write the per-trial label audit here");

  StreamArgs rp;
  auto* r = app.add_subcommand("replay", "Run the decision engine over a recorded session");
  add_common(r, rp.common);
  r->add_option("--model", rp.model, "Model file")->required();
  r->add_option("--source", rp.source, "file:PATH")->required();
  r->add_option("--events", rp.events, "file:PATH marker stream (default: the session's sidecar)");
  r->add_option("--actuator", rp.actuator, "mock or tcp:HOST:PORT");
  r->add_option("--log-dir", rp.log_dir, "Directory for predictions.tsv and pulses.tsv");

  StreamArgs rn;
  auto* l = app.add_subcommand("run", "Live closed loop at stream pace");
  add_common(l, rn.common);
  l->add_option("--model", rn.model, "Model file")->required();
  l->add_option("--source", rn.source, "file:PATH (paced) or tcp:HOST:PORT")->required();
  l->add_option("--events", rn.events, "file:PATH or tcp:HOST:PORT marker stream");
  l->add_option("--actuator", rn.actuator, "mock or tcp:HOST:PORT");
  l->add_option("--log-dir", rn.log_dir, "Directory for predictions.tsv and pulses.tsv");
  l->add_option("--channels", rn.channels, "Comma-separated frame layout of a tcp source");
  l->add_option("--max-seconds", rn.max_seconds, "Stop after this much wall time (0: until the source ends)");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Classifier, binding and ERP reports");
  add_common(e, ev.common);
  e->add_option("--session", ev.sessions, "Session prefix or .ilrc file (repeatable)")->required();
  e->add_option("--model", ev.model, "Model for the classifier report");
  e->add_option("--pulses", ev.pulses, "pulses.tsv from a replay or run, one per session in order");
  e->add_option("--out", ev.out_dir, "Report directory");
  e->add_option("--condition", ev.condition, "Condition of sessions without ground truth");

  ServeArgs sv;
  auto* s = app.add_subcommand("serve", "Stream a session as frames over TCP");
  s->add_option("--session", sv.session, "Session prefix or .ilrc file")->required();
  s->add_option("--port", sv.port, "Listen port (0 picks one)");
  s->add_flag("--keep-emg", sv.keep_emg, "Include the EMG channel in the frames");
  s->add_flag("--fast", sv.fast, "Send as fast as possible instead of at the sampling rate");
  s->add_option("--relay-port", sv.relay_port, "Also run a PULSE relay on this port");

  CalibrateArgs ca;
  auto* c = app.add_subcommand("calibrate", "Find the noise level for a target cross-validated F1");
  add_common(c, ca.common);
  c->add_option("--target", ca.target, "Target mean F1");
  c->add_option("--sessions", ca.sessions, "Sessions per evaluation");
  c->add_option("--iterations", ca.iterations, "Bisection steps");
  c->add_option("--rms-lo", ca.lo, "Lower rms bound (uV)");
  c->add_option("--rms-hi", ca.hi, "Upper rms bound (uV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, out);
    if (t->parsed()) return cmd_train(tr, out);
    if (r->parsed()) return cmd_replay(rp, out);
    if (l->parsed()) return cmd_run(rn, out);
    if (e->parsed()) return cmd_evaluate(ev, out);
    if (s->parsed()) return cmd_serve(sv, out);
    if (c->parsed()) return cmd_calibrate(ca, out);
  } catch (const Error& ex) {
    err << "intentloop: " << ex.what() << "\n";
    return exit_code(ex.category());
  } catch (const std::exception& ex) {
    err << "intentloop: " << ex.what() << "\n";
    return kExitPipeline;
  }
  return kExitUsage;
}

}  // namespace intentloop
