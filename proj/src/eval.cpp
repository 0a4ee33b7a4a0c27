#include "intentloop/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "intentloop/error.hpp"
#include "intentloop/features.hpp"
#include "intentloop/labeling.hpp"
#include "intentloop/pipeline.hpp"
#include "intentloop/stats.hpp"
#include "intentloop/stream.hpp"

namespace intentloop {

std::vector<bool> tukey_reject(std::span<const double> values, double k) {
  if (values.size() < 4) fail(ErrorKind::parameter, "Tukey fences need at least four values");
  if (!(k >= 0.0)) fail(ErrorKind::parameter, "Tukey k must be non-negative");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = stats::quantile_sorted(sorted, 0.25);
  const double q3 = stats::quantile_sorted(sorted, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - k * iqr;
  const double hi = q3 + k * iqr;
  std::vector<bool> keep(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) keep[i] = values[i] >= lo && values[i] <= hi;
  return keep;
}

// ---------------------------------------------------------------------------

TrialTable trial_table(const SynthGroundTruth& truth) {
  TrialTable table;
  for (const auto& t : truth.trials) {
    TrialRow r;
    r.trial = t.index;
    r.condition = t.condition;
    r.fixation_offset_s = t.fixation_offset_s;
    r.tap_s = t.tap_s;
    r.ems_s = t.ems_s;
    r.tone_delay_ms = t.tone_delay_ms;
    r.estimate_ms = t.estimate_ms;
    table.push_back(r);
  }
  return table;
}

TrialTable trial_table(const std::vector<Marker>& markers, Condition condition) {
  TrialTable table;
  std::vector<bool> has_tap;
  for (const auto& m : markers) {
    if (m.kind == MarkerKind::fixation_offset) {
      TrialRow r;
      r.trial = static_cast<int>(table.size());
      r.condition = condition;
      r.fixation_offset_s = m.time_s;
      r.tap_s = -1.0;
      table.push_back(r);
      has_tap.push_back(false);
      continue;
    }
    if (table.empty()) continue;
    TrialRow& r = table.back();
    switch (m.kind) {
      case MarkerKind::ems:
        if (!r.has_ems()) r.ems_s = m.time_s;
        break;
      case MarkerKind::tap:
        if (!has_tap.back()) {
          r.tap_s = m.time_s;
          has_tap.back() = true;
        }
        break;
      case MarkerKind::tone:
        r.tone_delay_ms = parse_double(m.payload);
        break;
      case MarkerKind::estimate:
        r.estimate_ms = parse_double(m.payload);
        break;
      default:
        break;
    }
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!has_tap[i]) {
      table[i].kept = false;
      table[i].reason = "no_tap";
    }
  }
  return table;
}

void attach_pulses(TrialTable& table, const std::vector<PulseLogEntry>& pulses) {
  for (const auto& p : pulses) {
    const int t = p.command.trial;
    if (t < 0 || static_cast<std::size_t>(t) >= table.size()) continue;
    if (!table[static_cast<std::size_t>(t)].has_ems()) {
      table[static_cast<std::size_t>(t)].ems_s = p.command.issue_time_s;
    }
  }
}

namespace {

// Interval on the microsecond grid the markers live on, in ms.
double interval_ms(double from_s, double to_s) { return std::round((to_s - from_s) * 1e6) / 1e3; }

}  // namespace

TrialTable screen_trials(const TrialTable& table, const ScreenConfig& config) {
  TrialTable out = table;
  std::vector<std::vector<std::string>> reasons(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].tap_s < 0.0) reasons[i].push_back("no_tap");
  }

  auto tukey_screen = [&](const std::vector<std::size_t>& idx, auto value, const char* reason) {
    if (idx.size() < 4) return;
    std::vector<double> v;
    for (std::size_t i : idx) v.push_back(value(out[i]));
    const auto keep = tukey_reject(v, config.tukey_k);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (!keep[j]) reasons[idx[j]].push_back(reason);
    }
  };

  for (Condition c : {Condition::intention, Condition::involuntary, Condition::augmented}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i].condition == c && out[i].tap_s >= 0.0) rows.push_back(i);
    }
    tukey_screen(rows, [](const TrialRow& r) { return interval_ms(r.fixation_offset_s, r.tap_s); }, "tap_latency");
    tukey_screen(rows, [](const TrialRow& r) { return r.estimate_ms; }, "estimate");

    std::vector<std::size_t> ems_rows;
    for (std::size_t i : rows) {
      if (!out[i].ems_controlled()) continue;
      if (interval_ms(out[i].ems_s, out[i].tap_s) > config.ems_tap_window_ms) {
        reasons[i].push_back("ems_no_tap");
      } else {
        ems_rows.push_back(i);
      }
    }
    tukey_screen(ems_rows, [](const TrialRow& r) { return interval_ms(r.ems_s, r.tap_s); }, "ems_tap_delta");
  }

  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].kept = reasons[i].empty();
    out[i].reason.clear();
    for (std::size_t j = 0; j < reasons[i].size(); ++j) {
      out[i].reason += (j ? ";" : "") + reasons[i][j];
    }
  }
  return out;
}

const BindingRow* BindingSummary::find(std::string_view group) const {
  for (const auto& r : rows) {
    if (r.group == group) return &r;
  }
  return nullptr;
}

BindingSummary binding_summary(const TrialTable& table) {
  BindingSummary out;
  auto add = [&](const std::string& group, auto pred) {
    std::vector<double> d;
    for (const auto& r : table) {
      if (r.kept && pred(r)) d.push_back(r.delta_ms());
    }
    if (d.empty()) {
      out.warnings.push_back("no kept trials for " + group);
      return;
    }
    out.rows.push_back({group, d.size(), stats::mean(d), stats::sample_sd(d)});
  };
  for (Condition c : {Condition::intention, Condition::involuntary, Condition::augmented}) {
    const bool present = std::any_of(table.begin(), table.end(),
                                     [&](const TrialRow& r) { return r.condition == c; });
    if (!present) continue;
    add(std::string(to_string(c)), [&](const TrialRow& r) { return r.condition == c; });
  }
  if (std::any_of(table.begin(), table.end(),
                  [](const TrialRow& r) { return r.condition == Condition::augmented; })) {
    add("augmented/ems", [](const TrialRow& r) {
      return r.condition == Condition::augmented && r.ems_controlled();
    });
    add("augmented/self", [](const TrialRow& r) {
      return r.condition == Condition::augmented && !r.ems_controlled();
    });
  }
  return out;
}

// ---------------------------------------------------------------------------

double Erp::window_mean(double from_ms, double to_ms) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < times_ms.size(); ++i) {
    if (times_ms[i] >= from_ms - 1e-9 && times_ms[i] < to_ms - 1e-9) {
      sum += mean(static_cast<Eigen::Index>(i));
      ++n;
    }
  }
  if (n == 0) fail(ErrorKind::parameter, "window holds no samples");
  return sum / static_cast<double>(n);
}

Erp erp_extract(const Recording& recording, std::span<const double> onsets_s,
                const std::string& channel, const EpochConfig& config) {
  const std::size_t row = recording.channel_index(channel);
  const double rate = recording.rate;
  const FilterSpec spec = design_bandpass(config.band_low_hz, config.band_high_hz, rate, config.order);
  const auto raw = recording.data.row(static_cast<Eigen::Index>(row));
  const std::vector<double> filtered =
      filter_zero_phase(spec, std::span<const double>(raw.data(), recording.samples()));

  const std::size_t len = window_samples(config.end_ms - config.start_ms, rate);
  if (config.baseline_start_ms < config.start_ms) fail(ErrorKind::parameter, "baseline outside the epoch");
  const auto base_off =
      static_cast<std::size_t>(std::llround((config.baseline_start_ms - config.start_ms) / 1000.0 * rate));
  const std::size_t base_len =
      std::max<std::size_t>(1, window_samples(config.baseline_end_ms - config.baseline_start_ms, rate));
  if (base_off + base_len > len) fail(ErrorKind::parameter, "baseline outside the epoch");

  std::vector<std::vector<double>> rows;
  for (double onset : onsets_s) {
    const std::ptrdiff_t first = sample_at_or_after(onset + config.start_ms / 1000.0, rate);
    if (first < 0 || static_cast<std::size_t>(first) + len > filtered.size()) continue;
    std::vector<double> epoch(filtered.begin() + first, filtered.begin() + first + static_cast<std::ptrdiff_t>(len));
    double base = 0.0;
    for (std::size_t i = 0; i < base_len; ++i) base += epoch[base_off + i];
    base /= static_cast<double>(base_len);
    for (double& v : epoch) v -= base;
    rows.push_back(std::move(epoch));
  }
  if (rows.empty()) fail(ErrorKind::empty_condition, "no epoch fits the recording at " + channel);

  Erp erp;
  erp.channel = channel;
  erp.rate = rate;
  for (std::size_t i = 0; i < len; ++i) {
    erp.times_ms.push_back(config.start_ms + 1000.0 * static_cast<double>(i) / rate);
  }
  erp.epochs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(len));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < len; ++i) {
      erp.epochs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = rows[r][i];
    }
  }
  erp.mean = erp.epochs.colwise().mean().transpose();
  return erp;
}

// ---------------------------------------------------------------------------

namespace {

// t from the sum and (flip-invariant) sum of squares.
double t_from_sums(double sum, double sumsq, std::size_t n) {
  if (n < 2) return 0.0;
  const double nn = static_cast<double>(n);
  const double m = sum / nn;
  const double var = std::max(0.0, (sumsq - nn * m * m) / (nn - 1.0));
  if (var <= 1e-300 * std::max(1.0, sumsq)) {
    if (m == 0.0) return 0.0;
    return std::copysign(std::numeric_limits<double>::infinity(), m);
  }
  return m / std::sqrt(var / nn);
}

}  // namespace

double t_statistic(std::span<const double> diffs) {
  double sum = 0.0, sumsq = 0.0;
  for (double d : diffs) {
    sum += d;
    sumsq += d * d;
  }
  return t_from_sums(sum, sumsq, diffs.size());
}

double paired_permutation_p(std::span<const double> diffs, const PermutationConfig& config) {
  const std::size_t n = diffs.size();
  if (n < 2) fail(ErrorKind::parameter, "permutation test needs at least two pairs");
  double sumsq = 0.0, sum = 0.0;
  for (double d : diffs) {
    sum += d;
    sumsq += d * d;
  }
  const double t_obs = std::abs(t_from_sums(sum, sumsq, n));
  const double tol = std::isfinite(t_obs) ? 1e-12 * std::max(1.0, t_obs) : 0.0;

  if (n < 63 && (std::uint64_t{1} << n) <= config.permutations) {
    const std::uint64_t total = std::uint64_t{1} << n;
    std::uint64_t hits = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (mask >> i & 1U) ? -diffs[i] : diffs[i];
      if (std::abs(t_from_sums(s, sumsq, n)) >= t_obs - tol) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
  }

  Rng rng(config.seed);
  std::uint64_t hits = 0;
  for (std::size_t k = 0; k < config.permutations; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (rng.next_u64() >> 63) ? -diffs[i] : diffs[i];
    if (std::abs(t_from_sums(s, sumsq, n)) >= t_obs - tol) ++hits;
  }
  return static_cast<double>(hits + 1) / static_cast<double>(config.permutations + 1);
}

ContrastResult contrast(const Matrix& a, const Matrix& b, const std::vector<double>& times_ms,
                        double window_from_ms, double window_to_ms, double alpha,
                        const PermutationConfig& config) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::parameter, "conditions differ in participants or samples");
  }
  if (a.rows() < 5) fail(ErrorKind::parameter, "contrast needs at least five participants");
  if (static_cast<std::size_t>(a.cols()) != times_ms.size()) {
    fail(ErrorKind::parameter, "time axis does not match the waveforms");
  }
  ContrastResult r;
  r.times_ms = times_ms;
  r.window_from_ms = window_from_ms;
  r.window_to_ms = window_to_ms;
  const Matrix diff = a - b;
  std::vector<double> d(static_cast<std::size_t>(diff.rows()));
  for (Eigen::Index s = 0; s < diff.cols(); ++s) {
    for (Eigen::Index p = 0; p < diff.rows(); ++p) d[static_cast<std::size_t>(p)] = diff(p, s);
    r.t.push_back(t_statistic(d));
    r.p.push_back(paired_permutation_p(d, config));
  }
  r.p_adjusted = stats::bh_adjust(r.p);
  r.significant = stats::bh_reject(r.p, alpha);

  std::vector<Eigen::Index> cols;
  for (std::size_t i = 0; i < times_ms.size(); ++i) {
    if (times_ms[i] >= window_from_ms - 1e-9 && times_ms[i] < window_to_ms - 1e-9) {
      cols.push_back(static_cast<Eigen::Index>(i));
    }
  }
  if (cols.empty()) fail(ErrorKind::parameter, "test window holds no samples");
  for (Eigen::Index p = 0; p < diff.rows(); ++p) {
    double s = 0.0;
    for (Eigen::Index c : cols) s += diff(p, c);
    d[static_cast<std::size_t>(p)] = s / static_cast<double>(cols.size());
  }
  r.window_diff = stats::mean(d);
  r.window_t = t_statistic(d);
  r.window_p = paired_permutation_p(d, config);
  return r;
}

// ---------------------------------------------------------------------------

HeldoutScores heldout_scores(const IntentModel& model, const Recording& session,
                             std::span<const double> onsets_s) {
  const Recording eeg = filter_eeg(session, model.filter);
  const TrainingSet set = build_training_set(eeg, onsets_s);
  HeldoutScores out;
  for (const auto& s : set.segments) {
    const Vector f = slope_features(s.segment, model.channels);
    out.proba.push_back(predict_proba(model.lda, f));
    out.labels.push_back(static_cast<int>(s.label));
  }
  return out;
}

void pulse_timing(SessionReport& report, const std::vector<PulseLogEntry>& pulses,
                  const SynthGroundTruth& truth) {
  std::vector<double> errors;
  for (const auto& p : pulses) {
    const int t = p.command.trial;
    if (t < 0 || static_cast<std::size_t>(t) >= truth.trials.size()) continue;
    errors.push_back(1000.0 * (p.command.issue_time_s - truth.trials[static_cast<std::size_t>(t)].onset_s));
  }
  report.pulses = pulses.size();
  report.trials = truth.trials.size();
  if (errors.empty()) {
    report.pulse_error_mean_ms = std::numeric_limits<double>::quiet_NaN();
    report.pulse_error_median_ms = std::numeric_limits<double>::quiet_NaN();
    report.preempted_fraction = 0.0;
    return;
  }
  report.pulse_error_mean_ms = stats::mean(errors);
  report.pulse_error_median_ms = stats::median(errors);
  report.preempted_fraction =
      static_cast<double>(std::count_if(errors.begin(), errors.end(), [](double e) { return e < 0.0; })) /
      static_cast<double>(errors.size());
}

SessionReport classifier_report(const std::string& name, const IntentModel& model,
                                const Recording& session, const SynthGroundTruth& truth,
                                const EngineConfig& engine) {
  SessionReport r;
  r.session = name;
  r.cv_f1 = model.meta.cv_f1;
  r.cv_auc = model.meta.cv_auc;
  r.chosen_k = model.meta.chosen_k;
  r.threshold = model.threshold;

  const auto onsets = truth.onsets();
  const HeldoutScores scores = heldout_scores(model, session, onsets);
  std::size_t idle = 0, pre = 0, fp = 0, tp = 0;
  std::vector<int> predicted;
  for (std::size_t i = 0; i < scores.proba.size(); ++i) {
    const bool positive = scores.proba[i] >= model.threshold;
    if (scores.labels[i] == 1) {
      ++pre;
      tp += positive ? 1 : 0;
    } else {
      ++idle;
      fp += positive ? 1 : 0;
    }
    predicted.push_back(scores.proba[i] > 0.5 ? 1 : 0);
  }
  r.heldout_segments = scores.proba.size();
  r.heldout_fpr = idle ? static_cast<double>(fp) / static_cast<double>(idle) : 0.0;
  r.heldout_tpr = pre ? static_cast<double>(tp) / static_cast<double>(pre) : 0.0;
  r.heldout_f1 = predicted.empty() ? 0.0 : f1_score(predicted, scores.labels);

  RecordingSource source(session);
  const RunResult run = replay(model, source, session.markers, engine);
  r.ticks = run.ticks.size();
  pulse_timing(r, run.pulses, truth);
  return r;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  return out;
}

std::string num(double v) { return std::isfinite(v) ? format_double(v) : std::string("NA"); }

std::string brief(double v) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << v;
  return s.str();
}

}  // namespace

void write_report_csv(const std::filesystem::path& path, const std::vector<SessionReport>& reports,
                      const Provenance& provenance) {
  auto out = open_out(path);
  write_provenance(out, provenance);
  out << "session,metric,value\n";
  for (const auto& r : reports) {
    const std::vector<std::pair<const char*, double>> metrics{
        {"cv_f1", r.cv_f1},
        {"cv_auc", r.cv_auc},
        {"chosen_k", static_cast<double>(r.chosen_k)},
        {"threshold", r.threshold},
        {"heldout_f1", r.heldout_f1},
        {"heldout_fpr", r.heldout_fpr},
        {"heldout_tpr", r.heldout_tpr},
        {"heldout_segments", static_cast<double>(r.heldout_segments)},
        {"ticks", static_cast<double>(r.ticks)},
        {"trials", static_cast<double>(r.trials)},
        {"pulses", static_cast<double>(r.pulses)},
        {"pulse_error_mean_ms", r.pulse_error_mean_ms},
        {"pulse_error_median_ms", r.pulse_error_median_ms},
        {"preempted_fraction", r.preempted_fraction},
    };
    for (const auto& [name, value] : metrics) out << r.session << ',' << name << ',' << num(value) << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

void write_report_summary(std::ostream& out, const std::vector<SessionReport>& reports) {
  if (reports.empty()) {
    out << "no sessions\n";
    return;
  }
  std::vector<double> f1, thr, fpr, err;
  for (const auto& r : reports) {
    f1.push_back(r.cv_f1);
    thr.push_back(r.threshold);
    fpr.push_back(r.heldout_fpr);
    if (std::isfinite(r.pulse_error_median_ms)) err.push_back(r.pulse_error_median_ms);
    out << r.session << ": cv F1 " << brief(r.cv_f1) << ", k " << r.chosen_k << ", threshold "
        << brief(r.threshold) << ", held-out FPR " << brief(r.heldout_fpr) << " TPR "
        << brief(r.heldout_tpr) << ", pulses " << r.pulses << "/" << r.trials
        << ", median pulse error " << brief(r.pulse_error_median_ms) << " ms\n";
  }
  out << "mean cv F1 " << brief(stats::mean(f1)) << " (SD " << brief(stats::sample_sd(f1))
      << "), mean threshold " << brief(stats::mean(thr)) << ", mean held-out FPR "
      << brief(stats::mean(fpr));
  if (!err.empty()) out << ", median pulse error " << brief(stats::median(err)) << " ms";
  out << "\n";
}

void write_erp_csv(const std::filesystem::path& path, const Erp& erp, const Provenance& provenance) {
  auto out = open_out(path);
  write_provenance(out, provenance);
  out << "# channel=" << erp.channel << "\n# trials=" << erp.count() << "\n";
  out << "time_ms,uv\n";
  for (std::size_t i = 0; i < erp.times_ms.size(); ++i) {
    out << format_double(erp.times_ms[i]) << ',' << format_double(erp.mean(static_cast<Eigen::Index>(i)))
        << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

void write_binding_csv(const std::filesystem::path& path, const BindingSummary& summary,
                       const Provenance& provenance) {
  auto out = open_out(path);
  write_provenance(out, provenance);
  out << "group,n,mean_delta_ms,sd_delta_ms\n";
  for (const auto& r : summary.rows) {
    out << r.group << ',' << r.n << ',' << num(r.mean_ms) << ',' << num(r.sd_ms) << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

void write_trial_table(const std::filesystem::path& path, const TrialTable& table,
                       const Provenance& provenance) {
  auto out = open_out(path);
  write_provenance(out, provenance);
  out << "trial,condition,fixation_offset_s,tap_s,ems_s,tone_delay_ms,estimate_ms,kept,reason\n";
  for (const auto& r : table) {
    out << r.trial << ',' << to_string(r.condition) << ',' << format_double(r.fixation_offset_s)
        << ',' << format_double(r.tap_s) << ',' << (r.has_ems() ? format_double(r.ems_s) : "") << ','
        << format_double(r.tone_delay_ms) << ',' << format_double(r.estimate_ms) << ','
        << (r.kept ? 1 : 0) << ',' << r.reason << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------

double mean_cv_f1(const SynthConfig& base, std::size_t sessions) {
  if (sessions == 0) fail(ErrorKind::parameter, "need at least one session");
  double total = 0.0;
  for (std::size_t s = 0; s < sessions; ++s) {
    SynthConfig cfg = base;
    cfg.seed = Rng::derive(base.seed, s);
    const SynthSession session = generate_session(cfg, Condition::intention);
    try {
      total += train_from_recording(session.recording).model.meta.cv_f1;
    } catch (const Error&) {
      // An untrainable session scores 0.
    }
  }
  return total / static_cast<double>(sessions);
}

CalibrationResult calibrate_noise(const SynthConfig& base, const CalibrationConfig& config) {
  if (!(config.rms_lo < config.rms_hi)) fail(ErrorKind::parameter, "empty calibration bracket");
  CalibrationResult out;
  double lo = config.rms_lo, hi = config.rms_hi;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    SynthConfig cfg = base;
    cfg.noise.rms_uv = mid;
    const double f1 = mean_cv_f1(cfg, config.sessions);
    out.history.push_back({mid, f1});
    if (std::abs(f1 - config.target_f1) < best_gap) {
      best_gap = std::abs(f1 - config.target_f1);
      out.rms_uv = mid;
      out.mean_f1 = f1;
    }
    if (f1 > config.target_f1) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return out;
}

}  // namespace intentloop
