#include "intentloop/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "intentloop/error.hpp"
#include "intentloop/stats.hpp"

namespace intentloop {

std::vector<double> emg_power(std::span<const double> raw_emg, double rate) {
  if (raw_emg.empty()) return {};
  const FilterSpec spec = design_bandpass(20.0, std::min(100.0, 0.45 * rate), rate, 4);
  std::vector<double> out = filter_zero_phase(spec, raw_emg);
  for (double& v : out) v *= v;
  return out;
}

OnsetResult detect_onset(const std::vector<std::vector<double>>& pre_tap_power,
                         std::span<const double> tap_times_s, double rate, double percentile) {
  if (pre_tap_power.empty()) fail(ErrorKind::parameter, "onset detection needs at least one trial");
  if (!(rate > 0.0)) fail(ErrorKind::parameter, "rate must be positive");
  const std::size_t n = pre_tap_power.front().size();
  if (n == 0) fail(ErrorKind::parameter, "empty pre-tap window");
  if (static_cast<double>(n) > rate + 0.5) {
    fail(ErrorKind::parameter, "pre-tap window longer than one second");
  }

  OnsetResult out;
  out.averaged_trace.assign(n, 0.0);
  for (const auto& trace : pre_tap_power) {
    if (trace.size() != n) fail(ErrorKind::parameter, "pre-tap windows differ in length");
    for (std::size_t i = 0; i < n; ++i) out.averaged_trace[i] += trace[i];
  }
  for (double& v : out.averaged_trace) v /= static_cast<double>(pre_tap_power.size());

  const auto [lo, hi] = std::minmax_element(out.averaged_trace.begin(), out.averaged_trace.end());
  if (!(*hi > *lo)) fail(ErrorKind::detection, "averaged EMG power is flat; no onset crossing");

  out.threshold = stats::quantile(out.averaged_trace, percentile / 100.0);
  const auto it = std::find_if(out.averaged_trace.begin(), out.averaged_trace.end(),
                               [&](double v) { return v >= out.threshold; });
  out.crossing_index = static_cast<std::size_t>(it - out.averaged_trace.begin());
  out.onset_offset_ms = static_cast<double>(n - out.crossing_index) / rate * 1000.0;

  out.onsets_s.reserve(tap_times_s.size());
  for (double tap : tap_times_s) out.onsets_s.push_back(tap - out.onset_offset_ms / 1000.0);
  return out;
}

OnsetResult detect_onset(const Recording& recording, const std::string& emg_channel,
                         double percentile) {
  const std::size_t ch = recording.channel_index(emg_channel);
  const auto row = recording.data.row(static_cast<Eigen::Index>(ch));
  const auto power = emg_power(
      std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), recording.rate);

  const std::size_t window = window_samples(1000.0, recording.rate);
  std::vector<std::vector<double>> traces;
  std::vector<double> taps;
  for (const auto& m : recording.markers) {
    if (m.kind != MarkerKind::tap) continue;
    taps.push_back(m.time_s);
    const std::ptrdiff_t end = sample_at_or_after(m.time_s, recording.rate);
    if (end < static_cast<std::ptrdiff_t>(window) ||
        end > static_cast<std::ptrdiff_t>(power.size())) {
      continue;
    }
    traces.emplace_back(power.begin() + (end - static_cast<std::ptrdiff_t>(window)),
                        power.begin() + end);
  }
  if (traces.empty()) fail(ErrorKind::detection, "no tap has a full second of EMG before it");
  return detect_onset(traces, taps, recording.rate, percentile);
}

TrainingSet build_training_set(const Recording& eeg, std::span<const double> onsets_s,
                               const TrainingSetConfig& config) {
  const auto fixations = eeg.markers_of(MarkerKind::fixation_onset);
  TrainingSet out;
  for (std::size_t t = 0; t < onsets_s.size(); ++t) {
    const double onset = onsets_s[t];
    TrialLabel audit{static_cast<int>(t), onset, false};

    // Fixation onset of this trial: the last one before the movement.
    const auto fix = std::find_if(fixations.rbegin(), fixations.rend(),
                                  [&](const Marker& m) { return m.time_s < onset; });
    bool ok = fix != fixations.rend();
    if (ok) {
      const double idle_start = fix->time_s + config.idle_offset_ms / 1000.0;
      const double idle_end = idle_start + config.window_ms / 1000.0;
      ok = idle_end <= onset - config.window_ms / 1000.0 + 1e-9;
      if (ok) {
        try {
          LabeledSegment pre{epoch_extract(eeg, onset, -config.window_ms, 0.0),
                             SegmentLabel::pre_movement, static_cast<int>(t)};
          LabeledSegment idle{epoch_extract(eeg, idle_start, 0.0, config.window_ms),
                              SegmentLabel::idle, static_cast<int>(t)};
          pre.segment.label = SegmentLabel::pre_movement;
          idle.segment.label = SegmentLabel::idle;
          out.segments.push_back(std::move(pre));
          out.segments.push_back(std::move(idle));
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::bounds) throw;
          ok = false;
        }
      }
    }
    if (!ok) ++out.skipped;
    audit.kept = ok;
    out.audit.push_back(audit);
  }
  return out;
}

namespace {

bool exceeds_amplitude(const Segment& seg, double limit) {
  return (seg.data.array().abs() > limit).any();
}

}  // namespace

RejectionResult reject_artifacts(const std::vector<LabeledSegment>& segments,
                                 const RejectionConfig& config) {
  if (segments.empty()) fail(ErrorKind::parameter, "no segments to screen");
  const auto n_ch = segments.front().segment.data.rows();

  // Per-segment, per-channel variance is fixed; only the medians move.
  std::vector<Eigen::VectorXd> variances;
  variances.reserve(segments.size());
  for (const auto& s : segments) {
    if (s.segment.data.rows() != n_ch) fail(ErrorKind::parameter, "segments differ in channels");
    const auto& d = s.segment.data;
    const Eigen::VectorXd mean = d.rowwise().mean();
    variances.push_back((d.colwise() - mean).array().square().rowwise().mean().matrix());
  }

  std::set<int> rejected;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (exceeds_amplitude(segments[i].segment, config.max_abs_uv)) rejected.insert(segments[i].trial);
  }

  for (;;) {
    std::vector<std::size_t> alive;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (!rejected.contains(segments[i].trial)) alive.push_back(i);
    }
    if (alive.empty()) break;
    Eigen::VectorXd medians(n_ch);
    std::vector<double> column(alive.size());
    for (Eigen::Index c = 0; c < n_ch; ++c) {
      for (std::size_t j = 0; j < alive.size(); ++j) column[j] = variances[alive[j]](c);
      medians(c) = stats::median(column);
    }
    bool changed = false;
    for (std::size_t i : alive) {
      if ((variances[i].array() > config.variance_factor * medians.array()).any()) {
        changed |= rejected.insert(segments[i].trial).second;
      }
    }
    if (!changed) break;
  }

  RejectionResult out;
  for (const auto& s : segments) {
    if (!rejected.contains(s.trial)) out.kept.push_back(s);
  }
  out.rejected_trials.assign(rejected.begin(), rejected.end());
  if (out.kept.empty()) fail(ErrorKind::empty_training_set, "every segment was rejected");
  return out;
}

void write_label_audit(const std::filesystem::path& path, const std::vector<TrialLabel>& audit,
                       const Provenance& provenance) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  write_provenance(out, provenance);
  out << "trial_idx\tonset_s\tkept\n";
  for (const auto& a : audit) {
    out << a.trial << "\t" << format_double(a.onset_s) << "\t" << (a.kept ? 1 : 0) << "\n";
  }
}

}  // namespace intentloop
