#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "intentloop/dsp.hpp"
#include "intentloop/session_io.hpp"

namespace intentloop {

/// EMG-derived movement onset: how long before the tap the muscle activates.
struct OnsetResult {
  double onset_offset_ms = 0.0;      ///< the "EMG delay", in [0, 1000]
  std::vector<double> onsets_s;      ///< tap - offset, one per trial
  std::vector<double> averaged_trace;
  double threshold = 0.0;            ///< percentile level of the averaged trace
  std::size_t crossing_index = 0;    ///< within the averaged pre-tap window
};

/// Band-pass 20-100 Hz (zero-phase) and square.
std::vector<double> emg_power(std::span<const double> raw_emg, double rate);

/// Averages the per-trial pre-tap power windows sample by sample, takes the
/// `percentile` of the averaged trace, and reports the first sample at or above
/// it. Every trace must have the same length (the pre-tap window). Throws a
/// detection error for a flat averaged trace.
OnsetResult detect_onset(const std::vector<std::vector<double>>& pre_tap_power,
                         std::span<const double> tap_times_s, double rate,
                         double percentile = 95.0);

/// Convenience over a recording: power of `emg_channel`, the 1 s before each
/// tap marker that fits, then `detect_onset`. Onsets are reported for every tap.
OnsetResult detect_onset(const Recording& recording, const std::string& emg_channel = "EMG",
                         double percentile = 95.0);

struct LabeledSegment {
  Segment segment;
  SegmentLabel label = SegmentLabel::idle;
  int trial = -1;
};

struct TrainingSetConfig {
  double window_ms = 1000.0;
  /// Idle window start relative to fixation-cross onset.
  double idle_offset_ms = 500.0;
};

struct TrialLabel {
  int trial = 0;
  double onset_s = 0.0;
  bool kept = false;
};

struct TrainingSet {
  std::vector<LabeledSegment> segments;
  std::size_t skipped = 0;
  std::vector<TrialLabel> audit;
};

/// One pre-movement window ending at each onset and one idle window after the
/// trial's fixation-cross onset. Trials whose windows leave the recording, or
/// that have no preceding fixation onset, are skipped and counted.
TrainingSet build_training_set(const Recording& eeg, std::span<const double> onsets_s,
                               const TrainingSetConfig& config = {});

struct RejectionConfig {
  double max_abs_uv = 100.0;
  double variance_factor = 5.0;
};

struct RejectionResult {
  std::vector<LabeledSegment> kept;
  std::vector<int> rejected_trials;
};

/// Drops both segments of a trial when either fails the amplitude or variance
/// rule; repeated until no further trial is dropped. Throws an
/// empty-training-set error when nothing survives.
RejectionResult reject_artifacts(const std::vector<LabeledSegment>& segments,
                                 const RejectionConfig& config = {});

/// `trial_idx<TAB>onset_s<TAB>kept`.
void write_label_audit(const std::filesystem::path& path, const std::vector<TrialLabel>& audit,
                       const Provenance& provenance = {});

}  // namespace intentloop
