#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intentloop/actuator.hpp"
#include "intentloop/dsp.hpp"
#include "intentloop/model.hpp"
#include "intentloop/random.hpp"
#include "intentloop/realtime.hpp"
#include "intentloop/session_io.hpp"
#include "intentloop/synth.hpp"

namespace intentloop {

// ---------------------------------------------------------------------------
// Trial screening and intentional binding

/// Keep mask for Q1 - k*IQR <= v <= Q3 + k*IQR (type-7 quartiles). Needs at
/// least four values.
std::vector<bool> tukey_reject(std::span<const double> values, double k = 3.0);

struct TrialRow {
  int trial = 0;
  Condition condition = Condition::intention;
  double fixation_offset_s = 0.0;
  double tap_s = 0.0;
  double ems_s = -1.0;  ///< negative: no stimulation in this trial
  double tone_delay_ms = 0.0;
  double estimate_ms = 0.0;
  bool kept = true;
  std::string reason;

  bool has_ems() const { return ems_s >= 0.0; }
  /// Stimulation arrived before the tap.
  bool ems_controlled() const { return has_ems() && ems_s <= tap_s; }
  double delta_ms() const { return estimate_ms - tone_delay_ms; }
};

using TrialTable = std::vector<TrialRow>;

TrialTable trial_table(const SynthGroundTruth& truth);
/// Rows from a marker stream (fixation offset, optional EMS, tap, tone delay
/// payload, estimate payload).
TrialTable trial_table(const std::vector<Marker>& markers, Condition condition);
/// Adds closed-loop pulses as stimulation times; trial indices follow the gate's
/// fixation-offset count.
void attach_pulses(TrialTable& table, const std::vector<PulseLogEntry>& pulses);

struct ScreenConfig {
  double tukey_k = 3.0;
  double ems_tap_window_ms = 350.0;
};

/// Per condition: Tukey on fixation-offset-to-tap latency, Tukey on estimates,
/// the hard EMS-to-tap window, then Tukey on the EMS-to-tap delta. Every
/// screen sees the full condition population, so the result is idempotent.
TrialTable screen_trials(const TrialTable& table, const ScreenConfig& config = {});

struct BindingRow {
  std::string group;  ///< condition name, or augmented/ems and augmented/self
  std::size_t n = 0;
  double mean_ms = 0.0;
  double sd_ms = 0.0;
};

struct BindingSummary {
  std::vector<BindingRow> rows;
  std::vector<std::string> warnings;

  const BindingRow* find(std::string_view group) const;
};

/// Mean and SD of estimate minus true delay over kept trials.
BindingSummary binding_summary(const TrialTable& table);

// ---------------------------------------------------------------------------
// ERPs

struct EpochConfig {
  double start_ms = -1000.0;
  double end_ms = 500.0;
  double baseline_start_ms = -1000.0;
  double baseline_end_ms = -900.0;
  double band_low_hz = 0.1;
  double band_high_hz = 15.0;
  int order = 4;
};

struct Erp {
  std::string channel;
  double rate = 250.0;
  std::vector<double> times_ms;
  Matrix epochs;      ///< one baseline-corrected row per trial
  Vector mean;

  std::size_t count() const { return static_cast<std::size_t>(epochs.rows()); }
  /// Mean amplitude of the average over [from_ms, to_ms).
  double window_mean(double from_ms, double to_ms) const;
};

/// Zero-phase band-pass of `channel`, epochs around each onset that fits,
/// baseline subtraction. Throws an empty-condition error if none fits.
Erp erp_extract(const Recording& recording, std::span<const double> onsets_s,
                const std::string& channel, const EpochConfig& config = {});

// ---------------------------------------------------------------------------
// Permutation statistics

struct PermutationConfig {
  std::size_t permutations = 10000;
  std::uint64_t seed = 1;
};

/// One-sample t of `diffs` (0 when the spread is 0).
double t_statistic(std::span<const double> diffs);

/// Two-sided sign-flip permutation p-value of the one-sample t. Exhaustive
/// when 2^n <= permutations, otherwise Monte Carlo with (hits + 1) / (N + 1).
double paired_permutation_p(std::span<const double> diffs, const PermutationConfig& config = {});

struct ContrastResult {
  std::vector<double> times_ms;
  std::vector<double> t;
  std::vector<double> p;
  std::vector<double> p_adjusted;  ///< Benjamini-Hochberg over the epoch
  std::vector<bool> significant;
  double window_from_ms = 150.0;
  double window_to_ms = 250.0;
  double window_diff = 0.0;  ///< mean of a - b over participants
  double window_t = 0.0;
  double window_p = 1.0;
};

/// Paired contrast of per-participant average waveforms (rows = participants,
/// same order in both). Needs at least five participants.
ContrastResult contrast(const Matrix& a, const Matrix& b, const std::vector<double>& times_ms,
                        double window_from_ms = 150.0, double window_to_ms = 250.0,
                        double alpha = 0.05, const PermutationConfig& config = {});

// ---------------------------------------------------------------------------
// Classifier report

struct SessionReport {
  std::string session;
  double cv_f1 = 0.0;
  double cv_auc = 0.0;
  std::size_t chosen_k = 0;
  double threshold = 0.0;
  double heldout_f1 = 0.0;
  double heldout_fpr = 0.0;
  double heldout_tpr = 0.0;
  std::size_t heldout_segments = 0;
  std::size_t pulses = 0;
  std::size_t trials = 0;
  double pulse_error_mean_ms = 0.0;    ///< pulse time minus true onset
  double pulse_error_median_ms = 0.0;
  double preempted_fraction = 0.0;     ///< pulses before the true onset
  std::size_t ticks = 0;
};

struct HeldoutScores {
  std::vector<double> proba;
  std::vector<int> labels;
};

/// Posteriors of the model on labeled segments of a session built from the
/// given onsets, with the model's causal filter.
HeldoutScores heldout_scores(const IntentModel& model, const Recording& session,
                             std::span<const double> onsets_s);

/// Held-out metrics and a closed-loop replay of `session`.
SessionReport classifier_report(const std::string& name, const IntentModel& model,
                                const Recording& session, const SynthGroundTruth& truth,
                                const EngineConfig& engine = {});

/// Pulse timing against true onsets; fills the pulse fields of `report`.
void pulse_timing(SessionReport& report, const std::vector<PulseLogEntry>& pulses,
                  const SynthGroundTruth& truth);

/// Tidy `session,metric,value` rows.
void write_report_csv(const std::filesystem::path& path, const std::vector<SessionReport>& reports,
                      const Provenance& provenance = {});
void write_report_summary(std::ostream& out, const std::vector<SessionReport>& reports);
void write_erp_csv(const std::filesystem::path& path, const Erp& erp,
                   const Provenance& provenance = {});
void write_binding_csv(const std::filesystem::path& path, const BindingSummary& summary,
                       const Provenance& provenance = {});
void write_trial_table(const std::filesystem::path& path, const TrialTable& table,
                       const Provenance& provenance = {});

// ---------------------------------------------------------------------------
// SNR calibration

struct CalibrationConfig {
  double target_f1 = 0.71;
  std::size_t sessions = 4;
  double rms_lo = 1.0;
  double rms_hi = 60.0;
  std::size_t iterations = 8;
};

struct CalibrationStep {
  double rms_uv = 0.0;
  double mean_f1 = 0.0;
};

struct CalibrationResult {
  double rms_uv = 0.0;
  double mean_f1 = 0.0;
  std::vector<CalibrationStep> history;
};

/// Mean cross-validated F1 over `sessions` generated sessions (seeds derived
/// from `base.seed`).
double mean_cv_f1(const SynthConfig& base, std::size_t sessions);

/// Bisection on noise rms for a target mean cross-validated F1 (F1 falls as
/// noise grows).
CalibrationResult calibrate_noise(const SynthConfig& base, const CalibrationConfig& config = {});

}  // namespace intentloop
