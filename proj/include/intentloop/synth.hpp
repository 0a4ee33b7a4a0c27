#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "intentloop/dsp.hpp"
#include "intentloop/random.hpp"
#include "intentloop/session_io.hpp"

namespace intentloop {

enum class Condition { intention = 0, involuntary = 1, augmented = 2 };

std::string_view to_string(Condition condition);
/// Case-insensitive; throws a parameter error for unknown names.
Condition condition_from_string(std::string_view text);

/// Two-stage readiness potential plus a linear return to baseline.
struct RpConfig {
  double early_onset_ms = -2000.0;
  double early_amp_uv = -2.0;
  double late_onset_ms = -400.0;
  double late_amp_uv = -8.0;
  double recovery_ms = 500.0;
  /// Per-trial amplitude scale ~ N(1, jitter), floored at 0.
  double amp_jitter = 0.2;
  /// Relative spatial weights before normalization; peak channels get the
  /// full template.
  std::vector<std::pair<std::string, double>> weights{
      {"Cz", 1.0},  {"C3", 1.0},  {"C1", 0.6},  {"FCz", 0.5}, {"FC1", 0.5}, {"FC3", 0.4},
      {"CP1", 0.4}, {"CP3", 0.3}, {"C5", 0.3},  {"CPz", 0.3}, {"C2", 0.3}};
};

/// Post-onset negativity at one electrode, per condition.
struct ErpInjection {
  std::string channel = "FCz";
  std::array<double, 3> amp_uv{-2.0, -10.0, -6.0};
  std::array<double, 3> peak_ms{150.0, 210.0, 210.0};
  double sigma_ms = 35.0;
};

struct NoiseConfig {
  double exponent = 1.0;  ///< power ~ 1/f^exponent
  double rms_uv = 6.5;
};

struct EmgConfig {
  std::string channel = "EMG";
  double lead_ms = 280.0;  ///< movement onset to tap
  double band_low_hz = 20.0;
  double band_high_hz = 150.0;
  double burst_uv = 50.0;
  double snr_db = 20.0;  ///< burst peak power over background power
  bool background = true;
  double decay_ms = 40.0;
  double sustain = 0.5;
  double tail_ms = 100.0;  ///< burst continues past the tap
  int rise_samples = 1;
};

struct BehaviorConfig {
  double fixation_s = 2.0;
  double wait_min_s = 2.0;
  double wait_max_s = 3.0;
  std::vector<double> tone_delays_ms{200.0, 350.0, 500.0};
  std::array<double, 3> bias_ms{-160.0, -135.0, -162.0};
  double estimate_sd_ms = 100.0;
  double quantize_ms = 0.0;  ///< 0 leaves estimates continuous
  double ems_to_tap_ms = 150.0;
  double estimation_min_s = 2.0;
  double estimation_max_s = 3.0;
  double iti_min_s = 1.0;
  double iti_max_s = 1.5;
  double lead_in_s = 5.0;
  double tail_s = 3.0;
};

struct SynthConfig {
  std::size_t n_trials = 75;
  double rate = 250.0;
  std::vector<std::string> channels;  ///< empty selects the 64-channel montage
  RpConfig rp;
  ErpInjection erp;
  NoiseConfig noise;
  EmgConfig emg;
  BehaviorConfig behavior;
  std::uint64_t seed = 1;

  std::vector<std::string> eeg_channels() const;
  /// Zero EEG noise and no EMG background.
  SynthConfig& noise_free();
  void validate() const;
};

/// The standard 64-electrode 10-20 montage, including Cz, C3, C4 and FCz.
const std::vector<std::string>& standard_montage();

/// Weights over `channels` summing to 1 (zero for channels not listed).
std::vector<double> spatial_weights(const RpConfig& rp, const std::vector<std::string>& channels);

/// Template sampled at `rate` from early_onset_ms up to (not including) 0 ms.
std::vector<double> rp_waveform(const RpConfig& rp, double rate);
/// Template value at `t_ms` relative to movement onset, recovery included.
double rp_value(const RpConfig& rp, double t_ms);

struct SynthTrial {
  int index = 0;
  Condition condition = Condition::intention;
  double fixation_onset_s = 0.0;
  double fixation_offset_s = 0.0;
  double onset_s = 0.0;  ///< movement onset (EMS onset for involuntary trials)
  double tap_s = 0.0;
  double ems_s = -1.0;   ///< negative when no scripted trigger
  double tone_delay_ms = 0.0;
  double estimate_ms = 0.0;
  double rp_scale = 0.0;

  bool has_ems() const { return ems_s >= 0.0; }
  double reaction_s() const { return (has_ems() ? ems_s : onset_s) - fixation_offset_s; }
};

struct SynthGroundTruth {
  Condition condition = Condition::intention;
  double onset_offset_ms = 0.0;
  std::vector<std::pair<std::string, double>> weights;  ///< normalized, nonzero only
  std::vector<SynthTrial> trials;

  std::vector<double> onsets() const;
  std::vector<double> taps() const;
};

struct SynthSession {
  Recording recording;
  SynthGroundTruth truth;
};

/// Simulated session. Involuntary triggers are drawn uniformly between the
/// 5th and 95th percentile of `intention_rts_s` (or of the configured wait
/// range when empty). Samples are rounded to f32 so the recording equals its
/// saved form.
SynthSession generate_session(const SynthConfig& config, Condition condition,
                              std::span<const double> intention_rts_s = {});

/// Estimate = true delay + condition bias + N(0, sd), optionally quantized.
std::vector<double> simulate_behavioral_estimates(std::span<const double> delays_ms,
                                                  Condition condition,
                                                  const BehaviorConfig& behavior, Rng& rng);

/// Pink noise with the given exponent and rms, via spectral shaping.
std::vector<double> pink_noise(std::size_t n, double exponent, double rms, Rng& rng);

void write_ground_truth(const std::filesystem::path& path, const SynthGroundTruth& truth,
                        const Provenance& provenance = {});
SynthGroundTruth read_ground_truth(const std::filesystem::path& path);

/// key=value view of a configuration, in a stable order.
std::vector<std::pair<std::string, std::string>> synth_options(const SynthConfig& config);
/// Applies one key=value pair; throws a usage error for unknown keys.
void apply_synth_option(SynthConfig& config, std::string_view key, std::string_view value);

}  // namespace intentloop
