#include "intentloop/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "intentloop/error.hpp"
#include "intentloop/stats.hpp"

namespace intentloop {

std::string_view to_string(Condition condition) {
  switch (condition) {
    case Condition::intention: return "intention";
    case Condition::involuntary: return "involuntary";
    case Condition::augmented: return "augmented";
  }
  return "?";
}

Condition condition_from_string(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (Condition c : {Condition::intention, Condition::involuntary, Condition::augmented}) {
    if (lower == to_string(c)) return c;
  }
  fail(ErrorKind::parameter, "unknown condition '" + std::string(text) + "'");
}

const std::vector<std::string>& standard_montage() {
  static const std::vector<std::string> montage{
      "Fp1", "Fpz", "Fp2", "AF7", "AF3", "AFz", "AF4", "AF8", "F7",  "F5",  "F3",  "F1",  "Fz",
      "F2",  "F4",  "F6",  "F8",  "FT9", "FT7", "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6",
      "FT8", "FT10", "T7", "C5",  "C3",  "C1",  "Cz",  "C2",  "C4",  "C6",  "T8",  "TP7", "CP5",
      "CP3", "CP1", "CPz", "CP2", "CP4", "CP6", "TP8", "P7",  "P5",  "P3",  "P1",  "Pz",  "P2",
      "P4",  "P6",  "P8",  "PO7", "PO3", "POz", "PO4", "PO8", "O1",  "Oz",  "O2",  "Iz"};
  return montage;
}

std::vector<std::string> SynthConfig::eeg_channels() const {
  return channels.empty() ? standard_montage() : channels;
}

SynthConfig& SynthConfig::noise_free() {
  noise.rms_uv = 0.0;
  emg.background = false;
  rp.amp_jitter = 0.0;
  return *this;
}

void SynthConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::parameter, what);
  };
  require(n_trials > 0, "trials must be positive");
  require(rate > 0.0, "rate must be positive");
  require(rp.early_onset_ms < rp.late_onset_ms && rp.late_onset_ms < 0.0,
          "RP stages must satisfy early onset < late onset < 0");
  require(rp.recovery_ms > 0.0, "RP recovery must be positive");
  require(rp.amp_jitter >= 0.0, "RP jitter must be non-negative");
  require(noise.rms_uv >= 0.0, "noise rms must be non-negative");
  require(emg.lead_ms > 0.0 && emg.lead_ms <= 1000.0, "EMG lead must be in (0, 1000] ms");
  require(emg.burst_uv >= 0.0 && emg.decay_ms > 0.0 && emg.rise_samples >= 1,
          "invalid EMG burst shape");
  require(emg.band_low_hz > 0.0 && emg.band_low_hz < emg.band_high_hz, "invalid EMG band");
  require(erp.sigma_ms > 0.0, "ERP width must be positive");
  const auto& b = behavior;
  require(b.fixation_s > 0.0 && b.wait_min_s > 0.0 && b.wait_min_s <= b.wait_max_s,
          "invalid wait range");
  require(!b.tone_delays_ms.empty(), "at least one tone delay is required");
  for (double d : b.tone_delays_ms) require(d > 0.0, "tone delays must be positive");
  require(b.estimate_sd_ms >= 0.0 && b.quantize_ms >= 0.0, "invalid estimate noise");
  require(b.ems_to_tap_ms > 0.0, "EMS-to-tap delay must be positive");
  require(b.estimation_min_s > 0.0 && b.estimation_min_s <= b.estimation_max_s,
          "invalid estimation period");
  require(b.iti_min_s > 0.0 && b.iti_min_s <= b.iti_max_s, "invalid inter-trial interval");
  require(b.lead_in_s >= 2.5 && b.tail_s > 0.0, "lead-in must be at least 2.5 s");
  const auto eeg = eeg_channels();
  require(!eeg.empty(), "no EEG channels");
  require(std::find(eeg.begin(), eeg.end(), emg.channel) == eeg.end(),
          "EMG channel label collides with an EEG channel");
}

std::vector<double> spatial_weights(const RpConfig& rp, const std::vector<std::string>& channels) {
  std::vector<double> w(channels.size(), 0.0);
  for (const auto& [label, value] : rp.weights) {
    if (value < 0.0) fail(ErrorKind::parameter, "spatial weights must be non-negative");
    const auto pos = std::find(channels.begin(), channels.end(), label);
    if (pos != channels.end()) w[static_cast<std::size_t>(pos - channels.begin())] += value;
  }
  double total = 0.0;
  for (double v : w) total += v;
  if (total > 0.0) {
    for (double& v : w) v /= total;
  }
  return w;
}

double rp_value(const RpConfig& rp, double t_ms) {
  if (t_ms < rp.early_onset_ms) return 0.0;
  if (t_ms < rp.late_onset_ms) {
    return rp.early_amp_uv * (t_ms - rp.early_onset_ms) / (rp.late_onset_ms - rp.early_onset_ms);
  }
  if (t_ms < 0.0) {
    return rp.early_amp_uv +
           (rp.late_amp_uv - rp.early_amp_uv) * (t_ms - rp.late_onset_ms) / -rp.late_onset_ms;
  }
  if (t_ms < rp.recovery_ms) return rp.late_amp_uv * (1.0 - t_ms / rp.recovery_ms);
  return 0.0;
}

std::vector<double> rp_waveform(const RpConfig& rp, double rate) {
  const std::size_t n = window_samples(-rp.early_onset_ms, rate);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = rp_value(rp, rp.early_onset_ms + 1000.0 * static_cast<double>(i) / rate);
  }
  return out;
}

std::vector<double> pink_noise(std::size_t n, double exponent, double rms, Rng& rng) {
  std::vector<double> out(n, 0.0);
  if (n == 0 || rms == 0.0) return out;
  std::size_t m = 1;
  while (m < n) m <<= 1;
  std::vector<double> white(m);
  for (double& v : white) v = rng.normal();

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, white);
  spectrum.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t kk = std::min(k, m - k);
    spectrum[k] *= kk == 0 ? 0.0 : std::pow(static_cast<double>(kk), -exponent / 2.0);
  }
  std::vector<double> shaped;
  fft.inv(shaped, spectrum);

  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += shaped[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = shaped[i] - mean;
    ss += out[i] * out[i];
  }
  const double scale = ss > 0.0 ? rms / std::sqrt(ss / static_cast<double>(n)) : 0.0;
  for (double& v : out) v *= scale;
  return out;
}

std::vector<double> simulate_behavioral_estimates(std::span<const double> delays_ms,
                                                  Condition condition,
                                                  const BehaviorConfig& behavior, Rng& rng) {
  const double bias = behavior.bias_ms[static_cast<std::size_t>(condition)];
  std::vector<double> out;
  out.reserve(delays_ms.size());
  for (double d : delays_ms) {
    double e = d + bias + (behavior.estimate_sd_ms > 0.0 ? rng.normal(0.0, behavior.estimate_sd_ms) : 0.0);
    if (behavior.quantize_ms > 0.0) e = std::round(e / behavior.quantize_ms) * behavior.quantize_ms;
    out.push_back(e);
  }
  return out;
}

std::vector<double> SynthGroundTruth::onsets() const {
  std::vector<double> out;
  for (const auto& t : trials) out.push_back(t.onset_s);
  return out;
}

std::vector<double> SynthGroundTruth::taps() const {
  std::vector<double> out;
  for (const auto& t : trials) out.push_back(t.tap_s);
  return out;
}

SynthSession generate_session(const SynthConfig& config, Condition condition,
                              std::span<const double> intention_rts_s) {
  config.validate();
  const double rate = config.rate;
  const auto& b = config.behavior;
  const std::uint64_t base = Rng::derive(config.seed, 0x5e55'0000ULL + static_cast<std::uint64_t>(condition));
  Rng sched(Rng::derive(base, 1));
  Rng jitter(Rng::derive(base, 2));
  Rng behave(Rng::derive(base, 3));
  Rng emg_rng(Rng::derive(base, 4));

  auto to_index = [&](double t) { return sample_at_or_after(t, rate); };
  auto to_time = [&](std::ptrdiff_t i) { return static_cast<double>(i) / rate; };
  auto snap = [&](double t) { return to_time(to_index(t)); };
  auto samples_of = [&](double ms) { return static_cast<std::ptrdiff_t>(window_samples(ms, rate)); };

  double rt_lo = b.wait_min_s + 0.05 * (b.wait_max_s - b.wait_min_s);
  double rt_hi = b.wait_min_s + 0.95 * (b.wait_max_s - b.wait_min_s);
  if (!intention_rts_s.empty()) {
    rt_lo = stats::quantile(intention_rts_s, 0.05);
    rt_hi = stats::quantile(intention_rts_s, 0.95);
  }

  std::vector<double> delays;
  while (delays.size() < config.n_trials) {
    for (double d : b.tone_delays_ms) {
      if (delays.size() < config.n_trials) delays.push_back(d);
    }
  }
  sched.shuffle(delays);

  SynthSession session;
  SynthGroundTruth& truth = session.truth;
  truth.condition = condition;
  truth.onset_offset_ms = condition == Condition::involuntary ? b.ems_to_tap_ms : config.emg.lead_ms;

  std::vector<Marker> markers;
  double cursor = snap(b.lead_in_s);
  for (std::size_t i = 0; i < config.n_trials; ++i) {
    SynthTrial t;
    t.index = static_cast<int>(i);
    t.condition = condition;
    t.fixation_onset_s = cursor;
    t.fixation_offset_s = snap(cursor + b.fixation_s);
    if (condition == Condition::involuntary) {
      const std::ptrdiff_t ems = to_index(t.fixation_offset_s + sched.uniform(rt_lo, rt_hi));
      t.ems_s = to_time(ems);
      t.onset_s = t.ems_s;
      t.tap_s = to_time(ems + samples_of(b.ems_to_tap_ms));
    } else {
      const std::ptrdiff_t onset =
          to_index(t.fixation_offset_s + sched.uniform(b.wait_min_s, b.wait_max_s));
      t.onset_s = to_time(onset);
      t.tap_s = to_time(onset + samples_of(config.emg.lead_ms));
      t.rp_scale = std::max(0.0, 1.0 + (config.rp.amp_jitter > 0.0
                                            ? jitter.normal(0.0, config.rp.amp_jitter)
                                            : 0.0));
    }
    t.tone_delay_ms = delays[i];
    const double tone = t.tap_s + t.tone_delay_ms / 1000.0;
    const double estimate_at = tone + sched.uniform(b.estimation_min_s, b.estimation_max_s);
    const double trial_end = estimate_at + 0.5;

    markers.push_back({t.fixation_onset_s, MarkerKind::fixation_onset, std::to_string(i)});
    markers.push_back({t.fixation_offset_s, MarkerKind::fixation_offset, std::to_string(i)});
    if (t.has_ems()) markers.push_back({t.ems_s, MarkerKind::ems, std::to_string(i)});
    markers.push_back({t.tap_s, MarkerKind::tap, std::to_string(i)});
    markers.push_back({tone, MarkerKind::tone, format_double(t.tone_delay_ms)});
    markers.push_back({estimate_at, MarkerKind::estimate, ""});
    markers.push_back({trial_end, MarkerKind::trial_end, std::to_string(i)});

    truth.trials.push_back(t);
    cursor = snap(trial_end + sched.uniform(b.iti_min_s, b.iti_max_s));
  }

  const auto estimates = simulate_behavioral_estimates(delays, condition, b, behave);
  for (std::size_t i = 0; i < truth.trials.size(); ++i) {
    truth.trials[i].estimate_ms = estimates[i];
    for (auto& m : markers) {
      if (m.kind == MarkerKind::estimate && m.payload.empty()) {
        m.payload = format_double(estimates[i]);
        break;
      }
    }
  }

  const double end_s = markers.back().time_s + b.tail_s;
  const auto n = static_cast<std::size_t>(to_index(end_s));
  const std::vector<std::string> eeg = config.eeg_channels();
  Recording& rec = session.recording;
  rec.rate = rate;
  rec.channels = eeg;
  rec.channels.push_back(config.emg.channel);
  rec.data = Matrix::Zero(static_cast<Eigen::Index>(rec.channels.size()), static_cast<Eigen::Index>(n));

  for (std::size_t c = 0; c < eeg.size(); ++c) {
    Rng noise_rng(Rng::derive(base, 0x100 + c));
    const auto noise = pink_noise(n, config.noise.exponent, config.noise.rms_uv, noise_rng);
    rec.data.row(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::RowVectorXd>(
        noise.data(), static_cast<Eigen::Index>(n));
  }

  const auto weights = spatial_weights(config.rp, eeg);
  const double w_max = weights.empty() ? 0.0 : *std::max_element(weights.begin(), weights.end());
  for (std::size_t c = 0; c < eeg.size(); ++c) {
    if (weights[c] > 0.0) truth.weights.emplace_back(eeg[c], weights[c]);
  }

  const auto erp_row = std::find(eeg.begin(), eeg.end(), config.erp.channel);
  const double erp_amp = config.erp.amp_uv[static_cast<std::size_t>(condition)];
  const double erp_peak = config.erp.peak_ms[static_cast<std::size_t>(condition)];
  const auto early = samples_of(-config.rp.early_onset_ms);
  const auto recovery = samples_of(config.rp.recovery_ms);

  for (const auto& t : truth.trials) {
    const std::ptrdiff_t onset = to_index(t.onset_s);
    if (t.rp_scale > 0.0 && w_max > 0.0) {
      for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, onset - early);
           i < std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n), onset + recovery); ++i) {
        const double v = t.rp_scale * rp_value(config.rp, 1000.0 * to_time(i - onset));
        if (v == 0.0) continue;
        for (std::size_t c = 0; c < eeg.size(); ++c) {
          if (weights[c] > 0.0) rec.data(static_cast<Eigen::Index>(c), i) += v * weights[c] / w_max;
        }
      }
    }
    if (erp_row != eeg.end() && erp_amp != 0.0) {
      const auto row = static_cast<Eigen::Index>(erp_row - eeg.begin());
      const double reach = erp_peak + 5.0 * config.erp.sigma_ms;
      const double start = erp_peak - 5.0 * config.erp.sigma_ms;
      for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, onset + static_cast<std::ptrdiff_t>(std::floor(start * rate / 1000.0)));
           i < std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n), onset + samples_of(reach)); ++i) {
        const double dt = 1000.0 * to_time(i - onset) - erp_peak;
        rec.data(row, i) +=
            erp_amp * std::exp(-dt * dt / (2.0 * config.erp.sigma_ms * config.erp.sigma_ms));
      }
    }
  }

  // EMG: band-limited carrier under a per-trial burst envelope, plus background.
  {
    const auto& e = config.emg;
    std::vector<double> white(n);
    for (double& v : white) v = emg_rng.normal();
    const FilterSpec band =
        design_bandpass(e.band_low_hz, std::min(e.band_high_hz, 0.45 * rate), rate, 4);
    std::vector<double> carrier = filter_zero_phase(band, white);
    double ss = 0.0;
    for (double v : carrier) ss += v * v;
    const double norm = ss > 0.0 ? std::sqrt(ss / static_cast<double>(n)) : 1.0;

    std::vector<double> envelope(n, 0.0);
    const double tau = e.decay_ms * rate / 1000.0;
    for (const auto& t : truth.trials) {
      const std::ptrdiff_t onset = to_index(t.onset_s);
      const std::ptrdiff_t stop = to_index(t.tap_s) + samples_of(e.tail_ms);
      for (std::ptrdiff_t i = onset; i < std::min<std::ptrdiff_t>(stop, static_cast<std::ptrdiff_t>(n)); ++i) {
        const std::ptrdiff_t k = i - onset;
        double env;
        if (k < e.rise_samples - 1) {
          env = static_cast<double>(k + 1) / e.rise_samples;
        } else {
          const double since_peak = static_cast<double>(k - (e.rise_samples - 1));
          env = e.sustain + (1.0 - e.sustain) * std::exp(-since_peak / tau);
        }
        envelope[static_cast<std::size_t>(i)] = std::max(envelope[static_cast<std::size_t>(i)], env);
      }
    }
    const double background = e.background ? e.burst_uv / std::pow(10.0, e.snr_db / 20.0) : 0.0;
    const auto row = static_cast<Eigen::Index>(eeg.size());
    for (std::size_t i = 0; i < n; ++i) {
      double v = e.burst_uv * envelope[i] * carrier[i] / norm;
      if (background > 0.0) v += background * emg_rng.normal();
      rec.data(row, static_cast<Eigen::Index>(i)) = v;
    }
  }

  rec.data = rec.data.cast<float>().cast<double>();
  std::stable_sort(markers.begin(), markers.end(),
                   [](const Marker& a, const Marker& b2) { return a.time_s < b2.time_s; });
  rec.markers = std::move(markers);
  rec.validate();
  return session;
}

// ---------------------------------------------------------------------------
// Ground truth sidecar

void write_ground_truth(const std::filesystem::path& path, const SynthGroundTruth& truth,
                        const Provenance& provenance) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  write_provenance(out, provenance);
  out << "# condition=" << to_string(truth.condition) << "\n";
  out << "# onset_offset_ms=" << format_double(truth.onset_offset_ms) << "\n";
  for (const auto& [label, w] : truth.weights) {
    out << "# weight." << label << "=" << format_double(w) << "\n";
  }
  out << "trial\tcondition\tfixation_onset_s\tfixation_offset_s\tonset_s\ttap_s\tems_s\t"
         "tone_delay_ms\testimate_ms\trp_scale\n";
  for (const auto& t : truth.trials) {
    out << t.index << '\t' << to_string(t.condition) << '\t' << format_double(t.fixation_onset_s)
        << '\t' << format_double(t.fixation_offset_s) << '\t' << format_double(t.onset_s) << '\t'
        << format_double(t.tap_s) << '\t' << (t.has_ems() ? format_double(t.ems_s) : "") << '\t'
        << format_double(t.tone_delay_ms) << '\t' << format_double(t.estimate_ms) << '\t'
        << format_double(t.rp_scale) << '\n';
  }
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

SynthGroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  SynthGroundTruth truth;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      const std::string value = line.substr(eq + 1);
      if (key == "condition") {
        truth.condition = condition_from_string(value);
      } else if (key == "onset_offset_ms") {
        truth.onset_offset_ms = parse_double(value);
      } else if (key.starts_with("weight.")) {
        truth.weights.emplace_back(key.substr(7), parse_double(value));
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> cols;
    std::size_t pos = 0;
    while (true) {
      const auto tab = line.find('\t', pos);
      cols.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (cols.size() != 10) fail(ErrorKind::format, "ground truth row needs 10 columns: " + line);
    SynthTrial t;
    t.index = std::stoi(cols[0]);
    t.condition = condition_from_string(cols[1]);
    t.fixation_onset_s = parse_double(cols[2]);
    t.fixation_offset_s = parse_double(cols[3]);
    t.onset_s = parse_double(cols[4]);
    t.tap_s = parse_double(cols[5]);
    t.ems_s = cols[6].empty() ? -1.0 : parse_double(cols[6]);
    t.tone_delay_ms = parse_double(cols[7]);
    t.estimate_ms = parse_double(cols[8]);
    t.rp_scale = parse_double(cols[9]);
    truth.trials.push_back(t);
  }
  return truth;
}

// ---------------------------------------------------------------------------
// key=value options

namespace {

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + format_double(values[i]);
  return out;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(sep, pos);
    out.emplace_back(text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::vector<double> parse_list(std::string_view text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_double(item));
  return out;
}

template <std::size_t N>
std::array<double, N> parse_array(std::string_view text, std::string_view key) {
  const auto values = parse_list(text);
  if (values.size() != N) {
    fail(ErrorKind::usage, std::string(key) + " expects " + std::to_string(N) + " comma-separated values");
  }
  std::array<double, N> out{};
  std::copy(values.begin(), values.end(), out.begin());
  return out;
}

bool parse_bool(std::string_view text) {
  if (text == "1" || text == "true" || text == "on" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "off" || text == "no") return false;
  fail(ErrorKind::usage, "expected a boolean, got '" + std::string(text) + "'");
}

struct Option {
  const char* key;
  std::function<std::string(const SynthConfig&)> get;
  std::function<void(SynthConfig&, std::string_view)> set;
};

template <typename Ref>
Option numeric(const char* key, Ref ref) {
  return {key, [ref](const SynthConfig& c) { return format_double(ref(c)); },
          [ref](SynthConfig& c, std::string_view v) { ref(c) = parse_double(v); }};
}

const std::vector<Option>& options() {
  static const std::vector<Option> table{
      {"trials", [](const SynthConfig& c) { return std::to_string(c.n_trials); },
       [](SynthConfig& c, std::string_view v) {
         const double t = parse_double(v);
         if (t < 1 || t != std::floor(t)) fail(ErrorKind::usage, "trials must be a positive integer");
         c.n_trials = static_cast<std::size_t>(t);
       }},
      numeric("rate", [](auto& c) -> auto& { return c.rate; }),
      {"seed", [](const SynthConfig& c) { return std::to_string(c.seed); },
       [](SynthConfig& c, std::string_view v) { c.seed = std::stoull(std::string(v)); }},
      {"channels",
       [](const SynthConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.channels.size(); ++i) out += (i ? "," : "") + c.channels[i];
         return out;
       },
       [](SynthConfig& c, std::string_view v) { c.channels = split(v, ','); }},
      numeric("rp.early_onset_ms", [](auto& c) -> auto& { return c.rp.early_onset_ms; }),
      numeric("rp.early_amp_uv", [](auto& c) -> auto& { return c.rp.early_amp_uv; }),
      numeric("rp.late_onset_ms", [](auto& c) -> auto& { return c.rp.late_onset_ms; }),
      numeric("rp.late_amp_uv", [](auto& c) -> auto& { return c.rp.late_amp_uv; }),
      numeric("rp.recovery_ms", [](auto& c) -> auto& { return c.rp.recovery_ms; }),
      numeric("rp.amp_jitter", [](auto& c) -> auto& { return c.rp.amp_jitter; }),
      {"rp.weights",
       [](const SynthConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.rp.weights.size(); ++i) {
           out += (i ? "," : "") + c.rp.weights[i].first + ":" + format_double(c.rp.weights[i].second);
         }
         return out;
       },
       [](SynthConfig& c, std::string_view v) {
         c.rp.weights.clear();
         for (const auto& item : split(v, ',')) {
           const auto colon = item.find(':');
           if (colon == std::string::npos) fail(ErrorKind::usage, "rp.weights items are label:weight");
           c.rp.weights.emplace_back(item.substr(0, colon), parse_double(item.substr(colon + 1)));
         }
       }},
      {"erp.channel", [](const SynthConfig& c) { return c.erp.channel; },
       [](SynthConfig& c, std::string_view v) { c.erp.channel = std::string(v); }},
      {"erp.amp_uv", [](const SynthConfig& c) { return join({c.erp.amp_uv.begin(), c.erp.amp_uv.end()}); },
       [](SynthConfig& c, std::string_view v) { c.erp.amp_uv = parse_array<3>(v, "erp.amp_uv"); }},
      {"erp.peak_ms", [](const SynthConfig& c) { return join({c.erp.peak_ms.begin(), c.erp.peak_ms.end()}); },
       [](SynthConfig& c, std::string_view v) { c.erp.peak_ms = parse_array<3>(v, "erp.peak_ms"); }},
      numeric("erp.sigma_ms", [](auto& c) -> auto& { return c.erp.sigma_ms; }),
      numeric("noise.exponent", [](auto& c) -> auto& { return c.noise.exponent; }),
      numeric("noise.rms_uv", [](auto& c) -> auto& { return c.noise.rms_uv; }),
      {"emg.channel", [](const SynthConfig& c) { return c.emg.channel; },
       [](SynthConfig& c, std::string_view v) { c.emg.channel = std::string(v); }},
      numeric("emg.lead_ms", [](auto& c) -> auto& { return c.emg.lead_ms; }),
      numeric("emg.band_low_hz", [](auto& c) -> auto& { return c.emg.band_low_hz; }),
      numeric("emg.band_high_hz", [](auto& c) -> auto& { return c.emg.band_high_hz; }),
      numeric("emg.burst_uv", [](auto& c) -> auto& { return c.emg.burst_uv; }),
      numeric("emg.snr_db", [](auto& c) -> auto& { return c.emg.snr_db; }),
      {"emg.background", [](const SynthConfig& c) { return std::string(c.emg.background ? "1" : "0"); },
       [](SynthConfig& c, std::string_view v) { c.emg.background = parse_bool(v); }},
      numeric("emg.decay_ms", [](auto& c) -> auto& { return c.emg.decay_ms; }),
      numeric("emg.sustain", [](auto& c) -> auto& { return c.emg.sustain; }),
      numeric("emg.tail_ms", [](auto& c) -> auto& { return c.emg.tail_ms; }),
      {"emg.rise_samples", [](const SynthConfig& c) { return std::to_string(c.emg.rise_samples); },
       [](SynthConfig& c, std::string_view v) { c.emg.rise_samples = std::stoi(std::string(v)); }},
      numeric("behavior.fixation_s", [](auto& c) -> auto& { return c.behavior.fixation_s; }),
      numeric("behavior.wait_min_s", [](auto& c) -> auto& { return c.behavior.wait_min_s; }),
      numeric("behavior.wait_max_s", [](auto& c) -> auto& { return c.behavior.wait_max_s; }),
      {"behavior.tone_delays_ms", [](const SynthConfig& c) { return join(c.behavior.tone_delays_ms); },
       [](SynthConfig& c, std::string_view v) { c.behavior.tone_delays_ms = parse_list(v); }},
      {"behavior.bias_ms",
       [](const SynthConfig& c) { return join({c.behavior.bias_ms.begin(), c.behavior.bias_ms.end()}); },
       [](SynthConfig& c, std::string_view v) { c.behavior.bias_ms = parse_array<3>(v, "behavior.bias_ms"); }},
      numeric("behavior.estimate_sd_ms", [](auto& c) -> auto& { return c.behavior.estimate_sd_ms; }),
      numeric("behavior.quantize_ms", [](auto& c) -> auto& { return c.behavior.quantize_ms; }),
      numeric("behavior.ems_to_tap_ms", [](auto& c) -> auto& { return c.behavior.ems_to_tap_ms; }),
      numeric("behavior.estimation_min_s", [](auto& c) -> auto& { return c.behavior.estimation_min_s; }),
      numeric("behavior.estimation_max_s", [](auto& c) -> auto& { return c.behavior.estimation_max_s; }),
      numeric("behavior.iti_min_s", [](auto& c) -> auto& { return c.behavior.iti_min_s; }),
      numeric("behavior.iti_max_s", [](auto& c) -> auto& { return c.behavior.iti_max_s; }),
      numeric("behavior.lead_in_s", [](auto& c) -> auto& { return c.behavior.lead_in_s; }),
      numeric("behavior.tail_s", [](auto& c) -> auto& { return c.behavior.tail_s; }),
  };
  return table;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> synth_options(const SynthConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& o : options()) out.emplace_back(o.key, o.get(config));
  return out;
}

void apply_synth_option(SynthConfig& config, std::string_view key, std::string_view value) {
  for (const auto& o : options()) {
    if (key == o.key) {
      try {
        o.set(config, value);
      } catch (const Error&) {
        throw;
      } catch (const std::exception&) {
        fail(ErrorKind::usage, "bad value '" + std::string(value) + "' for " + std::string(key));
      }
      return;
    }
  }
  fail(ErrorKind::usage, "unknown generator option '" + std::string(key) + "'");
}

}  // namespace intentloop
