#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace intentloop {

/// Channel-major sample matrix: one row per channel, one column per sample.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class MarkerKind {
  fixation_onset,
  fixation_offset,
  tap,
  tone,
  ems,
  estimate,
  trial_end,
};

std::string_view to_string(MarkerKind kind);
MarkerKind marker_kind_from_string(std::string_view text);

struct Marker {
  double time_s = 0.0;
  MarkerKind kind = MarkerKind::tap;
  std::string payload;
};

/// A multichannel recording in microvolts plus its event markers.
struct Recording {
  double rate = 250.0;
  std::vector<std::string> channels;
  Matrix data;
  std::vector<Marker> markers;

  std::size_t samples() const { return static_cast<std::size_t>(data.cols()); }
  double duration_s() const { return static_cast<double>(samples()) / rate; }
  std::optional<std::size_t> find_channel(std::string_view label) const;
  /// Throws a parameter error when the label is absent.
  std::size_t channel_index(std::string_view label) const;
  std::vector<Marker> markers_of(MarkerKind kind) const;
  /// Checks rate > 0, label count matches rows, markers sorted.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Filtering

/// One second-order section, a0 normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

/// Per-section delay line of a transposed direct form II cascade.
struct FilterState {
  std::vector<double> z;  // 2 entries per section
};

/// Causal Butterworth band-pass realized as a biquad cascade.
struct FilterSpec {
  double low_hz = 0.0;
  double high_hz = 0.0;
  double rate = 0.0;
  int order = 0;
  std::vector<Biquad> sections;

  /// Expanded transfer-function polynomials in powers of z^-1.
  std::vector<double> numerator() const;
  std::vector<double> denominator() const;
  FilterState initial_state() const;
  /// Complex frequency response from the cascade coefficients.
  std::complex<double> response(double freq_hz) const;
  /// All poles strictly inside the unit circle.
  bool stable() const;
};

/// Butterworth band-pass with an `order`-pole lowpass prototype (2*order poles
/// total). Throws a parameter error for invalid edges and a design error when
/// the digital poles leave the unit circle.
FilterSpec design_bandpass(double low_hz, double high_hz, double rate, int order = 4);

struct FilterResult {
  std::vector<double> signal;
  FilterState state;
};

/// Streams `signal` through the cascade starting from `carry` (zeros when
/// absent). Chunked application with the returned state equals one-shot.
FilterResult filter_apply(const FilterSpec& spec, std::span<const double> signal,
                          const std::optional<FilterState>& carry = std::nullopt);

void filter_inplace(const FilterSpec& spec, std::span<double> signal, FilterState& state);

/// Single-sample step for live use.
double filter_step(const FilterSpec& spec, FilterState& state, double x);

/// Causal filtering of every row from a zero state.
Matrix filter_rows(const FilterSpec& spec, const Matrix& data);

/// Copy of the recording restricted to `labels`, in that order.
Recording select_channels(const Recording& recording, const std::vector<std::string>& labels);

/// Every channel except auxiliary ones (EMG, EOG).
std::vector<std::string> eeg_channel_labels(const Recording& recording);

/// Forward-backward (zero-phase) filtering; offline analysis only.
std::vector<double> filter_zero_phase(const FilterSpec& spec, std::span<const double> signal);
Matrix filter_rows_zero_phase(const FilterSpec& spec, const Matrix& data);

// ---------------------------------------------------------------------------
// Segments and buffering

enum class SegmentLabel { idle = 0, pre_movement = 1 };

std::string_view to_string(SegmentLabel label);

struct Segment {
  Matrix data;
  double t0 = 0.0;
  double rate = 250.0;
  std::vector<std::string> channels;
  std::optional<SegmentLabel> label;

  std::size_t samples() const { return static_cast<std::size_t>(data.cols()); }
};

/// Fixed-capacity per-channel circular store fed one frame at a time.
class RingBuffer {
 public:
  RingBuffer(std::size_t channels, std::size_t capacity);

  std::size_t channels() const { return static_cast<std::size_t>(store_.rows()); }
  std::size_t capacity() const { return static_cast<std::size_t>(store_.cols()); }
  std::size_t total_written() const { return total_; }

  /// One sample per channel.
  void push(std::span<const double> frame);
  void clear();

  /// Copy of the most recent `n` samples per channel, oldest first. Throws
  /// not-ready when fewer than `n` samples have been written.
  Matrix latest(std::size_t n) const;

 private:
  Matrix store_;
  std::size_t cursor_ = 0;
  std::size_t total_ = 0;
};

/// Last `window_s` seconds of the buffer as a segment whose t0 is derived from
/// the total-written counter.
Segment ring_snapshot(const RingBuffer& buffer, double window_s, double rate,
                      std::vector<std::string> channels = {});

/// Sample count for a window of `duration_ms` at `rate`, rounded to nearest.
std::size_t window_samples(double duration_ms, double rate);

/// Index of the first sample at or after `time_s`.
std::ptrdiff_t sample_at_or_after(double time_s, double rate);

/// Window [event+start_ms, event+end_ms) of every channel. Throws a bounds
/// error when it does not fit in the recording.
Segment epoch_extract(const Recording& recording, double event_time_s, double start_ms,
                      double end_ms);

}  // namespace intentloop
