#include "intentloop/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "intentloop/error.hpp"

namespace intentloop {

namespace {

using cplx = std::complex<double>;

constexpr double kPi = std::numbers::pi;

std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

cplx section_response(const Biquad& s, cplx zinv) {
  const cplx zinv2 = zinv * zinv;
  return (s.b0 + s.b1 * zinv + s.b2 * zinv2) / (1.0 + s.a1 * zinv + s.a2 * zinv2);
}

// Denominator 1 + a1 z^-1 + a2 z^-2 from a pole pair that is either complex
// conjugate or two reals.
Biquad section_from_poles(cplx p, cplx q) {
  Biquad s;
  s.b0 = 1.0;
  s.b1 = 0.0;
  s.b2 = -1.0;  // zeros at z = +1 and z = -1
  s.a1 = -(p + q).real();
  s.a2 = (p * q).real();
  return s;
}

}  // namespace

std::string_view to_string(MarkerKind kind) {
  switch (kind) {
    case MarkerKind::fixation_onset: return "fixation_onset";
    case MarkerKind::fixation_offset: return "fixation_offset";
    case MarkerKind::tap: return "tap";
    case MarkerKind::tone: return "tone";
    case MarkerKind::ems: return "ems";
    case MarkerKind::estimate: return "estimate";
    case MarkerKind::trial_end: return "trial_end";
  }
  return "unknown";
}

MarkerKind marker_kind_from_string(std::string_view text) {
  for (auto kind : {MarkerKind::fixation_onset, MarkerKind::fixation_offset, MarkerKind::tap,
                    MarkerKind::tone, MarkerKind::ems, MarkerKind::estimate,
                    MarkerKind::trial_end}) {
    if (to_string(kind) == text) return kind;
  }
  fail(ErrorKind::format, "unknown marker kind '" + std::string(text) + "'");
}

std::string_view to_string(SegmentLabel label) {
  return label == SegmentLabel::idle ? "idle" : "pre-movement";
}

std::optional<std::size_t> Recording::find_channel(std::string_view label) const {
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] == label) return i;
  }
  return std::nullopt;
}

std::size_t Recording::channel_index(std::string_view label) const {
  if (auto idx = find_channel(label)) return *idx;
  fail(ErrorKind::parameter, "channel '" + std::string(label) + "' not in recording");
}

std::vector<Marker> Recording::markers_of(MarkerKind kind) const {
  std::vector<Marker> out;
  for (const auto& m : markers) {
    if (m.kind == kind) out.push_back(m);
  }
  return out;
}

void Recording::validate() const {
  if (!(rate > 0.0)) fail(ErrorKind::parameter, "sampling rate must be positive");
  if (static_cast<std::size_t>(data.rows()) != channels.size()) {
    fail(ErrorKind::parameter, "channel label count does not match data rows");
  }
  const bool sorted = std::is_sorted(markers.begin(), markers.end(),
                                     [](const Marker& a, const Marker& b) {
                                       return a.time_s < b.time_s;
                                     });
  if (!sorted) fail(ErrorKind::parameter, "markers are not sorted by timestamp");
}

// ---------------------------------------------------------------------------

std::vector<double> FilterSpec::numerator() const {
  std::vector<double> out{1.0};
  for (const auto& s : sections) out = poly_mul(out, {s.b0, s.b1, s.b2});
  return out;
}

std::vector<double> FilterSpec::denominator() const {
  std::vector<double> out{1.0};
  for (const auto& s : sections) out = poly_mul(out, {1.0, s.a1, s.a2});
  return out;
}

FilterState FilterSpec::initial_state() const {
  return FilterState{std::vector<double>(2 * sections.size(), 0.0)};
}

std::complex<double> FilterSpec::response(double freq_hz) const {
  const cplx zinv = std::polar(1.0, -2.0 * kPi * freq_hz / rate);
  cplx h{1.0, 0.0};
  for (const auto& s : sections) h *= section_response(s, zinv);
  return h;
}

bool FilterSpec::stable() const {
  // Jury conditions for z^2 + a1 z + a2.
  return std::all_of(sections.begin(), sections.end(), [](const Biquad& s) {
    return std::abs(s.a2) < 1.0 && std::abs(s.a1) < 1.0 + s.a2;
  });
}

FilterSpec design_bandpass(double low_hz, double high_hz, double rate, int order) {
  if (!(rate > 0.0)) fail(ErrorKind::parameter, "rate must be positive");
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < rate / 2.0)) {
    fail(ErrorKind::parameter, "band edges must satisfy 0 < low < high < rate/2");
  }
  if (order < 1 || order > 16) fail(ErrorKind::parameter, "order must be in [1, 16]");

  const double fs2 = 2.0 * rate;
  const double w_lo = fs2 * std::tan(kPi * low_hz / rate);
  const double w_hi = fs2 * std::tan(kPi * high_hz / rate);
  const double bw = w_hi - w_lo;
  const double w0 = std::sqrt(w_lo * w_hi);

  std::vector<cplx> complex_poles;
  std::vector<double> real_poles;
  for (int k = 0; k < order; ++k) {
    const cplx proto = std::polar(1.0, kPi * (2.0 * k + 1.0 + order) / (2.0 * order));
    const cplx half = proto * bw / 2.0;
    const cplx root = std::sqrt(half * half - w0 * w0);
    for (const cplx s : {half + root, half - root}) {
      const cplx z = (fs2 + s) / (fs2 - s);
      if (std::abs(z.imag()) <= 1e-12 * std::max(1.0, std::abs(z))) {
        real_poles.push_back(z.real());
      } else if (z.imag() > 0.0) {
        complex_poles.push_back(z);
      }
    }
  }
  std::sort(real_poles.begin(), real_poles.end());
  if (real_poles.size() % 2 != 0) fail(ErrorKind::design, "unpaired real pole");

  FilterSpec spec;
  spec.low_hz = low_hz;
  spec.high_hz = high_hz;
  spec.rate = rate;
  spec.order = order;
  for (const cplx& p : complex_poles) spec.sections.push_back(section_from_poles(p, std::conj(p)));
  for (std::size_t i = 0; i < real_poles.size(); i += 2) {
    spec.sections.push_back(section_from_poles(real_poles[i], real_poles[i + 1]));
  }
  if (spec.sections.size() != static_cast<std::size_t>(order)) {
    fail(ErrorKind::design, "unexpected section count");
  }

  // Unity gain at the digital image of the geometric centre frequency.
  const double center = 2.0 * std::atan(w0 / fs2);
  const cplx zinv = std::polar(1.0, -center);
  for (auto& s : spec.sections) {
    const double g = 1.0 / std::abs(section_response(s, zinv));
    s.b0 *= g;
    s.b1 *= g;
    s.b2 *= g;
  }
  // Poles nearest the unit circle go last.
  std::sort(spec.sections.begin(), spec.sections.end(),
            [](const Biquad& a, const Biquad& b) { return a.a2 < b.a2; });

  if (!spec.stable()) fail(ErrorKind::design, "designed filter is unstable");
  return spec;
}

double filter_step(const FilterSpec& spec, FilterState& state, double x) {
  double v = x;
  for (std::size_t k = 0; k < spec.sections.size(); ++k) {
    const Biquad& s = spec.sections[k];
    double& z0 = state.z[2 * k];
    double& z1 = state.z[2 * k + 1];
    const double y = s.b0 * v + z0;
    z0 = s.b1 * v - s.a1 * y + z1;
    z1 = s.b2 * v - s.a2 * y;
    v = y;
  }
  return v;
}

void filter_inplace(const FilterSpec& spec, std::span<double> signal, FilterState& state) {
  if (state.z.size() != 2 * spec.sections.size()) {
    fail(ErrorKind::parameter, "filter state does not match the filter");
  }
  // Section-by-section over the whole block keeps each delay line in registers.
  for (std::size_t k = 0; k < spec.sections.size(); ++k) {
    const Biquad s = spec.sections[k];
    double z0 = state.z[2 * k];
    double z1 = state.z[2 * k + 1];
    for (double& v : signal) {
      const double x = v;
      const double y = s.b0 * x + z0;
      z0 = s.b1 * x - s.a1 * y + z1;
      z1 = s.b2 * x - s.a2 * y;
      v = y;
    }
    state.z[2 * k] = z0;
    state.z[2 * k + 1] = z1;
  }
}

FilterResult filter_apply(const FilterSpec& spec, std::span<const double> signal,
                          const std::optional<FilterState>& carry) {
  FilterResult out;
  out.state = carry ? *carry : spec.initial_state();
  out.signal.assign(signal.begin(), signal.end());
  filter_inplace(spec, out.signal, out.state);
  return out;
}

Matrix filter_rows(const FilterSpec& spec, const Matrix& data) {
  Matrix out = data;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    FilterState st = spec.initial_state();
    filter_inplace(spec, std::span<double>(out.row(r).data(), static_cast<std::size_t>(out.cols())),
                   st);
  }
  return out;
}

Recording select_channels(const Recording& recording, const std::vector<std::string>& labels) {
  Recording out;
  out.rate = recording.rate;
  out.channels = labels;
  out.markers = recording.markers;
  out.data.resize(static_cast<Eigen::Index>(labels.size()), recording.data.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.data.row(static_cast<Eigen::Index>(i)) =
        recording.data.row(static_cast<Eigen::Index>(recording.channel_index(labels[i])));
  }
  return out;
}

std::vector<std::string> eeg_channel_labels(const Recording& recording) {
  std::vector<std::string> out;
  for (const auto& label : recording.channels) {
    if (label == "EMG" || label == "EOG" || label == "vEOG") continue;
    out.push_back(label);
  }
  return out;
}

std::vector<double> filter_zero_phase(const FilterSpec& spec, std::span<const double> signal) {
  const std::size_t n = signal.size();
  if (n == 0) return {};
  // Odd extension at both ends suppresses edge transients.
  const std::size_t pad = std::min<std::size_t>(3 * (2 * spec.sections.size() + 1), n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * signal[0] - signal[i]);
  ext.insert(ext.end(), signal.begin(), signal.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * signal[n - 1] - signal[n - 1 - i]);

  FilterState st = spec.initial_state();
  filter_inplace(spec, ext, st);
  std::reverse(ext.begin(), ext.end());
  st = spec.initial_state();
  filter_inplace(spec, ext, st);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

Matrix filter_rows_zero_phase(const FilterSpec& spec, const Matrix& data) {
  Matrix out(data.rows(), data.cols());
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const auto y = filter_zero_phase(
        spec, std::span<const double>(data.row(r).data(), static_cast<std::size_t>(data.cols())));
    out.row(r) = Eigen::Map<const Eigen::RowVectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  }
  return out;
}

// ---------------------------------------------------------------------------

RingBuffer::RingBuffer(std::size_t channels, std::size_t capacity) {
  if (channels == 0 || capacity == 0) fail(ErrorKind::parameter, "ring buffer must be non-empty");
  store_ = Matrix::Zero(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(capacity));
}

void RingBuffer::push(std::span<const double> frame) {
  if (frame.size() != channels()) fail(ErrorKind::parameter, "frame width does not match buffer");
  for (std::size_t c = 0; c < frame.size(); ++c) {
    store_(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(cursor_)) = frame[c];
  }
  cursor_ = (cursor_ + 1) % capacity();
  ++total_;
}

void RingBuffer::clear() {
  store_.setZero();
  cursor_ = 0;
  total_ = 0;
}

Matrix RingBuffer::latest(std::size_t n) const {
  if (n > capacity()) fail(ErrorKind::parameter, "window exceeds ring capacity");
  if (total_ < n) fail(ErrorKind::not_ready, "ring buffer holds fewer samples than requested");
  Matrix out(store_.rows(), static_cast<Eigen::Index>(n));
  const std::size_t cap = capacity();
  const std::size_t start = (cursor_ + cap - n) % cap;
  const std::size_t first = std::min(n, cap - start);
  const auto rows = store_.rows();
  out.leftCols(static_cast<Eigen::Index>(first)) =
      store_.block(0, static_cast<Eigen::Index>(start), rows, static_cast<Eigen::Index>(first));
  if (first < n) {
    out.rightCols(static_cast<Eigen::Index>(n - first)) =
        store_.leftCols(static_cast<Eigen::Index>(n - first));
  }
  return out;
}

Segment ring_snapshot(const RingBuffer& buffer, double window_s, double rate,
                      std::vector<std::string> channels) {
  const std::size_t n = window_samples(window_s * 1000.0, rate);
  Segment seg;
  seg.data = buffer.latest(n);
  seg.rate = rate;
  seg.t0 = static_cast<double>(buffer.total_written() - n) / rate;
  seg.channels = std::move(channels);
  return seg;
}

std::size_t window_samples(double duration_ms, double rate) {
  if (!(duration_ms > 0.0) || !(rate > 0.0)) fail(ErrorKind::parameter, "window must be positive");
  return static_cast<std::size_t>(std::llround(duration_ms / 1000.0 * rate));
}

std::ptrdiff_t sample_at_or_after(double time_s, double rate) {
  // Tolerance absorbs representation error such as 9.0 s * 250 Hz.
  return static_cast<std::ptrdiff_t>(std::ceil(time_s * rate - 1e-6));
}

Segment epoch_extract(const Recording& recording, double event_time_s, double start_ms,
                      double end_ms) {
  if (!(end_ms > start_ms)) fail(ErrorKind::parameter, "epoch end must follow start");
  const std::size_t n = window_samples(end_ms - start_ms, recording.rate);
  const std::ptrdiff_t first = sample_at_or_after(event_time_s + start_ms / 1000.0, recording.rate);
  if (first < 0 || static_cast<std::size_t>(first) + n > recording.samples()) {
    fail(ErrorKind::bounds, "epoch around t=" + std::to_string(event_time_s) +
                                " s falls outside the recording");
  }
  Segment seg;
  seg.data = recording.data.middleCols(first, static_cast<Eigen::Index>(n));
  seg.t0 = static_cast<double>(first) / recording.rate;
  seg.rate = recording.rate;
  seg.channels = recording.channels;
  return seg;
}

}  // namespace intentloop
