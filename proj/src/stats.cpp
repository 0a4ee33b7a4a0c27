#include "intentloop/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "intentloop/error.hpp"

namespace intentloop::stats {

double mean(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::parameter, "mean of empty sequence");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
  const double m = mean(values);
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return acc / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) fail(ErrorKind::parameter, "quantile of empty sequence");
  if (!(q >= 0.0 && q <= 1.0)) fail(ErrorKind::parameter, "quantile level outside [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> values, double q) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, q);
}

std::vector<double> bh_adjust(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  std::vector<double> adjusted(m);
  if (m == 0) return adjusted;
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const std::size_t i = order[r];
    const double scaled = p_values[i] * static_cast<double>(m) / static_cast<double>(r + 1);
    running = std::min(running, scaled);
    adjusted[i] = std::min(1.0, running);
  }
  return adjusted;
}

std::vector<bool> bh_reject(std::span<const double> p_values, double alpha) {
  const auto adjusted = bh_adjust(p_values);
  std::vector<bool> out(adjusted.size());
  for (std::size_t i = 0; i < adjusted.size(); ++i) out[i] = adjusted[i] <= alpha;
  return out;
}

}  // namespace intentloop::stats
