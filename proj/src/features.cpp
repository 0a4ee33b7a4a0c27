#include "intentloop/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "intentloop/error.hpp"

namespace intentloop {

std::vector<std::string> ChannelRanking::prefix(std::size_t k) const {
  if (k > order.size()) fail(ErrorKind::parameter, "ranking prefix longer than the ranking");
  return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k)};
}

Vector segment_drift(const Segment& segment) {
  const std::size_t w = window_samples(100.0, segment.rate);
  if (segment.samples() < 2 * w) fail(ErrorKind::parameter, "segment shorter than 200 ms");
  const auto n = static_cast<Eigen::Index>(w);
  return segment.data.leftCols(n).rowwise().mean() - segment.data.rightCols(n).rowwise().mean();
}

namespace {

// rank[i] = position of channel i when sorted by `key` ascending.
std::vector<std::size_t> rank_positions(const std::vector<double>& key) {
  std::vector<std::size_t> idx(key.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  std::vector<std::size_t> rank(key.size());
  for (std::size_t pos = 0; pos < idx.size(); ++pos) rank[idx[pos]] = pos;
  return rank;
}

}  // namespace

ChannelRanking rank_channels(std::span<const double> premove_drift,
                             std::span<const double> idle_drift,
                             const std::vector<std::string>& labels, DriftOrdering ordering) {
  const std::size_t n = labels.size();
  if (premove_drift.size() != n || idle_drift.size() != n) {
    fail(ErrorKind::parameter, "drift vectors and channel labels differ in length");
  }
  std::vector<double> pre_key(n), idle_key(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool abs_mode = ordering == DriftOrdering::absolute;
    // Descending pre-movement drift == ascending on the negated key.
    pre_key[i] = -(abs_mode ? std::abs(premove_drift[i]) : premove_drift[i]);
    idle_key[i] = abs_mode ? std::abs(idle_drift[i]) : idle_drift[i];
  }
  const auto pre_rank = rank_positions(pre_key);
  const auto idle_rank = rank_positions(idle_key);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const std::size_t sa = pre_rank[a] + idle_rank[a];
    const std::size_t sb = pre_rank[b] + idle_rank[b];
    if (sa != sb) return sa < sb;
    return pre_rank[a] < pre_rank[b];
  });

  ChannelRanking out;
  out.labels = labels;
  out.premove_drift.assign(premove_drift.begin(), premove_drift.end());
  out.idle_drift.assign(idle_drift.begin(), idle_drift.end());
  for (std::size_t i : idx) out.drift_order.push_back(labels[i]);

  for (const auto& forced : kForcedChannels) {
    if (std::find(labels.begin(), labels.end(), forced) != labels.end()) out.order.push_back(forced);
  }
  for (const auto& label : out.drift_order) {
    if (std::find(out.order.begin(), out.order.end(), label) == out.order.end()) {
      out.order.push_back(label);
    }
  }
  return out;
}

const Vector& slope_weights(std::size_t n, double rate) {
  static std::mutex mu;
  static std::map<std::pair<std::size_t, double>, Vector> cache;
  std::lock_guard lock(mu);
  auto [it, inserted] = cache.try_emplace({n, rate});
  if (inserted) {
    if (n < 2) fail(ErrorKind::parameter, "slope needs at least two samples");
    Vector t(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) t(static_cast<Eigen::Index>(i)) = static_cast<double>(i) / rate;
    const Vector centered = t.array() - t.mean();
    it->second = centered / centered.squaredNorm();
  }
  return it->second;
}

Vector slope_rows(const Matrix& data, double rate) {
  const Vector& w = slope_weights(static_cast<std::size_t>(data.cols()), rate);
  return data * w;
}

Vector slope_features(const Segment& segment, const std::vector<std::string>& channels) {
  const Vector& w = slope_weights(segment.samples(), segment.rate);
  Vector out(static_cast<Eigen::Index>(channels.size()));
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const auto pos = std::find(segment.channels.begin(), segment.channels.end(), channels[i]);
    if (pos == segment.channels.end()) {
      fail(ErrorKind::parameter, "channel '" + channels[i] + "' not in segment");
    }
    const auto row = static_cast<Eigen::Index>(pos - segment.channels.begin());
    out(static_cast<Eigen::Index>(i)) = segment.data.row(row).dot(w.transpose());
  }
  return out;
}

}  // namespace intentloop
