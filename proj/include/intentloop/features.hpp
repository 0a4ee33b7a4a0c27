#pragma once

#include <span>
#include <string>
#include <vector>

#include "intentloop/dsp.hpp"

namespace intentloop {

enum class DriftOrdering {
  absolute,  ///< rank by |drift|: large pre-movement change, small idle change
  signed_,   ///< literal signed descending/ascending ordering
};

struct ChannelRanking {
  std::vector<std::string> order;        ///< best first, forced channels leading
  std::vector<std::string> drift_order;  ///< rank-sum order before forcing
  std::vector<std::string> labels;       ///< input order, aligned with the drifts
  std::vector<double> premove_drift;
  std::vector<double> idle_drift;

  /// First `k` labels of `order`.
  std::vector<std::string> prefix(std::size_t k) const;
};

/// Channels moved to the front of every ranking, in this order.
inline const std::vector<std::string> kForcedChannels{"C3", "C4", "Cz"};

/// Mean of the first 100 ms minus mean of the last 100 ms, per channel.
Vector segment_drift(const Segment& segment);

/// Ranks by pre-movement drift (descending) and idle drift (ascending), sums
/// the two rank positions, sorts by the sum (ties by pre-movement rank), then
/// puts C3, C4, Cz first when present.
ChannelRanking rank_channels(std::span<const double> premove_drift,
                             std::span<const double> idle_drift,
                             const std::vector<std::string>& labels,
                             DriftOrdering ordering = DriftOrdering::absolute);

/// OLS slope (uV/s) of each listed channel against time in seconds.
Vector slope_features(const Segment& segment, const std::vector<std::string>& channels);

/// Slope of every row of `data` sampled at `rate`.
Vector slope_rows(const Matrix& data, double rate);

/// OLS weights w with slope = sum_i w_i y_i for `n` samples at `rate`.
const Vector& slope_weights(std::size_t n, double rate);

}  // namespace intentloop
