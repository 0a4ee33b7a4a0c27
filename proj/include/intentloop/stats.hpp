#pragma once

#include <span>
#include <vector>

namespace intentloop::stats {

double mean(std::span<const double> values);
/// Population variance (divides by n).
double variance(std::span<const double> values);
/// Sample standard deviation (divides by n - 1); 0 for fewer than 2 values.
double sample_sd(std::span<const double> values);
double median(std::span<const double> values);

/// Quantile by linear interpolation between order statistics
/// (h = (n - 1) q, the R/NumPy default). q in [0, 1].
double quantile(std::span<const double> values, double q);

/// Same, on values already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double q);

/// Benjamini-Hochberg adjusted p-values (step-up, monotone, capped at 1).
std::vector<double> bh_adjust(std::span<const double> p_values);

/// Significance mask at level `alpha` from BH-adjusted values.
std::vector<bool> bh_reject(std::span<const double> p_values, double alpha);

}  // namespace intentloop::stats
