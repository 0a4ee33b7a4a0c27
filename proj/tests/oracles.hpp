#pragma once

// Brute-force reference implementations. Each one follows the textbook
// definition directly and shares no code with the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

struct LedoitWolf {
  Eigen::MatrixXd covariance;
  double shrinkage = 0.0;
};

// Shrinkage = min(b2, d2) / d2 with
//   d2 = ||S - mu I||_F^2,  b2 = (1/n^2) sum_k ||x_k x_k' - S||_F^2.
inline LedoitWolf ledoit_wolf(const Eigen::MatrixXd& x) {
  const long n = x.rows();
  const long d = x.cols();
  std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
  for (long j = 0; j < d; ++j) {
    for (long i = 0; i < n; ++i) mean[static_cast<std::size_t>(j)] += x(i, j);
    mean[static_cast<std::size_t>(j)] /= static_cast<double>(n);
  }
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  for (long a = 0; a < d; ++a) {
    for (long b = 0; b < d; ++b) {
      double acc = 0.0;
      for (long i = 0; i < n; ++i) {
        acc += (x(i, a) - mean[static_cast<std::size_t>(a)]) * (x(i, b) - mean[static_cast<std::size_t>(b)]);
      }
      s(a, b) = acc / static_cast<double>(n);
    }
  }
  double mu = 0.0;
  for (long a = 0; a < d; ++a) mu += s(a, a);
  mu /= static_cast<double>(d);

  double d2 = 0.0;
  for (long a = 0; a < d; ++a) {
    for (long b = 0; b < d; ++b) {
      const double v = s(a, b) - (a == b ? mu : 0.0);
      d2 += v * v;
    }
  }
  double b2 = 0.0;
  for (long i = 0; i < n; ++i) {
    for (long a = 0; a < d; ++a) {
      for (long b = 0; b < d; ++b) {
        const double v = (x(i, a) - mean[static_cast<std::size_t>(a)]) *
                             (x(i, b) - mean[static_cast<std::size_t>(b)]) -
                         s(a, b);
        b2 += v * v;
      }
    }
  }
  b2 /= static_cast<double>(n) * static_cast<double>(n);

  LedoitWolf out;
  out.shrinkage = d2 > 0.0 ? std::min(b2, d2) / d2 : 0.0;
  out.covariance = s * (1.0 - out.shrinkage);
  for (long a = 0; a < d; ++a) out.covariance(a, a) += out.shrinkage * mu;
  return out;
}

// Least-squares slope of y against t_i = i / rate, in long double.
inline double ols_slope(const std::vector<double>& y, double rate) {
  const std::size_t n = y.size();
  long double tbar = 0.0L, ybar = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    tbar += static_cast<long double>(i) / rate;
    ybar += y[i];
  }
  tbar /= static_cast<long double>(n);
  ybar /= static_cast<long double>(n);
  long double sxy = 0.0L, sxx = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const long double dt = static_cast<long double>(i) / rate - tbar;
    sxy += dt * (y[i] - ybar);
    sxx += dt * dt;
  }
  return static_cast<double>(sxy / sxx);
}

// Smallest observed score tau with FPR(score >= tau) <= target; 1.0 if none.
inline double roc_threshold(const std::vector<double>& scores, const std::vector<int>& labels,
                            double target) {
  std::size_t neg = 0;
  for (int l : labels) neg += l == 0 ? 1 : 0;
  double best = std::numeric_limits<double>::infinity();
  for (double tau : scores) {
    std::size_t fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) fp += (labels[i] == 0 && scores[i] >= tau) ? 1 : 0;
    if (static_cast<double>(fp) / static_cast<double>(neg) <= target) best = std::min(best, tau);
  }
  return std::isfinite(best) ? best : 1.0;
}

// Area under the ROC curve as the Mann-Whitney pair count (ties count 1/2).
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      wins += scores[i] > scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

// Type-7 quantile: linear interpolation at h = (n - 1) q.
inline double quantile7(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Fences {
  double lower = 0.0;
  double upper = 0.0;
};

inline Fences tukey_fences(const std::vector<double>& v, double k) {
  const double q1 = quantile7(v, 0.25);
  const double q3 = quantile7(v, 0.75);
  return {q1 - k * (q3 - q1), q3 + k * (q3 - q1)};
}

// adj_i = min over j with p_j >= p_i of min(1, p_j m / r_j), r_j = #{k : p_k <= p_j}.
inline std::vector<double> bh(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<double> out(m, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    double best = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (p[j] < p[i]) continue;
      std::size_t r = 0;
      for (std::size_t k = 0; k < m; ++k) r += p[k] <= p[j] ? 1 : 0;
      best = std::min(best, p[j] * static_cast<double>(m) / static_cast<double>(r));
    }
    out[i] = best;
  }
  return out;
}

// One-sample t recomputed from scratch.
inline double t_stat(const std::vector<double>& d) {
  const double n = static_cast<double>(d.size());
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return sd > 0.0 ? mean / (sd / std::sqrt(n)) : 0.0;
}

// Exhaustive two-sided sign-flip p-value.
inline double sign_flip_p(const std::vector<double>& d) {
  const double t_obs = std::abs(t_stat(d));
  const std::size_t total = std::size_t{1} << d.size();
  std::size_t hits = 0;
  std::vector<double> flipped(d.size());
  for (std::size_t mask = 0; mask < total; ++mask) {
    for (std::size_t i = 0; i < d.size(); ++i) flipped[i] = (mask >> i & 1U) ? -d[i] : d[i];
    if (std::abs(t_stat(flipped)) >= t_obs - 1e-9 * std::max(1.0, t_obs)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

// Direct-form difference equation from expanded polynomials.
inline std::vector<double> direct_filter(const std::vector<double>& b, const std::vector<double>& a,
                                         const std::vector<double>& x) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    long double acc = 0.0L;
    for (std::size_t k = 0; k < b.size() && k <= n; ++k) acc += b[k] * x[n - k];
    for (std::size_t k = 1; k < a.size() && k <= n; ++k) acc -= a[k] * y[n - k];
    y[n] = static_cast<double>(acc / a[0]);
  }
  return y;
}

}  // namespace oracle
