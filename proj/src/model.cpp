#include "intentloop/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "intentloop/error.hpp"
#include "intentloop/random.hpp"

namespace intentloop {

ShrunkCovariance lw_covariance(const FeatureMatrix& x) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (d == 0) fail(ErrorKind::parameter, "covariance of zero features");
  if (n < 2) fail(ErrorKind::parameter, "covariance needs at least two observations");

  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const Eigen::MatrixXd s = (xc.transpose() * xc) / nn;
  const double mu = s.trace() / dd;

  const Eigen::MatrixXd x2 = xc.array().square().matrix();
  const double beta_sum = (x2.transpose() * x2).sum();  // sum_k |x_k|^4
  const double delta_sum = s.squaredNorm();
  double beta = (beta_sum / nn - delta_sum) / (dd * nn);
  const double delta = (delta_sum - 2.0 * mu * s.trace() + dd * mu * mu) / dd;
  beta = std::min(beta, delta);

  ShrunkCovariance out;
  out.shrinkage = (beta == 0.0 || delta == 0.0) ? 0.0 : std::clamp(beta / delta, 0.0, 1.0);
  out.covariance = (1.0 - out.shrinkage) * s;
  out.covariance.diagonal().array() += out.shrinkage * mu;

  const double eps = 1e-9 * s.trace() / dd + 1e-12;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.covariance, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= eps) {
    out.covariance.diagonal().array() += eps;
    out.floored = true;
  }
  return out;
}

namespace {

// Ledoit-Wolf on standardized columns, scaled back to feature units.
Eigen::MatrixXd standardized_lw(const FeatureMatrix& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - mean;
  Eigen::VectorXd scale = (xc.array().square().colwise().sum() / static_cast<double>(x.rows()))
                              .sqrt()
                              .transpose();
  for (Eigen::Index j = 0; j < scale.size(); ++j) {
    if (!(scale(j) > 0.0)) scale(j) = 1.0;
  }
  const Eigen::MatrixXd z = xc * scale.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd cov = lw_covariance(z).covariance;
  return scale.asDiagonal() * cov * scale.asDiagonal();
}

double logistic(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

LdaParams lda_train(const FeatureMatrix& x, std::span<const int> labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    fail(ErrorKind::parameter, "feature rows and labels differ in count");
  }
  std::vector<Eigen::Index> idx0, idx1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == 1 ? idx1 : idx0).push_back(static_cast<Eigen::Index>(i));
  }
  if (idx0.size() < 2 || idx1.size() < 2) {
    fail(ErrorKind::training, "LDA needs at least two observations of each class");
  }
  const FeatureMatrix x0 = x(idx0, Eigen::all);
  const FeatureMatrix x1 = x(idx1, Eigen::all);

  LdaParams p;
  p.count0 = idx0.size();
  p.count1 = idx1.size();
  p.mean0 = x0.colwise().mean().transpose();
  p.mean1 = x1.colwise().mean().transpose();
  const double n = static_cast<double>(labels.size());
  const double prior0 = static_cast<double>(p.count0) / n;
  const double prior1 = static_cast<double>(p.count1) / n;
  p.covariance = prior0 * standardized_lw(x0) + prior1 * standardized_lw(x1);

  const double d = static_cast<double>(x.cols());
  const double eps = 1e-9 * p.covariance.trace() / d + 1e-12;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(p.covariance);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= eps * 1e-3) {
    p.covariance.diagonal().array() += eps;
    ldlt.compute(p.covariance);
  }
  p.weights = ldlt.solve(p.mean1 - p.mean0);
  p.bias = -0.5 * p.weights.dot(p.mean1 + p.mean0) + std::log(prior1 / prior0);
  return p;
}

double decision_value(const LdaParams& params, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != params.dim()) {
    fail(ErrorKind::parameter, "feature length does not match the model");
  }
  return params.weights.dot(x) + params.bias;
}

double predict_proba(const LdaParams& params, const Eigen::VectorXd& x) {
  return logistic(decision_value(params, x));
}

int predict_class(const LdaParams& params, const Eigen::VectorXd& x) {
  return decision_value(params, x) > 0.0 ? 1 : 0;
}

double RocCurve::auc() const {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) fail(ErrorKind::parameter, "scores and labels differ in count");
  std::size_t pos = 0, neg = 0;
  for (int l : labels) (l == 1 ? pos : neg)++;
  if (pos == 0 || neg == 0) fail(ErrorKind::parameter, "ROC needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double thr = scores[order[i]];
    // Consume every observation tied at this score.
    while (i < order.size() && scores[order[i]] == thr) {
      (labels[order[i]] == 1 ? tp : fp)++;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos), thr});
  }
  return curve;
}

double threshold_at_fpr(const RocCurve& curve, double target_fpr) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : curve.points) {
    if (std::isfinite(p.threshold) && p.fpr <= target_fpr) best = std::min(best, p.threshold);
  }
  return std::isfinite(best) ? best : 1.0;
}

double f1_score(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size() || predictions.empty()) {
    fail(ErrorKind::parameter, "predictions and labels must be non-empty and aligned");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == 1 && labels[i] == 1) ++tp;
    else if (predictions[i] == 1) ++fp;
    else if (labels[i] == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

std::vector<int> assign_folds(const std::vector<int>& trials, int folds, std::uint64_t seed) {
  std::vector<int> unique(trials.begin(), trials.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  Rng rng(seed);
  rng.shuffle(unique);
  std::map<int, int> fold_of;
  for (std::size_t i = 0; i < unique.size(); ++i) fold_of[unique[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  std::vector<int> out(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) out[i] = fold_of[trials[i]];
  return out;
}

GridSearchResult cv_grid_search(const Dataset& dataset, const GridSearchConfig& config) {
  const auto n = static_cast<std::size_t>(dataset.features.rows());
  if (dataset.labels.size() != n || dataset.trials.size() != n) {
    fail(ErrorKind::parameter, "dataset columns are misaligned");
  }
  if (config.folds < 2) fail(ErrorKind::parameter, "need at least two folds");
  const std::size_t pairs = std::count(dataset.labels.begin(), dataset.labels.end(), 1);
  if (pairs < 10 || n - pairs < 10) {
    fail(ErrorKind::training, "grid search needs at least 10 segments of each class");
  }
  const auto channels = static_cast<std::size_t>(dataset.features.cols());
  if (channels < config.k_min) fail(ErrorKind::training, "fewer channels than the smallest grid point");

  const auto fold = assign_folds(dataset.trials, config.folds, config.seed);
  for (int f = 0; f < config.folds; ++f) {
    std::array<std::size_t, 2> counts{0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      if (fold[i] == f) counts[static_cast<std::size_t>(dataset.labels[i])]++;
    }
    if (counts[0] == 0 || counts[1] == 0) fail(ErrorKind::training, "too few trials for the fold count");
  }

  GridSearchResult out;
  std::vector<std::vector<double>> proba_by_k;
  for (std::size_t k = config.k_min; k <= std::min(config.k_max, channels); k += config.k_step) {
    std::vector<double> accuracies;
    std::vector<double> proba(n, 0.0);
    for (int f = 0; f < config.folds; ++f) {
      std::vector<Eigen::Index> train, test;
      std::vector<int> train_labels;
      for (std::size_t i = 0; i < n; ++i) {
        if (fold[i] == f) {
          test.push_back(static_cast<Eigen::Index>(i));
        } else {
          train.push_back(static_cast<Eigen::Index>(i));
          train_labels.push_back(dataset.labels[i]);
        }
      }
      const FeatureMatrix xtr = dataset.features(train, Eigen::seq(0, static_cast<Eigen::Index>(k) - 1));
      const LdaParams lda = lda_train(xtr, train_labels);
      std::size_t correct = 0;
      for (Eigen::Index i : test) {
        const Eigen::VectorXd x = dataset.features.row(i).head(static_cast<Eigen::Index>(k)).transpose();
        const double p = predict_proba(lda, x);
        proba[static_cast<std::size_t>(i)] = p;
        if (predict_class(lda, x) == dataset.labels[static_cast<std::size_t>(i)]) ++correct;
      }
      accuracies.push_back(static_cast<double>(correct) / static_cast<double>(test.size()));
    }
    out.ks.push_back(k);
    out.mean_accuracy.push_back(std::accumulate(accuracies.begin(), accuracies.end(), 0.0) /
                                static_cast<double>(accuracies.size()));
    out.fold_accuracy.push_back(std::move(accuracies));
    proba_by_k.push_back(std::move(proba));
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < out.ks.size(); ++i) {
    if (out.mean_accuracy[i] > out.mean_accuracy[best] + 1e-12) best = i;
  }
  out.chosen_k = out.ks[best];
  out.oof_proba = proba_by_k[best];

  for (int f = 0; f < config.folds; ++f) {
    std::vector<int> pred, truth;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold[i] != f) continue;
      pred.push_back(out.oof_proba[i] > 0.5 ? 1 : 0);
      truth.push_back(dataset.labels[i]);
    }
    out.fold_f1.push_back(f1_score(pred, truth));
  }
  out.cv_f1 = std::accumulate(out.fold_f1.begin(), out.fold_f1.end(), 0.0) /
              static_cast<double>(out.fold_f1.size());
  out.cv_auc = roc_curve(out.oof_proba, dataset.labels).auc();
  return out;
}

}  // namespace intentloop
