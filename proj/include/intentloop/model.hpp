#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "intentloop/dsp.hpp"
#include "intentloop/features.hpp"

namespace intentloop {

/// Rows are observations, columns features.
using FeatureMatrix = Eigen::MatrixXd;

struct ShrunkCovariance {
  Eigen::MatrixXd covariance;
  double shrinkage = 0.0;  ///< Ledoit-Wolf intensity in [0, 1]
  bool floored = false;    ///< ridge floor applied to a degenerate estimate
};

/// Ledoit-Wolf shrinkage toward tr(S)/d * I of the (biased) sample covariance
/// of the column-centred data. Degenerate results receive eps*I with
/// eps = 1e-9 tr(S)/d + 1e-12.
ShrunkCovariance lw_covariance(const FeatureMatrix& x);

/// Two-class linear discriminant; class 0 is idle, class 1 pre-movement.
struct LdaParams {
  Eigen::VectorXd mean0;
  Eigen::VectorXd mean1;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd weights;
  double bias = 0.0;
  std::size_t count0 = 0;
  std::size_t count1 = 0;

  std::size_t dim() const { return static_cast<std::size_t>(weights.size()); }
};

/// Pooled covariance is the prior-weighted sum of per-class Ledoit-Wolf
/// estimates computed on standardized features and scaled back.
LdaParams lda_train(const FeatureMatrix& x, std::span<const int> labels);

double decision_value(const LdaParams& params, const Eigen::VectorXd& x);
/// Posterior probability of pre-movement.
double predict_proba(const LdaParams& params, const Eigen::VectorXd& x);
int predict_class(const LdaParams& params, const Eigen::VectorXd& x);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  ///< predict positive when score >= threshold
};

struct RocCurve {
  std::vector<RocPoint> points;  ///< from (0,0) at +inf to (1,1)
  double auc() const;
};

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

/// Smallest finite threshold whose FPR does not exceed `target_fpr`; 1.0 when
/// no finite threshold qualifies.
double threshold_at_fpr(const RocCurve& curve, double target_fpr);

/// F1 for the positive (pre-movement) class; 0 when precision + recall is 0.
double f1_score(std::span<const int> predictions, std::span<const int> labels);

/// Labeled slope features with one column per ranked channel.
struct Dataset {
  FeatureMatrix features;
  std::vector<int> labels;
  std::vector<int> trials;  ///< folds never split a trial
};

struct GridSearchConfig {
  int folds = 5;
  std::size_t k_min = 6;
  std::size_t k_max = 20;
  std::size_t k_step = 2;
  std::uint64_t seed = 1;
};

struct GridSearchResult {
  std::size_t chosen_k = 0;
  std::vector<std::size_t> ks;
  std::vector<std::vector<double>> fold_accuracy;  ///< [k][fold]
  std::vector<double> mean_accuracy;
  /// Out-of-fold posteriors at the chosen k, aligned with the dataset rows.
  std::vector<double> oof_proba;
  std::vector<double> fold_f1;
  double cv_f1 = 0.0;
  double cv_auc = 0.0;
};

/// Trial-grouped, class-stratified k-fold CV over channel-prefix sizes; picks
/// the k with the highest mean fold accuracy (ties to the smaller k).
GridSearchResult cv_grid_search(const Dataset& dataset, const GridSearchConfig& config = {});

/// Fold index per trial id; deterministic given the seed.
std::vector<int> assign_folds(const std::vector<int>& trials, int folds, std::uint64_t seed);

struct TrainingMeta {
  std::size_t chosen_k = 0;
  std::vector<std::size_t> ks;
  std::vector<double> mean_accuracy;
  std::vector<std::vector<double>> fold_accuracy;
  double cv_f1 = 0.0;
  double cv_auc = 0.0;
  double target_fpr = 0.15;
  double onset_offset_ms = 0.0;
  std::size_t trials_used = 0;
  std::size_t trials_rejected = 0;
  std::uint64_t seed = 0;
};

/// The deployable artifact.
struct IntentModel {
  FilterSpec filter;
  std::vector<std::string> recording_channels;  ///< EEG channel order of the stream
  ChannelRanking ranking;
  std::vector<std::string> channels;  ///< ranking prefix fed to the LDA
  LdaParams lda;
  double threshold = 0.5;
  TrainingMeta meta;
};

}  // namespace intentloop
