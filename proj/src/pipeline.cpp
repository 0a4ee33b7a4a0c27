#include "intentloop/pipeline.hpp"

#include <algorithm>

#include "intentloop/error.hpp"

namespace intentloop {

namespace {
constexpr double kMinThreshold = 1e-9;
constexpr double kMaxThreshold = 1.0 - 1e-9;
}  // namespace

Recording filter_eeg(const Recording& raw, const FilterSpec& spec) {
  Recording eeg = select_channels(raw, eeg_channel_labels(raw));
  eeg.data = filter_rows(spec, eeg.data);
  return eeg;
}

ChannelRanking rank_from_segments(const std::vector<LabeledSegment>& segments,
                                  const std::vector<std::string>& labels, DriftOrdering ordering) {
  const auto d = static_cast<Eigen::Index>(labels.size());
  Vector pre = Vector::Zero(d), idle = Vector::Zero(d);
  std::size_t n_pre = 0, n_idle = 0;
  for (const auto& s : segments) {
    if (s.segment.channels != labels) fail(ErrorKind::parameter, "segment channels differ from labels");
    if (s.label == SegmentLabel::pre_movement) {
      pre += segment_drift(s.segment);
      ++n_pre;
    } else {
      idle += segment_drift(s.segment);
      ++n_idle;
    }
  }
  if (n_pre == 0 || n_idle == 0) fail(ErrorKind::training, "ranking needs both classes");
  pre /= static_cast<double>(n_pre);
  idle /= static_cast<double>(n_idle);
  return rank_channels(std::span<const double>(pre.data(), labels.size()),
                       std::span<const double>(idle.data(), labels.size()), labels, ordering);
}

Dataset make_dataset(const std::vector<LabeledSegment>& segments,
                     const std::vector<std::string>& channels) {
  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(segments.size()),
                     static_cast<Eigen::Index>(channels.size()));
  for (std::size_t i = 0; i < segments.size(); ++i) {
    ds.features.row(static_cast<Eigen::Index>(i)) =
        slope_features(segments[i].segment, channels).transpose();
    ds.labels.push_back(static_cast<int>(segments[i].label));
    ds.trials.push_back(segments[i].trial);
  }
  return ds;
}

TrainingOutcome train_from_onsets(const Recording& raw, std::span<const double> onsets_s,
                                  const TrainConfig& config) {
  raw.validate();
  TrainingOutcome out;
  const FilterSpec spec =
      design_bandpass(config.band_low_hz, config.band_high_hz, raw.rate, config.filter_order);
  const Recording eeg = filter_eeg(raw, spec);

  out.training_set = build_training_set(eeg, onsets_s, config.segments);
  if (out.training_set.segments.empty()) {
    fail(ErrorKind::empty_training_set, "no trial produced a complete segment pair");
  }
  out.rejection = reject_artifacts(out.training_set.segments, config.rejection);
  for (auto& a : out.training_set.audit) {
    if (std::find(out.rejection.rejected_trials.begin(), out.rejection.rejected_trials.end(),
                  a.trial) != out.rejection.rejected_trials.end()) {
      a.kept = false;
    }
  }
  const auto& kept = out.rejection.kept;

  const ChannelRanking ranking = rank_from_segments(kept, eeg.channels, config.ordering);
  out.dataset = make_dataset(kept, ranking.order);
  out.grid = cv_grid_search(out.dataset, config.grid);

  const auto roc = roc_curve(out.grid.oof_proba, out.dataset.labels);
  const auto k = static_cast<Eigen::Index>(out.grid.chosen_k);

  IntentModel& m = out.model;
  m.filter = spec;
  m.recording_channels = eeg.channels;
  m.ranking = ranking;
  m.channels = ranking.prefix(out.grid.chosen_k);
  m.lda = lda_train(out.dataset.features.leftCols(k), out.dataset.labels);
  m.threshold = std::clamp(threshold_at_fpr(roc, config.target_fpr), kMinThreshold, kMaxThreshold);
  m.meta.chosen_k = out.grid.chosen_k;
  m.meta.ks = out.grid.ks;
  m.meta.mean_accuracy = out.grid.mean_accuracy;
  m.meta.fold_accuracy = out.grid.fold_accuracy;
  m.meta.cv_f1 = out.grid.cv_f1;
  m.meta.cv_auc = out.grid.cv_auc;
  m.meta.target_fpr = config.target_fpr;
  m.meta.trials_used = kept.size() / 2;
  m.meta.trials_rejected = out.rejection.rejected_trials.size();
  m.meta.seed = config.grid.seed;
  return out;
}

TrainingOutcome train_from_recording(const Recording& raw, const TrainConfig& config) {
  const OnsetResult onset = detect_onset(raw, config.emg_channel);
  TrainingOutcome out = train_from_onsets(raw, onset.onsets_s, config);
  out.onset = onset;
  out.model.meta.onset_offset_ms = onset.onset_offset_ms;
  return out;
}

}  // namespace intentloop
