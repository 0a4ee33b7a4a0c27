#pragma once

#include <span>
#include <string>
#include <vector>

#include "intentloop/dsp.hpp"
#include "intentloop/features.hpp"
#include "intentloop/labeling.hpp"
#include "intentloop/model.hpp"

namespace intentloop {

struct TrainConfig {
  double band_low_hz = 0.1;
  double band_high_hz = 15.0;
  int filter_order = 4;
  std::string emg_channel = "EMG";
  TrainingSetConfig segments;
  RejectionConfig rejection;
  DriftOrdering ordering = DriftOrdering::absolute;
  GridSearchConfig grid;
  double target_fpr = 0.15;
};

struct TrainingOutcome {
  IntentModel model;
  OnsetResult onset;
  TrainingSet training_set;
  RejectionResult rejection;
  Dataset dataset;  ///< all ranked channels, before the k cut
  GridSearchResult grid;
};

/// EEG channels of `raw`, causally band-passed from a zero state; the same
/// filter the live engine runs.
Recording filter_eeg(const Recording& raw, const FilterSpec& spec);

/// Trial-averaged drifts per class, then `rank_channels`.
ChannelRanking rank_from_segments(const std::vector<LabeledSegment>& segments,
                                  const std::vector<std::string>& labels, DriftOrdering ordering);

/// Slope features of `channels` (column order) for every segment.
Dataset make_dataset(const std::vector<LabeledSegment>& segments,
                     const std::vector<std::string>& channels);

/// Full offline path: EMG onsets, labeled segments, artifact rejection,
/// channel ranking, grid search, ROC threshold, final fit.
TrainingOutcome train_from_recording(const Recording& raw, const TrainConfig& config = {});

/// Same, with movement onsets supplied instead of detected.
TrainingOutcome train_from_onsets(const Recording& raw, std::span<const double> onsets_s,
                                  const TrainConfig& config = {});

}  // namespace intentloop
