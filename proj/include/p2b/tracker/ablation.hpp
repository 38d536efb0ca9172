#pragma once

#include "p2b/dataio/synthetic.hpp"
#include "p2b/tracker/train.hpp"

namespace p2b::tracker {

struct AblationRow {
  std::string label;
  double success = 0.0;
  double precision = 0.0;
};

struct AblationTable {
  std::string experiment;
  std::vector<AblationRow> rows;

  std::string format() const;
};

struct AblationConfig {
  PipelineConfig pipeline;
  TrainConfig train;
  dataio::SyntheticSpec spec;
  int train_tracklets = 32;
  int val_tracklets = 8;
  int test_tracklets = 16;
  std::uint64_t data_seed = 0;
  std::vector<int> proposal_counts{20, 32, 48, 64};
};

// Experiments: tsfa_variants (5 trainings), targetness (3 trainings),
// template_modes (one training, 4 tracking modes), proposal_counts (one
// training, K sweep without retraining).
AblationTable run_ablation(const std::string& experiment_id, const AblationConfig& cfg,
                           const LogSink& log = {});

}  // namespace p2b::tracker
