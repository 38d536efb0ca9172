#pragma once

#include <functional>

#include "p2b/tracker/pipeline.hpp"

namespace p2b::tracker {

struct TrainConfig {
  double lr = 0.001;
  int lr_decay_epoch = 10;      // divide lr after this many epochs
  double lr_decay_factor = 5.0;
  int batch_size = 32;
  int epochs = 40;
  std::uint64_t seed = 0;
  int samples_per_epoch = 0;    // 0: every (tracklet, frame) pair each epoch
  bool select_by_validation = true;
  bool fixed_augmentation = false;  // draw augmentation once per sample, not per epoch
  dataio::TemplateMode template_mode = dataio::TemplateMode::FirstAndPrevious;
};

double lr_at_epoch(const TrainConfig& cfg, int epoch);  // epochs are 1-based

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double total = 0.0, reg = 0.0, cla = 0.0, prop = 0.0, box = 0.0;
  int steps = 0;
  int skipped_samples = 0;
  double val_iou = -1.0;  // -1 when no validation set
};

struct TrainResult {
  PipelineParams params;        // selected checkpoint
  std::vector<EpochLog> log;
  int best_epoch = 0;
  int degenerate_samples = 0;
};

using LogSink = std::function<void(const std::string&)>;

// Seeded shuffling, batched forward/backward/adam with the learning-rate
// schedule; keeps the best-validation parameters when a validation set is
// given. Aborts with NumericalError and a diagnostics dump when the loss
// leaves the reals.
TrainResult train(const std::vector<dataio::Tracklet>& train_set,
                  const std::vector<dataio::Tracklet>& val_set, const PipelineConfig& cfg,
                  const TrainConfig& tcfg, const LogSink& log = {});

}  // namespace p2b::tracker
