#include "p2b/tracker/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "p2b/tracker/track.hpp"

namespace p2b::tracker {

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  return epoch > cfg.lr_decay_epoch ? cfg.lr / cfg.lr_decay_factor : cfg.lr;
}

namespace {

struct SampleRef {
  int tracklet = 0;
  int frame = 0;
};

void shuffle_samples(std::vector<SampleRef>& samples, Rng& rng) {
  for (std::size_t i = samples.size(); i > 1; --i)
    std::swap(samples[i - 1], samples[rng.uniform_index(i)]);
}

double validation_iou(PipelineParams& params, const PipelineConfig& cfg,
                      const std::vector<dataio::Tracklet>& val_set,
                      dataio::TemplateMode template_mode, std::uint64_t seed) {
  TrackConfig tcfg;
  tcfg.template_mode = template_mode;
  tcfg.seed = seed;
  const EvalOutcome out = evaluate_tracking(params, cfg, val_set, tcfg);
  return out.success / 100.0;
}

}  // namespace

TrainResult train(const std::vector<dataio::Tracklet>& train_set,
                  const std::vector<dataio::Tracklet>& val_set, const PipelineConfig& cfg,
                  const TrainConfig& tcfg, const LogSink& log) {
  if (train_set.empty()) throw DataError("train: empty dataset");

  std::vector<SampleRef> all_samples;
  for (int t = 0; t < static_cast<int>(train_set.size()); ++t)
    for (int f = 1; f < static_cast<int>(train_set[t].size()); ++f)
      all_samples.push_back({t, f});
  if (all_samples.empty()) throw DataError("train: no frame has a predecessor");

  TrainResult result;
  result.params = PipelineParams::init(cfg, splitmix64(tcfg.seed ^ 0x9e37));
  PipelineParams best = result.params;
  double best_val = -1.0;
  result.best_epoch = tcfg.epochs;

  Rng root(tcfg.seed);
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    Rng epoch_rng = root.fork(static_cast<std::uint64_t>(epoch));
    std::vector<SampleRef> samples = all_samples;
    shuffle_samples(samples, epoch_rng);
    if (tcfg.samples_per_epoch > 0 &&
        static_cast<int>(samples.size()) > tcfg.samples_per_epoch)
      samples.resize(tcfg.samples_per_epoch);

    const double lr = lr_at_epoch(tcfg, epoch);
    EpochLog elog;
    elog.epoch = epoch;
    elog.lr = lr;

    std::size_t cursor = 0;
    int step = 0;
    while (cursor < samples.size()) {
      const std::size_t batch_end =
          std::min(samples.size(), cursor + static_cast<std::size_t>(tcfg.batch_size));
      diffcore::Graph g;
      diffcore::Binding ctx(g, result.params.store, true);
      std::vector<diffcore::Var> sample_losses;
      LossBreakdown acc;
      std::vector<std::string> batch_ids;
      for (std::size_t s = cursor; s < batch_end; ++s) {
        const SampleRef ref = samples[s];
        Rng sample_rng =
            tcfg.fixed_augmentation
                ? root.fork(0x200000 + static_cast<std::uint64_t>(ref.tracklet) * 100003 +
                            ref.frame)
                : epoch_rng.fork(0x100000 + s);
        auto sample = dataio::augment_training_sample(train_set[ref.tracklet], ref.frame,
                                                      cfg.sample, sample_rng);
        if (!sample) {
          ++elog.skipped_samples;
          ++result.degenerate_samples;
          continue;
        }
        batch_ids.push_back(std::to_string(ref.tracklet) + ":" + std::to_string(ref.frame));
        ForwardOutputs out = forward(ctx, sample->template_cloud, sample->search_cloud, cfg,
                                     sample_rng.fork(1));
        LossBreakdown bd;
        sample_losses.push_back(training_loss(ctx, out, sample->gt_box, cfg, &bd));
        acc.total += bd.total;
        acc.reg += bd.reg;
        acc.cla += bd.cla;
        acc.prop += bd.prop;
        acc.box += bd.box;
      }
      cursor = batch_end;
      if (sample_losses.empty()) continue;

      const double inv = 1.0 / static_cast<double>(sample_losses.size());
      diffcore::Var batch_loss =
          g.wsum(sample_losses, std::vector<double>(sample_losses.size(), inv));
      const double loss_value = g.value(batch_loss).values[0];
      if (!std::isfinite(loss_value)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << " step " << step << "; samples";
        for (const auto& id : batch_ids) os << " " << id;
        os << "; components reg=" << acc.reg << " cla=" << acc.cla << " prop=" << acc.prop
           << " box=" << acc.box;
        throw NumericalError(os.str());
      }
      g.backward(batch_loss);
      adam_step(result.params.store, ctx.collect_grads(), lr);

      const double n = static_cast<double>(sample_losses.size());
      elog.total += acc.total / n;
      elog.reg += acc.reg / n;
      elog.cla += acc.cla / n;
      elog.prop += acc.prop / n;
      elog.box += acc.box / n;
      ++step;
    }
    if (step > 0) {
      elog.total /= step;
      elog.reg /= step;
      elog.cla /= step;
      elog.prop /= step;
      elog.box /= step;
    }
    elog.steps = step;

    if (!val_set.empty()) {
      elog.val_iou = validation_iou(result.params, cfg, val_set, tcfg.template_mode,
                                    splitmix64(tcfg.seed ^ 0xa111u));
      if (elog.val_iou > best_val) {
        best_val = elog.val_iou;
        best = result.params;
        result.best_epoch = epoch;
      }
    }
    result.log.push_back(elog);
    if (log) {
      std::ostringstream os;
      os << "epoch=" << epoch << " lr=" << lr << " loss=" << elog.total << " reg=" << elog.reg
         << " cla=" << elog.cla << " prop=" << elog.prop << " box=" << elog.box
         << " steps=" << elog.steps << " skipped=" << elog.skipped_samples;
      if (elog.val_iou >= 0.0) os << " val_iou=" << elog.val_iou;
      log(os.str());
    }
  }

  if (tcfg.select_by_validation && !val_set.empty()) result.params = best;
  return result;
}

}  // namespace p2b::tracker
