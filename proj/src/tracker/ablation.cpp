#include "p2b/tracker/ablation.hpp"

#include <iomanip>
#include <sstream>

#include "p2b/tracker/track.hpp"

namespace p2b::tracker {

std::string AblationTable::format() const {
  std::ostringstream os;
  os << "experiment: " << experiment << "\n";
  std::size_t width = 24;
  for (const auto& r : rows) width = std::max(width, r.label.size() + 2);
  os << std::left << std::setw(static_cast<int>(width)) << "setting"
     << std::right << std::setw(10) << "Success" << std::setw(12) << "Precision" << "\n";
  os << std::fixed << std::setprecision(1);
  for (const auto& r : rows)
    os << std::left << std::setw(static_cast<int>(width)) << r.label << std::right
       << std::setw(10) << r.success << std::setw(12) << r.precision << "\n";
  return os.str();
}

namespace {

struct Data {
  std::vector<dataio::Tracklet> train_set, val_set, test_set;
};

Data make_data(const AblationConfig& cfg) {
  Data d;
  Rng rng(cfg.data_seed);
  d.train_set = dataio::generate_synthetic_dataset(cfg.spec, cfg.train_tracklets,
                                                   rng.fork(1).seed());
  d.val_set = dataio::generate_synthetic_dataset(cfg.spec, cfg.val_tracklets,
                                                 rng.fork(2).seed());
  d.test_set = dataio::generate_synthetic_dataset(cfg.spec, cfg.test_tracklets,
                                                  rng.fork(3).seed());
  return d;
}

AblationRow eval_row(const std::string& label, PipelineParams& params,
                     const PipelineConfig& cfg, const Data& data, std::uint64_t seed,
                     dataio::TemplateMode mode) {
  TrackConfig tcfg;
  tcfg.seed = seed;
  tcfg.template_mode = mode;
  const EvalOutcome out = evaluate_tracking(params, cfg, data.test_set, tcfg);
  return AblationRow{label, out.success, out.precision};
}

}  // namespace

AblationTable run_ablation(const std::string& experiment_id, const AblationConfig& cfg,
                           const LogSink& log) {
  AblationTable table;
  table.experiment = experiment_id;
  const Data data = make_data(cfg);
  const std::uint64_t eval_seed = splitmix64(cfg.data_seed ^ 0xab1a7e);

  auto note = [&](const std::string& s) {
    if (log) log("[" + experiment_id + "] " + s);
  };

  if (experiment_id == "tsfa_variants") {
    const tsfa::Variant variants[] = {
        tsfa::Variant::Default, tsfa::Variant::NoTemplateFeatures, tsfa::Variant::NoSimilarity,
        tsfa::Variant::SearchFeaturesA, tsfa::Variant::SearchFeaturesB};
    for (tsfa::Variant v : variants) {
      PipelineConfig pc = cfg.pipeline;
      pc.tsfa.variant = v;
      note(std::string("training variant ") + tsfa::to_string(v));
      TrainResult tr = train(data.train_set, data.val_set, pc, cfg.train, log);
      table.rows.push_back(
          eval_row(tsfa::to_string(v), tr.params, pc, data, eval_seed, cfg.train.template_mode));
    }
  } else if (experiment_id == "targetness") {
    const proposal::TargetnessMode modes[] = {proposal::TargetnessMode::Full,
                                              proposal::TargetnessMode::NoConcat,
                                              proposal::TargetnessMode::NoBranch};
    for (proposal::TargetnessMode m : modes) {
      PipelineConfig pc = cfg.pipeline;
      pc.proposal.targetness = m;
      note(std::string("training targetness mode ") + proposal::to_string(m));
      TrainResult tr = train(data.train_set, data.val_set, pc, cfg.train, log);
      table.rows.push_back(eval_row(proposal::to_string(m), tr.params, pc, data, eval_seed,
                                    cfg.train.template_mode));
    }
  } else if (experiment_id == "template_modes") {
    note("training shared model");
    TrainResult tr = train(data.train_set, data.val_set, cfg.pipeline, cfg.train, log);
    const dataio::TemplateMode modes[] = {
        dataio::TemplateMode::FirstGt, dataio::TemplateMode::PreviousResult,
        dataio::TemplateMode::FirstAndPrevious, dataio::TemplateMode::AllPrevious};
    for (dataio::TemplateMode m : modes)
      table.rows.push_back(
          eval_row(dataio::to_string(m), tr.params, cfg.pipeline, data, eval_seed, m));
  } else if (experiment_id == "proposal_counts") {
    note("training shared model");
    TrainResult tr = train(data.train_set, data.val_set, cfg.pipeline, cfg.train, log);
    for (int k : cfg.proposal_counts) {
      PipelineConfig pc = cfg.pipeline;  // no retraining, only K changes
      pc.proposal.cluster_count = k;
      table.rows.push_back(eval_row("K=" + std::to_string(k), tr.params, pc, data, eval_seed,
                                    cfg.train.template_mode));
    }
  } else {
    throw UsageError("unknown ablation experiment: " + experiment_id +
                     " (expected tsfa_variants | targetness | template_modes | proposal_counts)");
  }
  return table;
}

}  // namespace p2b::tracker
