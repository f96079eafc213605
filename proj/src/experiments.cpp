#include "partnet/experiments.hpp"

#include <algorithm>
#include <sstream>

#include "partnet/errors.hpp"
#include "partnet/rng.hpp"

namespace partnet {

RunConfig with_seed(const RunConfig& base, std::uint64_t seed) {
  RunConfig c = base;
  c.set("seed", std::to_string(seed));
  return c;
}

double synthetic_partnet_accuracy(const RunConfig& config) {
  const SyntheticDataset ds = gen_synthetic(config.task);
  const TrainOutcome out = train_partnet(samples_of(ds.train), config);
  return evaluate(out.model, samples_of(ds.test)).accuracy;
}

double synthetic_image_accuracy(const RunConfig& config) {
  const SyntheticDataset ds = gen_synthetic(config.task);
  const ImageTrainOutcome out = train_image_model(samples_of(ds.train), config);
  return evaluate_image_model(out.model, samples_of(ds.test)).accuracy;
}

AblationMode parse_ablation_mode(const std::string& text) {
  if (text == "degenerate") return AblationMode::kDegenerate;
  if (text == "p-sweep") return AblationMode::kPSweep;
  if (text == "k-sweep") return AblationMode::kKSweep;
  if (text == "svb") return AblationMode::kSvb;
  throw ConfigError("ablate: mode must be degenerate, p-sweep, k-sweep or svb (got '" + text + "')");
}

std::vector<AblationRow> run_ablation(AblationMode mode, const RunConfig& base, const std::vector<std::uint64_t>& seeds) {
  std::vector<AblationRow> rows;
  for (const std::uint64_t seed : seeds) {
    const RunConfig c = with_seed(base, seed);
    switch (mode) {
      case AblationMode::kDegenerate: {
        // One dataset serves all three models.
        const SyntheticDataset ds = gen_synthetic(c.task);
        const auto train = samples_of(ds.train), test = samples_of(ds.test);
        RunConfig partnet = c, degenerate = c;
        partnet.train.mode = TrainMode::kPartNet;
        degenerate.train.mode = TrainMode::kDegenerate;
        rows.push_back({"partnet", seed, evaluate(train_partnet(train, partnet).model, test).accuracy});
        rows.push_back({"degenerate", seed, evaluate(train_partnet(train, degenerate).model, test).accuracy});
        rows.push_back({"image", seed, evaluate_image_model(train_image_model(train, c).model, test).accuracy});
        break;
      }
      case AblationMode::kPSweep:
        for (const int p : {1, 3, 5, 10}) {
          RunConfig v = c;
          v.train.parts = p;
          rows.push_back({"P=" + std::to_string(p), seed, synthetic_partnet_accuracy(v)});
        }
        break;
      case AblationMode::kKSweep:
        for (const int k : {3, 7, 14, 28}) {
          RunConfig v = c;
          v.train.anchors = k;
          rows.push_back({"K=" + std::to_string(k), seed, synthetic_partnet_accuracy(v)});
        }
        break;
      case AblationMode::kSvb:
        for (const bool on : {false, true}) {
          RunConfig v = c;
          v.train.svb = on;
          rows.push_back({on ? "svb-on" : "svb-off", seed, synthetic_partnet_accuracy(v)});
        }
        break;
    }
  }
  return rows;
}

std::vector<SettingSummary> summarize(const std::vector<AblationRow>& rows) {
  std::vector<SettingSummary> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SettingSummary& s) { return s.setting == r.setting; });
    if (it == out.end()) {
      out.push_back({r.setting, 0.0, 0});
      it = out.end() - 1;
    }
    it->mean += r.accuracy;
    ++it->runs;
  }
  for (auto& s : out) s.mean /= static_cast<double>(s.runs);
  return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "setting,seed,accuracy\n";
  os.precision(10);
  for (const auto& r : rows) os << r.setting << ',' << r.seed << ',' << r.accuracy << '\n';
  return os.str();
}

SyntheticTaskSpec noiseless_probe(const SyntheticTaskSpec& task) {
  SyntheticTaskSpec probe = task;
  probe.noise = 0.0;
  probe.seed = derive_seed(task.seed, 1000);
  return probe;
}

std::vector<double> localization_rates(const PartNetModel& model, const std::vector<SyntheticSample>& samples,
                                       double threshold) {
  if (samples.empty()) throw DataError("localization_rates: no samples");
  std::vector<double> hits(static_cast<std::size_t>(model.config.train.parts), 0.0);
  for (const auto& s : samples) {
    const PartExtraction ex = extract_parts(model, s.sample.map, 1);
    for (const auto& d : ex.detectors) {
      if (iou(d.best.proposal.box, s.patch) > threshold) hits[static_cast<std::size_t>(d.detector)] += 1.0;
    }
  }
  for (double& h : hits) h /= static_cast<double>(samples.size());
  return hits;
}

}  // namespace partnet
