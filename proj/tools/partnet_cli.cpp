#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "partnet/checkpoint.hpp"
#include "partnet/config.hpp"
#include "partnet/errors.hpp"
#include "partnet/experiments.hpp"
#include "partnet/feature_map.hpp"
#include "partnet/parts.hpp"
#include "partnet/render.hpp"
#include "partnet/synthetic.hpp"
#include "partnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace partnet;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
};

// Data source: PNFM files when --data is given, otherwise a split of the
// configured synthetic task.
struct DataOptions {
  std::string path;
  std::string split;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "overrides the config seed");
  cmd->add_option("--out-dir", c.out_dir, "output directory");
  cmd->add_option("--set", c.overrides, "extra key=value override (repeatable)");
}

void add_data(CLI::App* cmd, DataOptions& d, const std::string& default_split) {
  d.split = default_split;
  cmd->add_option("--data", d.path, "PNFM file, directory or JSON-lines manifest");
  cmd->add_option("--split", d.split, "synthetic split when --data is absent")->check(CLI::IsMember({"train", "test"}));
}

RunConfig load_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : RunConfig::load(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  cfg.validate();
  return cfg;
}

std::vector<Sample> load_data(const DataOptions& d, const RunConfig& cfg) {
  if (!d.path.empty()) return ingest_features(d.path);
  const SyntheticDataset ds = gen_synthetic(cfg.task);
  return samples_of(d.split == "train" ? ds.train : ds.test);
}

fs::path out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

PartNetModel load_partnet(const std::string& path) { return partnet_from_checkpoint(load_checkpoint(path)); }

// M beyond the proposal count is clamped here rather than rejected.
int clamp_top_m(const PartNetModel& model, int requested) {
  const int r = model.config.train.cells * model.config.train.cells * model.config.train.anchors;
  if (requested > r) {
    std::fprintf(stderr, "note: M=%d exceeds R=%d proposals; using M=%d\n", requested, r, r);
    return r;
  }
  return requested;
}

std::vector<PartExtraction> extract_all(const PartNetModel& model, const std::vector<Sample>& data, int top_m) {
  std::vector<PartExtraction> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(extract_parts(model, s.map, clamp_top_m(model, top_m)));
  return out;
}

nlohmann::json report_json(const EvalReport& r) {
  return {{"accuracy", r.accuracy}, {"correct", r.correct}, {"total", r.total}, {"confusion", r.confusion}};
}

int cmd_gen_synth(const Common& c) {
  const RunConfig cfg = load_config(c);
  const SyntheticDataset ds = gen_synthetic(cfg.task);
  std::ofstream patches(out_path(c, "patches.jsonl"));
  for (const auto& [name, items] : {std::pair{"train", &ds.train}, std::pair{"test", &ds.test}}) {
    const fs::path dir = out_path(c, name);
    fs::create_directories(dir);
    std::ofstream manifest(dir / "manifest.jsonl");
    for (std::size_t i = 0; i < items->size(); ++i) {
      const auto& s = (*items)[i];
      char file[32];
      std::snprintf(file, sizeof(file), "%05zu.pnfm", i);
      write_pnfm(dir / file, s.sample.map, s.sample.label);
      manifest << nlohmann::json{{"file", file}, {"label", s.sample.label}}.dump() << '\n';
      patches << nlohmann::json{{"split", name},
                                {"file", file},
                                {"label", s.sample.label},
                                {"patch", {s.patch.x0, s.patch.y0, s.patch.x1, s.patch.y1}}}
                     .dump()
              << '\n';
    }
  }
  std::printf("wrote %zu train and %zu test maps to %s\n", ds.train.size(), ds.test.size(), c.out_dir.c_str());
  return 0;
}

int cmd_train(const Common& c, const DataOptions& d, bool with_image) {
  const RunConfig cfg = load_config(c);
  const auto data = load_data(d, cfg);
  const TrainOutcome out = train_partnet(data, cfg);
  save_checkpoint(out_path(c, "partnet.pnck"), partnet_checkpoint(out.model));
  write_text(out_path(c, "train_log.csv"), out.log);
  write_text(out_path(c, "config.txt"), cfg.to_text());
  std::printf("trained %s on %zu samples; train accuracy %.4f\n", mode_name(cfg.train.mode).c_str(), data.size(),
              evaluate(out.model, data).accuracy);
  std::printf("log_checksum %s\n", hex64(out.log_checksum).c_str());
  if (with_image) {
    const ImageTrainOutcome im = train_image_model(data, cfg);
    save_checkpoint(out_path(c, "image.pnck"), image_model_checkpoint(im.model, "image", cfg.to_text()));
    write_text(out_path(c, "image_log.csv"), im.log);
    std::printf("image-level train accuracy %.4f\n", evaluate_image_model(im.model, data).accuracy);
  }
  return 0;
}

int cmd_eval(const Common& c, const DataOptions& d, const std::string& checkpoint) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  RunConfig cfg = ckpt.kind == "partnet" ? RunConfig::parse(ckpt.config) : load_config(c);
  if (!c.config.empty() || !c.overrides.empty() || c.seed) cfg = load_config(c);
  const auto data = load_data(d, cfg);
  const EvalReport r = ckpt.kind == "partnet" ? evaluate(partnet_from_checkpoint(ckpt), data)
                                              : evaluate_image_model(image_model_from_checkpoint(ckpt), data);
  write_text(out_path(c, "eval.json"), report_json(r).dump(2) + "\n");
  std::printf("%s accuracy %.4f (%d/%d)\n", ckpt.kind.c_str(), r.accuracy, r.correct, r.total);
  return 0;
}

int cmd_ablate(const Common& c, const std::string& mode, std::vector<std::uint64_t> seeds) {
  const RunConfig cfg = load_config(c);
  if (seeds.empty()) seeds = {1, 2, 3, 4, 5};
  const auto rows = run_ablation(parse_ablation_mode(mode), cfg, seeds);
  write_text(out_path(c, "ablation_" + mode + ".csv"), ablation_csv(rows));
  for (const auto& s : summarize(rows)) std::printf("%-12s mean accuracy %.4f over %zu runs\n", s.setting.c_str(), s.mean, s.runs);
  return 0;
}

int cmd_extract(const Common& c, const DataOptions& d, const std::string& checkpoint, std::optional<int> top_m) {
  const PartNetModel model = load_partnet(checkpoint);
  const auto data = load_data(d, model.config);
  const int m = top_m.value_or(model.config.train.top_m);
  std::ofstream parts(out_path(c, "parts.jsonl"));
  std::ofstream proposals(out_path(c, "proposals.jsonl"));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    const std::string name = s.source.empty() ? "sample:" + std::to_string(i) : s.source;
    parts << extraction_json(extract_parts(model, s.map, clamp_top_m(model, m)), name, s.label).dump()
          << '\n';
    nlohmann::json list = nlohmann::json::array();
    for (const auto& p : prepare_sample(s.map, model.config.train, model.anchors()).proposals)
      list.push_back(proposal_json(p, s.map.stride()));
    proposals << nlohmann::json{{"source", name}, {"proposals", list}}.dump() << '\n';
  }
  std::printf("extracted parts for %zu samples\n", data.size());
  return 0;
}

int cmd_finetune(const Common& c, const DataOptions& d, const std::string& checkpoint, const std::string& image,
                 std::optional<int> top_m) {
  const PartNetModel model = load_partnet(checkpoint);
  RunConfig cfg = model.config;
  if (!c.config.empty() || !c.overrides.empty() || c.seed) cfg = load_config(c);
  const auto data = load_data(d, cfg);
  const int m = top_m.value_or(cfg.train.top_m);
  const auto extractions = extract_all(model, data, m);
  const PartModelSet set =
      fine_tune_part_models(image_model_from_checkpoint(load_checkpoint(image)), data, extractions, m, cfg);
  for (std::size_t p = 0; p < set.models.size(); ++p) {
    save_checkpoint(out_path(c, "part_" + std::to_string(p) + ".pnck"),
                    image_model_checkpoint(set.models[p], "part", cfg.to_text()));
    std::printf("part model %zu trained on %zu regions\n", p, set.training_sizes[p]);
  }
  return 0;
}

int cmd_ensemble(const Common& c, const DataOptions& d, const std::string& checkpoint, const std::string& image,
                 const std::string& parts_dir) {
  const PartNetModel model = load_partnet(checkpoint);
  const auto data = load_data(d, model.config);
  const ImageModel image_model = image_model_from_checkpoint(load_checkpoint(image));
  std::vector<ImageModel> part_models;
  for (int p = 0; p < model.config.train.parts; ++p) {
    const fs::path path = fs::path(parts_dir) / ("part_" + std::to_string(p) + ".pnck");
    part_models.push_back(image_model_from_checkpoint(load_checkpoint(path)));
  }
  const std::size_t classes = static_cast<std::size_t>(model.config.train.classes);
  const int grid = model.config.train.part_grid;
  std::vector<Tensor> pn, im, full;
  std::vector<std::vector<Tensor>> per_part(part_models.size());
  for (const auto& s : data) {
    const PartExtraction ex = extract_parts(model, s.map, 1);
    std::vector<Tensor> members{partnet_predict(model, s.map), image_model.predict(global_average_pool(s.map))};
    pn.push_back(members[0]);
    im.push_back(members[1]);
    for (std::size_t p = 0; p < part_models.size(); ++p) {
      members.push_back(part_model_predict(part_models[p], s.map, ex, static_cast<int>(p), grid));
      per_part[p].push_back(members.back());
    }
    full.push_back(ensemble_predict(members));
  }
  const auto labels = labels_of(data);
  nlohmann::json j{{"partnet", report_json(score_predictions(pn, labels, classes))},
                   {"image", report_json(score_predictions(im, labels, classes))},
                   {"full", report_json(score_predictions(full, labels, classes))}};
  for (std::size_t p = 0; p < per_part.size(); ++p)
    j["part_" + std::to_string(p)] = report_json(score_predictions(per_part[p], labels, classes));
  write_text(out_path(c, "ensemble.json"), j.dump(2) + "\n");
  for (const auto& [name, r] : j.items()) std::printf("%-8s accuracy %.4f\n", name.c_str(), r["accuracy"].get<double>());
  return 0;
}

int cmd_render(const Common& c, const DataOptions& d, const std::string& checkpoint, std::size_t index,
               const std::string& source) {
  const PartNetModel model = load_partnet(checkpoint);
  const auto data = load_data(d, model.config);
  if (index >= data.size()) throw ConfigError("render: index " + std::to_string(index) + " out of range");
  const Sample& s = data[index];
  const PartExtraction ex = extract_parts(model, s.map, 1);
  std::optional<RgbImage> src;
  if (!source.empty()) src = read_ppm(source);
  int drawn = 0;
  const RgbImage img = render_boxes(s, ex, src ? &*src : nullptr, &drawn);
  const fs::path path = out_path(c, "render_" + std::to_string(index) + ".ppm");
  write_ppm(path, img);
  std::printf("drew %d boxes on %dx%d image %s\n", drawn, img.width, img.height, path.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised part detection head on feature maps"};
  app.require_subcommand(1);
  Common common;
  DataOptions train_data, eval_data, extract_data, finetune_data, ensemble_data, render_data;
  std::string checkpoint, image, parts_dir, mode, source;
  std::optional<int> top_m;
  std::vector<std::uint64_t> seeds;
  bool with_image = false;
  std::size_t index = 0;

  auto* gen = app.add_subcommand("gen-synth", "write the synthetic task as PNFM files");
  add_common(gen, common);

  auto* train = app.add_subcommand("train", "train the head; writes partnet.pnck and train_log.csv");
  add_common(train, common);
  add_data(train, train_data, "train");
  train->add_flag("--image", with_image, "also train the image-level classifier");

  auto* eval = app.add_subcommand("eval", "accuracy and confusion of a checkpoint");
  add_common(eval, common);
  add_data(eval, eval_data, "test");
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);

  auto* ablate = app.add_subcommand("ablate", "ablations on the synthetic task");
  add_common(ablate, common);
  ablate->add_option("--mode", mode)->required()->check(CLI::IsMember({"degenerate", "p-sweep", "k-sweep", "svb"}));
  ablate->add_option("--seeds", seeds, "seeds to average over (default 1..5)");

  auto* extract = app.add_subcommand("extract-parts", "top-M proposals per detector as JSON lines");
  add_common(extract, common);
  add_data(extract, extract_data, "test");
  extract->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  extract->add_option("--top-m", top_m, "proposals kept per detector (clamped to R)");

  auto* finetune = app.add_subcommand("finetune-parts", "fine-tune one part-level model per detector");
  add_common(finetune, common);
  add_data(finetune, finetune_data, "train");
  finetune->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  finetune->add_option("--image", image, "image-level checkpoint")->required()->check(CLI::ExistingFile);
  finetune->add_option("--top-m", top_m, "regions per detector and sample (clamped to R)");

  auto* ensemble = app.add_subcommand("ensemble", "average PartNet, image-level and part-level probabilities");
  add_common(ensemble, common);
  add_data(ensemble, ensemble_data, "test");
  ensemble->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  ensemble->add_option("--image", image)->required()->check(CLI::ExistingFile);
  ensemble->add_option("--parts", parts_dir, "directory holding part_<p>.pnck")->required()->check(CLI::ExistingDirectory);

  auto* render = app.add_subcommand("render", "draw each detector's top-1 box as PPM");
  add_common(render, common);
  add_data(render, render_data, "test");
  render->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  render->add_option("--index", index, "sample index");
  render->add_option("--source", source, "source PPM image; defaults to a heatmap")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen_synth(common);
    if (*train) return cmd_train(common, train_data, with_image);
    if (*eval) return cmd_eval(common, eval_data, checkpoint);
    if (*ablate) return cmd_ablate(common, mode, seeds);
    if (*extract) return cmd_extract(common, extract_data, checkpoint, top_m);
    if (*finetune) return cmd_finetune(common, finetune_data, checkpoint, image, top_m);
    if (*ensemble) return cmd_ensemble(common, ensemble_data, checkpoint, image, parts_dir);
    if (*render) return cmd_render(common, render_data, checkpoint, index, source);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
