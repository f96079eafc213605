#include "partnet/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "partnet/errors.hpp"

namespace partnet {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      out = static_cast<T>(std::stod(value, &used));
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ConfigError("config: " + key + "=" + value + " is not a number");
    }
  } else {
    const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
      throw ConfigError("config: " + key + "=" + value + " is not an integer");
    }
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "off" || value == "no") return false;
  throw ConfigError("config: " + key + "=" + value + " is not a boolean");
}

std::vector<int> parse_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<int>(key, item));
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("config: " + what);
}

}  // namespace

void SyntheticTaskSpec::validate() const {
  require(classes >= 1, "classes must be >= 1");
  require(signal_channels >= 1, "signal_channels must be >= 1");
  require(channels >= classes * signal_channels, "channels must hold classes * signal_channels disjoint sets");
  require(width >= 1 && height >= 1, "width and height must be >= 1");
  require(stride >= 1, "stride must be >= 1");
  require(patch >= 1 && patch % 2 == 1, "patch must be a positive odd number");
  require(patch <= width && patch <= height, "patch must fit inside the map");
  require(noise >= 0.0 && distractor >= 0.0 && amplitude > 0.0, "noise/distractor >= 0 and amplitude > 0");
  require(train_per_class >= 0 && test_per_class >= 0, "per-class sample counts must be >= 0");
}

void TrainConfig::validate() const {
  require(classes >= 1, "classes must be >= 1");
  require(parts >= 1, "parts must be >= 1");
  require(cells >= 1, "cells must be >= 1");
  require(anchors == 3 || anchors == 7 || anchors == 14 || anchors == 28, "anchors must be 3, 7, 14 or 28");
  require(pool >= 1 && hidden >= 1, "pool and hidden must be >= 1");
  require(lambda >= 0.0, "lambda must be >= 0");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0, 1)");
  require(epochs >= 0 && batch >= 1, "epochs >= 0 and batch >= 1");
  require(svb_epsilon > 0.0 && svb_period >= 1, "svb_epsilon > 0 and svb_period >= 1");
  require(top_m >= 1 && part_grid >= 1, "top_m and part_grid must be >= 1");
}

void RunConfig::validate() const {
  task.validate();
  train.validate();
}

void RunConfig::set(const std::string& key, const std::string& value) {
  using Setter = std::function<void(RunConfig&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"classes", [](RunConfig& c, const std::string& v) { c.task.classes = c.train.classes = parse_number<int>("classes", v); }},
      {"seed", [](RunConfig& c, const std::string& v) { c.task.seed = c.train.seed = parse_number<std::uint64_t>("seed", v); }},
      {"channels", [](RunConfig& c, const std::string& v) { c.task.channels = parse_number<int>("channels", v); }},
      {"width", [](RunConfig& c, const std::string& v) { c.task.width = parse_number<int>("width", v); }},
      {"height", [](RunConfig& c, const std::string& v) { c.task.height = parse_number<int>("height", v); }},
      {"stride", [](RunConfig& c, const std::string& v) { c.task.stride = parse_number<int>("stride", v); }},
      {"patch", [](RunConfig& c, const std::string& v) { c.task.patch = parse_number<int>("patch", v); }},
      {"signal_channels", [](RunConfig& c, const std::string& v) { c.task.signal_channels = parse_number<int>("signal_channels", v); }},
      {"noise", [](RunConfig& c, const std::string& v) { c.task.noise = parse_number<double>("noise", v); }},
      {"amplitude", [](RunConfig& c, const std::string& v) { c.task.amplitude = parse_number<double>("amplitude", v); }},
      {"distractor", [](RunConfig& c, const std::string& v) { c.task.distractor = parse_number<double>("distractor", v); }},
      {"train_per_class", [](RunConfig& c, const std::string& v) { c.task.train_per_class = parse_number<int>("train_per_class", v); }},
      {"test_per_class", [](RunConfig& c, const std::string& v) { c.task.test_per_class = parse_number<int>("test_per_class", v); }},
      {"parts", [](RunConfig& c, const std::string& v) { c.train.parts = parse_number<int>("parts", v); }},
      {"cells", [](RunConfig& c, const std::string& v) { c.train.cells = parse_number<int>("cells", v); }},
      {"anchors", [](RunConfig& c, const std::string& v) { c.train.anchors = parse_number<int>("anchors", v); }},
      {"pool", [](RunConfig& c, const std::string& v) { c.train.pool = parse_number<int>("pool", v); }},
      {"hidden", [](RunConfig& c, const std::string& v) { c.train.hidden = parse_number<int>("hidden", v); }},
      {"lambda", [](RunConfig& c, const std::string& v) { c.train.lambda = parse_number<double>("lambda", v); }},
      {"momentum", [](RunConfig& c, const std::string& v) { c.train.momentum = parse_number<double>("momentum", v); }},
      {"lr_pretrained", [](RunConfig& c, const std::string& v) { c.train.lr_pretrained = parse_number<double>("lr_pretrained", v); }},
      {"lr_new", [](RunConfig& c, const std::string& v) { c.train.lr_new = parse_number<double>("lr_new", v); }},
      {"epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = parse_number<int>("epochs", v); }},
      {"milestones", [](RunConfig& c, const std::string& v) { c.train.milestones = parse_list("milestones", v); }},
      {"batch", [](RunConfig& c, const std::string& v) { c.train.batch = parse_number<int>("batch", v); }},
      {"flip", [](RunConfig& c, const std::string& v) { c.train.flip = parse_bool("flip", v); }},
      {"svb", [](RunConfig& c, const std::string& v) { c.train.svb = parse_bool("svb", v); }},
      {"svb_epsilon", [](RunConfig& c, const std::string& v) { c.train.svb_epsilon = parse_number<double>("svb_epsilon", v); }},
      {"svb_period", [](RunConfig& c, const std::string& v) { c.train.svb_period = parse_number<int>("svb_period", v); }},
      {"mode", [](RunConfig& c, const std::string& v) { c.train.mode = parse_mode(v); }},
      {"top_m", [](RunConfig& c, const std::string& v) { c.train.top_m = parse_number<int>("top_m", v); }},
      {"part_grid", [](RunConfig& c, const std::string& v) { c.train.part_grid = parse_number<int>("part_grid", v); }},
      {"image_epochs", [](RunConfig& c, const std::string& v) { c.train.image_epochs = parse_number<int>("image_epochs", v); }},
      {"part_epochs", [](RunConfig& c, const std::string& v) { c.train.part_epochs = parse_number<int>("part_epochs", v); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second(*this, value);
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  const auto& t = task;
  const auto& r = train;
  os << "classes=" << r.classes << "\nseed=" << r.seed << "\nchannels=" << t.channels << "\nwidth=" << t.width
     << "\nheight=" << t.height << "\nstride=" << t.stride << "\npatch=" << t.patch
     << "\nsignal_channels=" << t.signal_channels << "\nnoise=" << fmt_double(t.noise)
     << "\namplitude=" << fmt_double(t.amplitude) << "\ndistractor=" << fmt_double(t.distractor)
     << "\ntrain_per_class=" << t.train_per_class
     << "\ntest_per_class=" << t.test_per_class << "\nparts=" << r.parts << "\ncells=" << r.cells
     << "\nanchors=" << r.anchors << "\npool=" << r.pool << "\nhidden=" << r.hidden
     << "\nlambda=" << fmt_double(r.lambda) << "\nmomentum=" << fmt_double(r.momentum)
     << "\nlr_pretrained=" << fmt_double(r.lr_pretrained) << "\nlr_new=" << fmt_double(r.lr_new)
     << "\nepochs=" << r.epochs << "\nmilestones=";
  for (std::size_t i = 0; i < r.milestones.size(); ++i) os << (i ? "," : "") << r.milestones[i];
  os << "\nbatch=" << r.batch << "\nflip=" << (r.flip ? 1 : 0) << "\nsvb=" << (r.svb ? 1 : 0)
     << "\nsvb_epsilon=" << fmt_double(r.svb_epsilon) << "\nsvb_period=" << r.svb_period
     << "\nmode=" << mode_name(r.mode) << "\ntop_m=" << r.top_m << "\npart_grid=" << r.part_grid
     << "\nimage_epochs=" << r.image_epochs << "\npart_epochs=" << r.part_epochs << "\n";
  return os.str();
}

std::string mode_name(TrainMode mode) { return mode == TrainMode::kPartNet ? "partnet" : "degenerate"; }

TrainMode parse_mode(const std::string& text) {
  if (text == "partnet") return TrainMode::kPartNet;
  if (text == "degenerate") return TrainMode::kDegenerate;
  throw ConfigError("config: mode must be 'partnet' or 'degenerate', got '" + text + "'");
}

}  // namespace partnet
