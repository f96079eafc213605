#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "partnet/checkpoint.hpp"
#include "partnet/config.hpp"
#include "partnet/dpp.hpp"
#include "partnet/errors.hpp"
#include "partnet/feature_map.hpp"
#include "partnet/image_model.hpp"
#include "partnet/parts.hpp"
#include "partnet/render.hpp"
#include "partnet/synthetic.hpp"
#include "support/oracles.hpp"

using namespace partnet;
namespace fs = std::filesystem;
namespace o = partnet::oracle;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("partnet_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

FeatureMap float_map(SeededRng& rng, int n, int w, int h, int stride) {
  FeatureMap m(n, w, h, stride);
  for (double& v : m.tensor().values()) v = static_cast<float>(rng.uniform(-5, 5));
  return m;
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("pnfm round trip is bit exact") {
  SeededRng rng(501);
  FeatureMap map = float_map(rng, 3, 5, 4, 16);
  const auto bytes = encode_pnfm(map, 7);
  CHECK(bytes.size() == kPnfmHeaderBytes + 4 * 60);
  CHECK(std::memcmp(bytes.data(), "PNFM", 4) == 0);
  Sample back = decode_pnfm(bytes);
  CHECK(back.label == 7);
  CHECK(back.map.channels() == 3);
  CHECK(back.map.width() == 5);
  CHECK(back.map.height() == 4);
  CHECK(back.map.stride() == 16);
  CHECK(back.map.tensor() == map.tensor());

  const fs::path dir = scratch("roundtrip");
  write_pnfm(dir / "x.pnfm", map, 2);
  Sample file = read_pnfm(dir / "x.pnfm");
  CHECK(file.map.tensor() == map.tensor());
  CHECK(file.source == (dir / "x.pnfm").string());
}

TEST_CASE("pnfm layout is channel-major with rows of width W") {
  FeatureMap map(2, 3, 2);
  map.at(1, 2, 0) = 1.5;
  const auto bytes = encode_pnfm(map, 0);
  const std::size_t offset = kPnfmHeaderBytes + 4 * (1 * 6 + 0 * 3 + 2);
  float v = 0.0f;
  std::memcpy(&v, bytes.data() + offset, 4);
  CHECK(v == 1.5f);
}

TEST_CASE("pnfm errors name the problem") {
  SeededRng rng(503);
  FeatureMap map = float_map(rng, 2, 3, 3, 1);
  auto bytes = encode_pnfm(map, 1);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 6);
  CHECK_THROWS_WITH_AS(decode_pnfm(truncated), doctest::Contains("missing 6 bytes"), FormatError);
  CHECK_THROWS_WITH_AS(decode_pnfm(std::span(bytes.data(), 10)), doctest::Contains("missing 18 bytes"), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_WITH_AS(decode_pnfm(magic), doctest::Contains("bad magic"), FormatError);
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_WITH_AS(decode_pnfm(version), doctest::Contains("version"), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_pnfm(trailing), FormatError);
  auto nan = bytes;
  const float bad = NAN;
  std::memcpy(nan.data() + kPnfmHeaderBytes + 8, &bad, 4);
  CHECK_THROWS_WITH_AS(decode_pnfm(nan), doctest::Contains("offset 36"), FormatError);
  CHECK_THROWS_AS(read_pnfm("/nonexistent/file.pnfm"), FormatError);
  CHECK_THROWS_AS(encode_pnfm(map, -1), DataError);
}

TEST_CASE("ingestion from a directory and a manifest") {
  SeededRng rng(505);
  const fs::path dir = scratch("ingest");
  std::vector<FeatureMap> maps;
  for (int i = 0; i < 3; ++i) {
    maps.push_back(float_map(rng, 2, 4, 4, 8));
    write_pnfm(dir / ("m" + std::to_string(2 - i) + ".pnfm"), maps.back(), i);
  }
  auto all = ingest_features(dir);
  REQUIRE(all.size() == 3);
  CHECK(all[0].label == 2);
  CHECK(all[0].map.tensor() == maps[2].tensor());
  CHECK(ingest_features(dir / "m1.pnfm").at(0).label == 1);

  {
    std::ofstream m(dir / "set.jsonl");
    m << R"({"file": "m0.pnfm", "label": 2})" << "\n\n" << R"({"file": "m2.pnfm"})" << "\n";
  }
  auto listed = ingest_features(dir / "set.jsonl");
  REQUIRE(listed.size() == 2);
  CHECK(listed[1].label == 0);
  {
    std::ofstream m(dir / "bad.jsonl");
    m << R"({"file": "m0.pnfm", "label": 1})" << "\n";
  }
  CHECK_THROWS_AS(ingest_features(dir / "bad.jsonl"), DataError);
  {
    std::ofstream m(dir / "broken.jsonl");
    m << "{not json\n";
  }
  CHECK_THROWS_WITH_AS(ingest_features(dir / "broken.jsonl"), doctest::Contains(":1:"), FormatError);
  CHECK_THROWS_AS(ingest_features(scratch("empty")), FormatError);
}

TEST_CASE("exporter-written files load with matching checksums") {
  const fs::path dir = fs::path(PARTNET_FIXTURE_DIR);
  if (!fs::exists(dir / "expected.json")) {
    MESSAGE("fixture directory missing; run the pnfm_fixture test first");
    CHECK(fs::exists(dir / "expected.json"));
    return;
  }
  std::ifstream in(dir / "expected.json");
  const auto expected = nlohmann::json::parse(in);
  for (const auto& rec : expected) {
    const fs::path file = dir / rec["file"].get<std::string>();
    Sample s = read_pnfm(file);
    CHECK(s.map.channels() == rec["channels"].get<int>());
    CHECK(s.map.width() == rec["width"].get<int>());
    CHECK(s.map.height() == rec["height"].get<int>());
    CHECK(s.map.stride() == rec["stride"].get<int>());
    CHECK(s.label == rec["label"].get<int>());
    const auto bytes = read_bytes(file);
    CHECK(hex64(fnv1a64(std::span(bytes).subspan(kPnfmHeaderBytes))) == rec["checksum"].get<std::string>());
    const auto reencoded = encode_pnfm(s.map, s.label);
    CHECK(reencoded == bytes);
  }
  CHECK(ingest_features(dir / "manifest.jsonl").size() == expected.size());
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("checkpoint round trip and truncation") {
  Checkpoint c{"partnet", "classes=3\n", {{"w", Tensor::from_rows({{1, 2}, {3, 4}})}, {"b", Tensor::vector({0.1})}}};
  const auto bytes = encode_checkpoint(c);
  Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.kind == "partnet");
  CHECK(back.config == "classes=3\n");
  CHECK(back.blob("w") == c.blob("w"));
  CHECK(back.has("b"));
  CHECK_FALSE(back.has("x"));
  CHECK_THROWS_AS(back.blob("x"), FormatError);
  auto cut = bytes;
  cut.resize(bytes.size() - 3);
  CHECK_THROWS_WITH_AS(decode_checkpoint(cut), doctest::Contains("missing 3 bytes"), FormatError);
  auto magic = bytes;
  magic[3] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(magic), FormatError);
  const fs::path dir = scratch("ckpt");
  save_checkpoint(dir / "c.pnck", c);
  CHECK(load_checkpoint(dir / "c.pnck").blob("b") == c.blob("b"));
}

TEST_CASE("config parsing") {
  RunConfig c = RunConfig::parse("# comment\nclasses = 4\nseed=9  # trailing\nmilestones=5,7\nflip=off\nmode=degenerate\n");
  CHECK(c.task.classes == 4);
  CHECK(c.train.classes == 4);
  CHECK(c.task.seed == 9);
  CHECK(c.train.seed == 9);
  CHECK(c.train.milestones == std::vector<int>{5, 7});
  CHECK_FALSE(c.train.flip);
  CHECK(c.train.mode == TrainMode::kDegenerate);
  CHECK_THROWS_WITH_AS(RunConfig::parse("bogus=1"), doctest::Contains("bogus"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("classes=x"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("noise=0.1abc"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("just a line"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("mode=other"), ConfigError);
  const RunConfig again = RunConfig::parse(c.to_text());
  CHECK(again.to_text() == c.to_text());
  RunConfig bad;
  bad.train.anchors = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  RunConfig overlap;
  overlap.task.channels = 5;
  CHECK_THROWS_AS(overlap.validate(), ConfigError);
}

namespace {

SyntheticTaskSpec small_task(double noise) {
  SyntheticTaskSpec t;
  t.classes = 4;
  t.channels = 12;
  t.signal_channels = 3;
  t.width = t.height = 14;
  t.patch = 3;
  t.noise = noise;
  t.train_per_class = 10;
  t.test_per_class = 5;
  t.seed = 3;
  return t;
}

// Planted patch profile: a tent with its square mean removed, center = amplitude.
std::vector<double> patch_template(const SyntheticTaskSpec& t) {
  const int half = (t.patch - 1) / 2;
  std::vector<double> w;
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx)
      w.push_back((1.0 - std::abs(dx) / (half + 1.0)) * (1.0 - std::abs(dy) / (half + 1.0)));
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  for (double& v : w) v = t.amplitude * (v - mean) / (1.0 - mean);
  return w;
}

// Scores each class by the best match of the planted template on its signal
// channels.
int template_classifier(const SyntheticTaskSpec& t, const FeatureMap& map) {
  const int half = (t.patch - 1) / 2;
  const std::vector<double> w = patch_template(t);
  int best = 0;
  double best_score = -INFINITY;
  for (int c = 0; c < t.classes; ++c) {
    for (int y = half; y < map.height() - half; ++y)
      for (int x = half; x < map.width() - half; ++x) {
        double score = 0.0;
        for (int n = c * t.signal_channels; n < (c + 1) * t.signal_channels; ++n)
          for (int dy = -half, k = 0; dy <= half; ++dy)
            for (int dx = -half; dx <= half; ++dx, ++k) {
              const double diff = map.at(n, x + dx, y + dy) - w[static_cast<std::size_t>(k)];
              score -= diff * diff;
            }
        if (score > best_score) best_score = score, best = c;
      }
  }
  return best;
}

}  // namespace

TEST_CASE("synthetic generation") {
  const SyntheticTaskSpec t = small_task(0.0);
  SyntheticDataset a = gen_synthetic(t), b = gen_synthetic(t);
  REQUIRE(a.train.size() == 40);
  REQUIRE(a.test.size() == 20);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].sample.map.tensor() == b.train[i].sample.map.tensor());
    CHECK(a.train[i].sample.label == static_cast<int>(i % 4));
  }
  SyntheticTaskSpec other = t;
  other.seed = 4;
  CHECK_FALSE(gen_synthetic(other).train[0].sample.map.tensor() == a.train[0].sample.map.tensor());

  // Noiseless: the label's channels all peak at the planted center.
  for (const auto& s : a.train) {
    const PeakHistogram h = peak_histogram(s.sample.map);
    CHECK(h.at(s.center.x, s.center.y) >= static_cast<std::uint32_t>(t.signal_channels));
    const int first = first_signal_channel(t, s.sample.label);
    for (int n = first; n < first + t.signal_channels; ++n) {
      const auto plane = s.sample.map.channel(n);
      const auto at = std::max_element(plane.begin(), plane.end()) - plane.begin();
      CHECK(at == s.center.y * t.width + s.center.x);
      CHECK(plane[at] == t.amplitude);
    }
    CHECK(s.patch.width() == t.patch);
    CHECK(s.patch.x0 >= 0);
    CHECK(s.patch.x1 < t.width);
  }

  int correct = 0;
  for (const auto& s : a.test) correct += template_classifier(t, s.sample.map) == s.sample.label;
  CHECK(correct == static_cast<int>(a.test.size()));
}

TEST_CASE("channel means carry no class signal without noise") {
  SyntheticTaskSpec t = small_task(0.0);
  for (const double distractor : {0.0, 0.5}) {
    t.distractor = distractor;
    for (const auto& s : gen_synthetic(t).train) {
      const Tensor g = global_average_pool(s.sample.map);
      for (std::size_t n = 0; n < g.size(); ++n) CHECK(g[n] == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("planted patch matches its profile and decoys land on other classes") {
  SyntheticTaskSpec t = small_task(0.0);
  t.patch = 5;
  t.distractor = 0.25;
  const std::vector<double> w = patch_template(t);
  for (const auto& s : gen_synthetic(t).train) {
    const int first = first_signal_channel(t, s.sample.label);
    for (int n = first; n < first + t.signal_channels; ++n) {
      int k = 0;
      for (int y = s.patch.y0; y <= s.patch.y1; ++y)
        for (int x = s.patch.x0; x <= s.patch.x1; ++x)
          CHECK(s.sample.map.at(n, x, y) == doctest::Approx(w[static_cast<std::size_t>(k++)]).epsilon(1e-12));
    }
    for (int n = 0; n < t.classes * t.signal_channels; ++n) {
      const auto plane = s.sample.map.channel(n);
      const double peak = *std::max_element(plane.begin(), plane.end());
      const bool own = n >= first && n < first + t.signal_channels;
      CHECK(peak == doctest::Approx(own ? t.amplitude : t.distractor * t.amplitude).epsilon(1e-12));
    }
  }
}

TEST_CASE("inconsistent synthetic specs are rejected") {
  SyntheticTaskSpec t = small_task(0.1);
  t.patch = 4;
  CHECK_THROWS_AS(gen_synthetic(t), ConfigError);
  t = small_task(0.1);
  t.patch = 15;
  CHECK_THROWS_AS(gen_synthetic(t), ConfigError);
  t = small_task(0.1);
  t.channels = 11;
  CHECK_THROWS_AS(gen_synthetic(t), ConfigError);
  t = small_task(-1.0);
  CHECK_THROWS_AS(gen_synthetic(t), ConfigError);
}

TEST_CASE("ensemble averaging") {
  const Tensor a = Tensor::vector({1, 0}), b = Tensor::vector({0, 1});
  CHECK(ensemble_predict(std::vector<Tensor>{a}) == a);
  CHECK(ensemble_predict(std::vector<Tensor>{a, b}) == Tensor::vector({0.5, 0.5}));
  const Tensor p = Tensor::vector({0.2, 0.7, 0.1});
  const Tensor e = ensemble_predict(std::vector<Tensor>{p, p, p});
  CHECK(std::max_element(e.values().begin(), e.values().end()) - e.values().begin() == 1);
  CHECK_THROWS_AS(ensemble_predict(std::vector<Tensor>{}), UsageError);
  CHECK_THROWS_AS(ensemble_predict(std::vector<Tensor>{a, p}), DimensionError);
}

TEST_CASE("ppm files and rectangles") {
  RgbImage img(7, 5);
  draw_rect(img, {1, 1, 4, 3}, {255, 0, 0});
  CHECK(img.pixel(1, 1) == std::array<std::uint8_t, 3>{255, 0, 0});
  CHECK(img.pixel(4, 3) == std::array<std::uint8_t, 3>{255, 0, 0});
  CHECK(img.pixel(2, 2) == std::array<std::uint8_t, 3>{0, 0, 0});
  CHECK(img.pixel(0, 0) == std::array<std::uint8_t, 3>{0, 0, 0});
  draw_rect(img, {5, 3, 20, 20}, {0, 255, 0});
  CHECK(img.pixel(6, 3) == std::array<std::uint8_t, 3>{0, 255, 0});

  const fs::path dir = scratch("ppm");
  write_ppm(dir / "x.ppm", img);
  const auto bytes = read_bytes(dir / "x.ppm");
  CHECK(std::string(bytes.begin(), bytes.begin() + 11) == "P6\n7 5\n255\n");
  RgbImage back = read_ppm(dir / "x.ppm");
  CHECK(back.width == 7);
  CHECK(back.rgb == img.rgb);
  CHECK_THROWS_AS(read_ppm(dir / "missing.ppm"), FormatError);
  for (int d = 1; d < 8; ++d) CHECK(detector_color(d) != detector_color(d - 1));
}

TEST_CASE("rendering draws one box per detector at stride scale") {
  SeededRng rng(507);
  Sample s{o::random_map(rng, 2, 6, 5), 0, ""};
  s.map = FeatureMap(2, 6, 5, 4, std::vector<double>(s.map.tensor().values().begin(), s.map.tensor().values().end()));
  PartExtraction ex;
  ex.stride = 4;
  const std::vector<Box> boxes{{0, 0, 1, 1}, {2, 1, 4, 3}, {3, 3, 5, 4}};
  for (int p = 0; p < 3; ++p) {
    DetectorParts d;
    d.detector = p;
    d.best = {0, {boxes[p], 0, p}, 0.5};
    d.top = {d.best};
    ex.detectors.push_back(d);
  }
  int drawn = 0;
  RgbImage img = render_boxes(s, ex, nullptr, &drawn);
  CHECK(drawn == 3);
  CHECK(img.width == 24);
  CHECK(img.height == 20);
  for (int p = 0; p < 3; ++p) {
    const Box px = boxes[p].scaled(4);
    CHECK(img.pixel(px.x0, px.y0) == detector_color(p));
    CHECK(img.pixel(px.x1, px.y1) == detector_color(p));
  }
  RgbImage source(24, 20);
  RgbImage over = render_boxes(s, ex, &source, &drawn);
  CHECK(over.width == source.width);
  CHECK(over.height == source.height);
  CHECK(over.pixel(8, 4) == detector_color(1));
  RgbImage smaller(10, 10);
  CHECK(render_boxes(s, ex, &smaller).width == 10);
}
