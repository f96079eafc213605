#include "partnet/feature_map.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "partnet/errors.hpp"

namespace partnet {
namespace {

void check_dims(int channels, int width, int height, int stride) {
  if (channels < 1 || width < 1 || height < 1) {
    throw UsageError("feature map needs N, W, H >= 1 (got " + std::to_string(channels) + "x" +
                     std::to_string(width) + "x" + std::to_string(height) + ")");
  }
  if (stride < 1) throw UsageError("feature map stride must be >= 1");
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

FeatureMap::FeatureMap(int channels, int width, int height, int stride)
    : channels_(channels), width_(width), height_(height), stride_(stride) {
  check_dims(channels, width, height, stride);
  values_ = Tensor({static_cast<std::size_t>(channels), static_cast<std::size_t>(height),
                    static_cast<std::size_t>(width)});
}

FeatureMap::FeatureMap(int channels, int width, int height, int stride, std::vector<double> values)
    : channels_(channels), width_(width), height_(height), stride_(stride) {
  check_dims(channels, width, height, stride);
  values_ = Tensor({static_cast<std::size_t>(channels), static_cast<std::size_t>(height),
                    static_cast<std::size_t>(width)},
                   std::move(values));
}

std::span<const double> FeatureMap::channel(int n) const {
  return values_.values().subspan(static_cast<std::size_t>(n) * plane_size(), plane_size());
}

FeatureMap flip_horizontal(const FeatureMap& map) {
  FeatureMap out(map.channels(), map.width(), map.height(), map.stride());
  for (int n = 0; n < map.channels(); ++n)
    for (int y = 0; y < map.height(); ++y)
      for (int x = 0; x < map.width(); ++x) out.at(n, map.width() - 1 - x, y) = map.at(n, x, y);
  return out;
}

std::vector<std::uint8_t> encode_pnfm(const FeatureMap& map, int label) {
  if (label < 0) throw DataError("PNFM label must be non-negative");
  std::vector<std::uint8_t> out;
  out.reserve(kPnfmHeaderBytes + map.tensor().size() * 4);
  for (char c : {'P', 'N', 'F', 'M'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, kPnfmVersion);
  put_u32(out, static_cast<std::uint32_t>(map.channels()));
  put_u32(out, static_cast<std::uint32_t>(map.width()));
  put_u32(out, static_cast<std::uint32_t>(map.height()));
  put_u32(out, static_cast<std::uint32_t>(map.stride()));
  put_u32(out, static_cast<std::uint32_t>(label));
  for (double v : map.tensor().values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Sample decode_pnfm(std::span<const std::uint8_t> bytes, const std::string& source) {
  if (bytes.size() < kPnfmHeaderBytes) {
    throw FormatError(source + ": truncated header, need " + std::to_string(kPnfmHeaderBytes) +
                      " bytes, have " + std::to_string(bytes.size()) + " (missing " +
                      std::to_string(kPnfmHeaderBytes - bytes.size()) + " bytes)");
  }
  if (std::memcmp(bytes.data(), "PNFM", 4) != 0) throw FormatError(source + ": bad magic at offset 0");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kPnfmVersion) {
    throw FormatError(source + ": unsupported version " + std::to_string(version) + " at offset 4");
  }
  const std::uint32_t n = get_u32(bytes, 8), w = get_u32(bytes, 12), h = get_u32(bytes, 16);
  const std::uint32_t stride = get_u32(bytes, 20), label = get_u32(bytes, 24);
  if (n == 0 || w == 0 || h == 0) throw FormatError(source + ": zero dimension in header at offset 8");
  if (stride == 0) throw FormatError(source + ": zero stride at offset 20");
  const std::size_t count = static_cast<std::size_t>(n) * w * h;
  const std::size_t expected = kPnfmHeaderBytes + count * 4;
  if (bytes.size() < expected) {
    throw FormatError(source + ": truncated payload at offset " + std::to_string(bytes.size()) +
                      ", missing " + std::to_string(expected - bytes.size()) + " bytes");
  }
  if (bytes.size() > expected) {
    throw FormatError(source + ": " + std::to_string(bytes.size() - expected) +
                      " trailing bytes after offset " + std::to_string(expected));
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float f = std::bit_cast<float>(get_u32(bytes, kPnfmHeaderBytes + 4 * i));
    if (!std::isfinite(f)) {
      throw FormatError(source + ": non-finite value at offset " + std::to_string(kPnfmHeaderBytes + 4 * i));
    }
    values[i] = f;
  }
  Sample s;
  s.map = FeatureMap(static_cast<int>(n), static_cast<int>(w), static_cast<int>(h), static_cast<int>(stride),
                     std::move(values));
  s.label = static_cast<int>(label);
  s.source = source;
  return s;
}

void write_pnfm(const std::filesystem::path& path, const FeatureMap& map, int label) {
  const auto bytes = encode_pnfm(map, label);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Sample read_pnfm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_pnfm(bytes, path.string());
}

std::vector<Sample> ingest_features(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<Sample> samples;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().extension() == ".pnfm") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) samples.push_back(read_pnfm(f));
  } else if (path.extension() == ".jsonl") {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open manifest " + path.string());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (!rec.contains("file")) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": no \"file\"");
      fs::path file = rec["file"].get<std::string>();
      if (file.is_relative()) file = path.parent_path() / file;
      Sample s = read_pnfm(file);
      if (rec.contains("label") && rec["label"].get<int>() != s.label) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": manifest label " +
                        std::to_string(rec["label"].get<int>()) + " disagrees with header label " +
                        std::to_string(s.label) + " in " + file.string());
      }
      samples.push_back(std::move(s));
    }
  } else {
    samples.push_back(read_pnfm(path));
  }
  if (samples.empty()) throw FormatError("no feature maps found at " + path.string());
  return samples;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text) {
  return fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << value;
  return os.str();
}

}  // namespace partnet
