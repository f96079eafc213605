#include "partnet/render.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "partnet/errors.hpp"

namespace partnet {
namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 8> kPalette{{{230, 25, 75},
                                                              {60, 180, 75},
                                                              {0, 130, 200},
                                                              {255, 225, 25},
                                                              {245, 130, 48},
                                                              {145, 30, 180},
                                                              {70, 240, 240},
                                                              {240, 50, 230}}};

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok += ch;
  }
  return tok;
}

}  // namespace

std::array<std::uint8_t, 3> RgbImage::pixel(int x, int y) const {
  const std::size_t o = (static_cast<std::size_t>(y) * width + x) * 3;
  return {rgb[o], rgb[o + 1], rgb[o + 2]};
}

void RgbImage::set(int x, int y, std::array<std::uint8_t, 3> color) {
  const std::size_t o = (static_cast<std::size_t>(y) * width + x) * 3;
  std::copy(color.begin(), color.end(), rgb.begin() + static_cast<std::ptrdiff_t>(o));
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  if (header_token(in) != "P6") throw FormatError(path.string() + ": not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(header_token(in));
    h = std::stoi(header_token(in));
    maxval = std::stoi(header_token(in));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PPM header");
  }
  if (w < 1 || h < 1 || maxval != 255) throw FormatError(path.string() + ": unsupported PPM geometry or maxval");
  RgbImage img(w, h);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) {
    throw FormatError(path.string() + ": truncated pixel data, missing " +
                      std::to_string(img.rgb.size() - static_cast<std::size_t>(in.gcount())) + " bytes");
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

RgbImage heatmap(const FeatureMap& map) {
  std::vector<double> peak(map.plane_size(), 0.0);
  for (std::size_t p = 0; p < peak.size(); ++p) {
    double best = map.channel(0)[p];
    for (int n = 1; n < map.channels(); ++n) best = std::max(best, map.channel(n)[p]);
    peak[p] = best;
  }
  const auto [lo, hi] = std::minmax_element(peak.begin(), peak.end());
  const double span = *hi - *lo;
  const int s = map.stride();
  RgbImage img(map.width() * s, map.height() * s);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double v = peak[static_cast<std::size_t>(y / s) * map.width() + x / s];
      const auto g = static_cast<std::uint8_t>(span > 0.0 ? std::lround(255.0 * (v - *lo) / span) : 0);
      img.set(x, y, {g, g, g});
    }
  }
  return img;
}

void draw_rect(RgbImage& image, const Box& box, std::array<std::uint8_t, 3> color) {
  const int x0 = std::max(box.x0, 0), y0 = std::max(box.y0, 0);
  const int x1 = std::min(box.x1, image.width - 1), y1 = std::min(box.y1, image.height - 1);
  if (x0 > x1 || y0 > y1) return;
  for (int x = x0; x <= x1; ++x) {
    if (box.y0 >= 0) image.set(x, y0, color);
    if (box.y1 < image.height) image.set(x, y1, color);
  }
  for (int y = y0; y <= y1; ++y) {
    if (box.x0 >= 0) image.set(x0, y, color);
    if (box.x1 < image.width) image.set(x1, y, color);
  }
}

std::array<std::uint8_t, 3> detector_color(int detector) {
  return kPalette[static_cast<std::size_t>(detector) % kPalette.size()];
}

RgbImage render_boxes(const Sample& sample, const PartExtraction& extraction, const RgbImage* source, int* drawn) {
  RgbImage img = source ? *source : heatmap(sample.map);
  int count = 0;
  for (const auto& d : extraction.detectors) {
    draw_rect(img, d.best.proposal.box.scaled(extraction.stride), detector_color(d.detector));
    ++count;
  }
  if (drawn) *drawn = count;
  return img;
}

}  // namespace partnet
