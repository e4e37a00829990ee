#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "ecgtf/error.hpp"
#include "ecgtf/ingest.hpp"
#include "ecgtf/scalogram.hpp"

namespace ecgtf::scalogram {

GrayImage to_grayscale(std::span<const double> values, std::size_t rows, std::size_t cols) {
  if (values.size() != rows * cols) throw InvalidArgument("grayscale: value count disagrees with dimensions");
  GrayImage img;
  img.width = cols;
  img.height = rows;
  img.pixels.assign(values.size(), 0);
  if (values.empty()) return img;
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("grayscale: non-finite coefficient");
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) return img;
  const double range = hi - lo;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double p = std::floor((values[i] - lo) / range * 255.0 + 0.5);
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(p, 0.0, 255.0));
  }
  return img;
}

GrayImage to_grayscale(const Scalogram& s) { return to_grayscale(s.coeffs, s.rows, s.cols); }

std::vector<std::uint8_t> encode_pgm(const GrayImage& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  const auto skip_space = [&] {
    while (pos < raw.size()) {
      if (raw[pos] == '#') {
        while (pos < raw.size() && raw[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(raw[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto read_uint = [&](const char* what) {
    skip_space();
    const std::size_t start = pos;
    std::size_t v = 0;
    while (pos < raw.size() && std::isdigit(static_cast<unsigned char>(raw[pos]))) {
      v = v * 10 + static_cast<std::size_t>(raw[pos] - '0');
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("pgm: expected ") + what, start);
    return v;
  };

  if (raw.size() < 2 || raw[0] != 'P' || raw[1] != '5') throw FormatError("pgm: missing P5 magic", 0);
  pos = 2;
  GrayImage img;
  img.width = read_uint("width");
  img.height = read_uint("height");
  const auto maxval = read_uint("maxval");
  if (maxval != 255) throw FormatError("pgm: only maxval 255 is supported", pos);
  if (pos >= raw.size() || !std::isspace(static_cast<unsigned char>(raw[pos]))) {
    throw FormatError("pgm: header must end with one whitespace byte", pos);
  }
  ++pos;
  const std::size_t count = img.width * img.height;
  if (raw.size() - pos != count) throw FormatError("pgm: payload size disagrees with header", pos);
  img.pixels.resize(count);
  std::memcpy(img.pixels.data(), raw.data() + pos, count);
  return img;
}

void write_f32(const Scalogram& s, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "f32 export assumes a little-endian host");
  std::vector<float> data(s.coeffs.begin(), s.coeffs.end());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw IoError("failed writing " + path.string());

  const nlohmann::json meta = {{"rows", s.rows}, {"cols", s.cols}, {"scales", s.scales}, {"fs", s.fs}};
  std::ofstream side(sidecar_path(path));
  if (!side) throw IoError("cannot write " + sidecar_path(path).string());
  side << meta.dump(2) << '\n';
}

Scalogram read_f32(const std::filesystem::path& path) {
  std::ifstream side(sidecar_path(path));
  if (!side) throw IoError("missing f32 sidecar " + sidecar_path(path).string());
  std::stringstream ss;
  ss << side.rdbuf();
  const auto meta = nlohmann::json::parse(ss.str());

  Scalogram s;
  s.rows = meta.at("rows").get<std::size_t>();
  s.cols = meta.at("cols").get<std::size_t>();
  s.scales = meta.at("scales").get<std::vector<double>>();
  s.fs = meta.at("fs").get<double>();

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() != s.rows * s.cols * sizeof(float)) {
    throw FormatError("f32: payload size disagrees with sidecar dimensions", raw.size());
  }
  std::vector<float> data(s.rows * s.cols);
  std::memcpy(data.data(), raw.data(), raw.size());
  s.coeffs.assign(data.begin(), data.end());
  return s;
}

}  // namespace ecgtf::scalogram
