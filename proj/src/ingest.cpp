#include "ecgtf/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ecgtf/error.hpp"
#include "ecgtf/random.hpp"

namespace ecgtf {

namespace fs = std::filesystem;

namespace {

std::vector<std::byte> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::transform(raw.begin(), raw.end(), out.begin(), [](char c) { return std::byte(c); });
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Calls fn(line, byte_offset_of_line, line_number) for each line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  std::size_t line_no = 1;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    fn(text.substr(pos, end - pos), pos, line_no);
    pos = end + 1;
    ++line_no;
  }
}

std::string stem_id(const fs::path& path) { return path.stem().string(); }

EcgRecord from_int16(const std::vector<std::int16_t>& counts, const fs::path& path,
                     const LoadOptions& options) {
  const auto sidecar = read_sidecar(path);
  EcgRecord rec;
  rec.id = (sidecar && sidecar->id) ? *sidecar->id : stem_id(path);
  rec.fs = (sidecar && sidecar->fs) ? *sidecar->fs : options.default_fs;
  rec.scale = (sidecar && sidecar->scale) ? *sidecar->scale : options.default_int_scale;
  rec.samples.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    rec.samples[i] = static_cast<double>(counts[i]) * rec.scale;
  }
  return rec;
}

}  // namespace

void validate(const EcgRecord& record) {
  if (!(record.fs > 0.0) || !std::isfinite(record.fs)) {
    throw InvalidArgument("record '" + record.id + "': sampling rate must be positive");
  }
  if (record.samples.empty()) {
    throw InvalidArgument("record '" + record.id + "': empty signal");
  }
  for (std::size_t i = 0; i < record.samples.size(); ++i) {
    if (!std::isfinite(record.samples[i])) {
      throw InvalidArgument("record '" + record.id + "': non-finite sample at index " +
                            std::to_string(i));
    }
  }
}

RecordFormat parse_record_format(std::string_view name) {
  if (name == "csv") return RecordFormat::kCsv;
  if (name == "raw16") return RecordFormat::kRaw16;
  if (name == "mat5") return RecordFormat::kMat5;
  throw InvalidArgument("unknown record format '" + std::string(name) + "'");
}

std::string_view to_string(RecordFormat format) {
  switch (format) {
    case RecordFormat::kCsv: return "csv";
    case RecordFormat::kRaw16: return "raw16";
    case RecordFormat::kMat5: return "mat5";
  }
  return "?";
}

RecordFormat format_from_extension(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv" || ext == ".txt") return RecordFormat::kCsv;
  if (ext == ".mat") return RecordFormat::kMat5;
  return RecordFormat::kRaw16;
}

fs::path sidecar_path(const fs::path& data_path) {
  auto p = data_path;
  p.replace_extension(".json");
  return p;
}

std::optional<Sidecar> read_sidecar(const fs::path& data_path) {
  const auto path = sidecar_path(data_path);
  if (path == data_path || !fs::exists(path)) return std::nullopt;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("sidecar " + path.string() + ": " + e.what(), e.byte);
  }
  Sidecar s;
  if (j.contains("id")) s.id = j.at("id").get<std::string>();
  if (j.contains("fs")) s.fs = j.at("fs").get<double>();
  if (j.contains("scale")) s.scale = j.at("scale").get<double>();
  return s;
}

EcgRecord load_record(const fs::path& path, RecordFormat format, const LoadOptions& options) {
  EcgRecord rec;
  switch (format) {
    case RecordFormat::kCsv: {
      const auto sidecar = read_sidecar(path);
      rec.id = (sidecar && sidecar->id) ? *sidecar->id : stem_id(path);
      rec.fs = (sidecar && sidecar->fs) ? *sidecar->fs : options.default_fs;
      rec.scale = (sidecar && sidecar->scale) ? *sidecar->scale : 1.0;
      rec.samples = read_csv_values(path);
      break;
    }
    case RecordFormat::kRaw16: {
      const auto bytes = read_bytes(path);
      if (bytes.size() % 2 != 0) {
        throw FormatError("raw16 file " + path.string() + " has an odd byte count",
                          bytes.size() - 1);
      }
      std::vector<std::int16_t> counts(bytes.size() / 2);
      for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto lo = std::to_integer<std::uint16_t>(bytes[2 * i]);
        const auto hi = std::to_integer<std::uint16_t>(bytes[2 * i + 1]);
        counts[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
      }
      rec = from_int16(counts, path, options);
      break;
    }
    case RecordFormat::kMat5: {
      const auto bytes = read_bytes(path);
      rec = from_int16(mat5::read_int16_vector(bytes), path, options);
      break;
    }
  }
  if (rec.samples.empty()) throw InvalidArgument("record " + path.string() + " has an empty signal");
  validate(rec);
  return rec;
}

EcgRecord load_record(const fs::path& path, const LoadOptions& options) {
  return load_record(path, format_from_extension(path), options);
}

void write_raw16(const EcgRecord& record, const fs::path& path) {
  validate(record);
  if (!(record.scale > 0.0)) throw InvalidArgument("raw16 export needs a positive scale");
  std::string payload;
  payload.reserve(record.samples.size() * 2);
  for (double v : record.samples) {
    const double q = std::round(v / record.scale);
    if (q < std::numeric_limits<std::int16_t>::min() || q > std::numeric_limits<std::int16_t>::max()) {
      throw InvalidArgument("sample " + format_double(v) + " does not fit int16 at scale " +
                            format_double(record.scale));
    }
    const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(q));
    payload.push_back(static_cast<char>(u & 0xFF));
    payload.push_back(static_cast<char>(u >> 8));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));

  const nlohmann::json side = {{"id", record.id}, {"fs", record.fs}, {"scale", record.scale}};
  std::ofstream sc(sidecar_path(path));
  if (!sc) throw IoError("cannot write " + sidecar_path(path).string());
  sc << side.dump(2) << '\n';
}

// ---- csv --------------------------------------------------------------------

std::vector<double> parse_csv_values(std::string_view text) {
  std::vector<double> out;
  for_each_line(text, [&](std::string_view line, std::size_t offset, std::size_t line_no) {
    const auto token = trim(line);
    if (token.empty()) return;
    double v = 0.0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    // from_chars rejects a leading '+'
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      const auto bad = static_cast<std::size_t>((ec != std::errc() ? first : ptr) - line.data());
      throw FormatError("csv line " + std::to_string(line_no) + ": cannot parse '" +
                            std::string(token) + "' as a number",
                        offset + bad);
    }
    out.push_back(v);
  });
  return out;
}

std::vector<double> read_csv_values(const fs::path& path) {
  try {
    return parse_csv_values(read_text(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_csv_values(const fs::path& path, std::span<const double> values) {
  std::string text;
  text.reserve(values.size() * 12);
  for (double v : values) {
    text += format_double(v);
    text += '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_csv_indices(const fs::path& path, std::span<const std::size_t> indices) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (auto i : indices) out << i << '\n';
}

std::vector<std::size_t> read_csv_indices(const fs::path& path) {
  const auto text = read_text(path);
  std::vector<std::size_t> out;
  for_each_line(text, [&](std::string_view line, std::size_t offset, std::size_t line_no) {
    const auto token = trim(line);
    if (token.empty()) return;
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw FormatError(path.string() + " line " + std::to_string(line_no) +
                            ": expected a sample index",
                        offset);
    }
    out.push_back(v);
  });
  return out;
}

// ---- labels -----------------------------------------------------------------

char to_symbol(Rhythm rhythm) {
  switch (rhythm) {
    case Rhythm::kNormal: return 'N';
    case Rhythm::kAF: return 'A';
    case Rhythm::kOther: return 'O';
    case Rhythm::kNoise: return '~';
  }
  return '?';
}

std::string_view to_name(Rhythm rhythm) {
  switch (rhythm) {
    case Rhythm::kNormal: return "Normal";
    case Rhythm::kAF: return "AF";
    case Rhythm::kOther: return "Other";
    case Rhythm::kNoise: return "Noise";
  }
  return "?";
}

std::optional<Rhythm> rhythm_from_symbol(std::string_view symbol) {
  if (symbol == "N") return Rhythm::kNormal;
  if (symbol == "A") return Rhythm::kAF;
  if (symbol == "O") return Rhythm::kOther;
  if (symbol == "~") return Rhythm::kNoise;
  return std::nullopt;
}

std::optional<Rhythm> LabelSet::find(const std::string& id) const {
  const auto it = by_id.find(id);
  if (it == by_id.end()) return std::nullopt;
  return it->second;
}

LabelSet parse_labels(std::string_view text) {
  LabelSet set;
  for_each_line(text, [&](std::string_view line, std::size_t offset, std::size_t line_no) {
    const auto row = trim(line);
    if (row.empty()) return;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos) {
      throw FormatError("labels line " + std::to_string(line_no) + ": expected 'id,label'", offset);
    }
    const std::string id(trim(row.substr(0, comma)));
    const auto symbol = trim(row.substr(comma + 1));
    if (id.empty()) {
      throw FormatError("labels line " + std::to_string(line_no) + ": empty record id", offset);
    }
    const auto rhythm = rhythm_from_symbol(symbol);
    if (!rhythm) {
      throw FormatError("labels line " + std::to_string(line_no) + ": unknown label '" +
                            std::string(symbol) + "'",
                        offset);
    }
    if (!set.by_id.emplace(id, *rhythm).second) {
      throw FormatError("labels line " + std::to_string(line_no) + ": duplicate id '" + id + "'",
                        offset);
    }
    set.ids.push_back(id);
  });
  return set;
}

LabelSet load_labels(const fs::path& path) {
  try {
    return parse_labels(read_text(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what(), e.offset());
  }
}

std::vector<std::string> missing_labels(const LabelSet& labels,
                                        std::span<const std::string> record_ids) {
  std::vector<std::string> missing;
  for (const auto& id : record_ids) {
    if (!labels.by_id.contains(id)) missing.push_back(id);
  }
  return missing;
}

// ---- synthesis --------------------------------------------------------------

SynthEcg synth_ecg(const SynthSpec& spec) {
  if (!(spec.duration_s > 0.0)) throw InvalidArgument("synth: duration must be positive");
  if (!(spec.bpm > 0.0)) throw InvalidArgument("synth: heart rate must be positive");
  if (!(spec.noise_sigma >= 0.0)) throw InvalidArgument("synth: noise sigma must be >= 0");
  if (!(spec.fs > 0.0)) throw InvalidArgument("synth: sampling rate must be positive");
  if (!(spec.qrs_width_s > 0.0)) throw InvalidArgument("synth: QRS width must be positive");
  if (!(spec.rr_jitter >= 0.0 && spec.rr_jitter < 1.0)) {
    throw InvalidArgument("synth: RR jitter must lie in [0, 1)");
  }

  Rng rng(spec.seed);
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.fs));
  if (n == 0) throw InvalidArgument("synth: duration shorter than one sample");

  SynthEcg out;
  out.record.id = "synth-" + std::to_string(spec.seed);
  out.record.fs = spec.fs;
  out.record.samples.assign(n, 0.0);

  const double rr = 60.0 / spec.bpm;
  for (double t = rr / 2.0; t < spec.duration_s;
       t += rr * (1.0 + spec.rr_jitter * rng.uniform(-1.0, 1.0))) {
    const auto idx = static_cast<std::size_t>(std::llround(t * spec.fs));
    if (idx >= n) break;
    out.peaks.push_back(idx);
  }

  const double sigma = spec.qrs_width_s / 6.0 * spec.fs;  // in samples
  const auto reach = static_cast<std::ptrdiff_t>(std::ceil(10.0 * sigma));
  for (const auto p : out.peaks) {
    const auto centre = static_cast<std::ptrdiff_t>(p);
    const auto lo = std::max<std::ptrdiff_t>(0, centre - reach);
    const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, centre + reach);
    for (auto i = lo; i <= hi; ++i) {
      const double d = static_cast<double>(i - centre) / sigma;
      out.record.samples[static_cast<std::size_t>(i)] += spec.qrs_amplitude * std::exp(-0.5 * d * d);
    }
  }
  if (spec.noise_sigma > 0.0) {
    for (auto& v : out.record.samples) v += spec.noise_sigma * rng.normal();
  }
  return out;
}

}  // namespace ecgtf
