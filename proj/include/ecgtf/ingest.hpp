#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ecgtf {

/// One single-lead ECG.
struct EcgRecord {
  std::string id;
  double fs = 200.0;             ///< Hz
  std::vector<double> samples;   ///< real amplitudes (raw ADC units × scale)
  double scale = 1.0;            ///< amplitude units per ADC count the samples were derived with

  double duration() const { return static_cast<double>(samples.size()) / fs; }
};

/// Throws InvalidArgument unless fs > 0, samples nonempty and all finite.
void validate(const EcgRecord& record);

enum class RecordFormat { kCsv, kRaw16, kMat5 };

RecordFormat parse_record_format(std::string_view name);
std::string_view to_string(RecordFormat format);

/// Guess the format from the extension: .csv, .mat, anything else raw16.
RecordFormat format_from_extension(const std::filesystem::path& path);

struct LoadOptions {
  double default_fs = 200.0;
  /// Scale applied to 16-bit formats when no sidecar gives one (mV per count).
  double default_int_scale = 1e-3;
};

/// Sidecar metadata next to a data file: `<stem>.json` with {id, fs, scale}.
struct Sidecar {
  std::optional<std::string> id;
  std::optional<double> fs;
  std::optional<double> scale;
};

std::filesystem::path sidecar_path(const std::filesystem::path& data_path);
std::optional<Sidecar> read_sidecar(const std::filesystem::path& data_path);

EcgRecord load_record(const std::filesystem::path& path, RecordFormat format,
                      const LoadOptions& options = {});

/// Dispatch on the extension.
EcgRecord load_record(const std::filesystem::path& path, const LoadOptions& options = {});

/// Little-endian int16 payload plus the JSON sidecar. Samples are divided by
/// record.scale and rounded half away from zero; values outside int16 throw.
void write_raw16(const EcgRecord& record, const std::filesystem::path& path);

// ---- csv helpers shared by every one-value-per-line file in the project ----

std::vector<double> read_csv_values(const std::filesystem::path& path);
std::vector<double> parse_csv_values(std::string_view text);

/// Values are written in shortest round-trip form, so reading the file back
/// gives bit-identical doubles.
void write_csv_values(const std::filesystem::path& path, std::span<const double> values);
void write_csv_indices(const std::filesystem::path& path, std::span<const std::size_t> indices);
std::vector<std::size_t> read_csv_indices(const std::filesystem::path& path);

std::string format_double(double value);

// ---- MATLAB level-5 -------------------------------------------------------

namespace mat5 {

/// Extract the int16 matrix called `name` from an uncompressed level-5 file.
/// The file must hold exactly one variable, that variable must be a real
/// vector, and its payload must be stored as miINT16 (class int16, or class
/// double when MATLAB chose int16 storage). Anything else is a FormatError.
std::vector<std::int16_t> read_int16_vector(std::span<const std::byte> file,
                                            std::string_view name = "val");

}  // namespace mat5

// ---- labels ----------------------------------------------------------------

enum class Rhythm : int { kNormal = 0, kAF = 1, kOther = 2, kNoise = 3 };

inline constexpr int kClassCount = 4;

/// N, A, O, ~
char to_symbol(Rhythm rhythm);
std::string_view to_name(Rhythm rhythm);
std::optional<Rhythm> rhythm_from_symbol(std::string_view symbol);

struct LabelSet {
  std::vector<std::string> ids;  ///< file order
  std::map<std::string, Rhythm> by_id;

  std::optional<Rhythm> find(const std::string& id) const;
  std::size_t size() const { return ids.size(); }
};

LabelSet parse_labels(std::string_view text);
LabelSet load_labels(const std::filesystem::path& path);

/// Ids in `record_ids` that have no label.
std::vector<std::string> missing_labels(const LabelSet& labels,
                                        std::span<const std::string> record_ids);

// ---- synthetic ECG ------------------------------------------------------------

struct SynthSpec {
  double duration_s = 30.0;
  double bpm = 60.0;
  double qrs_amplitude = 1.0;   ///< mV, apex of each bump
  double qrs_width_s = 0.1;     ///< ±3σ extent of the Gaussian bump
  double noise_sigma = 0.0;     ///< mV, additive white Gaussian
  std::uint64_t seed = 0;
  double fs = 200.0;
  /// Each RR interval is drawn as mean RR × (1 + jitter × U[-1, 1]).
  double rr_jitter = 0.0;
};

struct SynthEcg {
  EcgRecord record;
  std::vector<std::size_t> peaks;  ///< ground-truth R positions (sample index)
};

/// Train of Gaussian QRS bumps, first peak half an RR interval in.
SynthEcg synth_ecg(const SynthSpec& spec);

}  // namespace ecgtf
