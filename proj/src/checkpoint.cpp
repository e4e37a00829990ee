#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "config_json.hpp"
#include "ecgtf/classifier.hpp"
#include "ecgtf/error.hpp"
#include "network_internal.hpp"

namespace ecgtf::nn {

namespace {

constexpr char kMagic[8] = {'E', 'C', 'G', 'T', 'F', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void put_le(std::vector<char>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const std::vector<char>& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw FormatError("checkpoint truncated", pos);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return v;
}

nlohmann::json tensor_entry(const Parameter& p, const char* kind) {
  return {{"name", p.name}, {"shape", p.shape}, {"kind", kind}};
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = config_json::to_json(model.config);
  header["metadata"] = {{"seed", model.metadata.seed},
                        {"epochs", model.metadata.epochs},
                        {"final_loss", model.metadata.final_loss}};
  header["tensors"] = nlohmann::json::array();
  for (const auto& p : model.parameters) header["tensors"].push_back(tensor_entry(p, "parameter"));
  for (const auto& b : model.buffers) header["tensors"].push_back(tensor_entry(b, "buffer"));
  const std::string text = header.dump();

  std::vector<char> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  const auto put_values = [&](const std::vector<Parameter>& list) {
    for (const auto& p : list) {
      for (const double v : p.value) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  };
  put_values(model.parameters);
  put_values(model.buffers);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<char> in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + " is not a model checkpoint (bad magic)", 0);
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get_le<std::uint32_t>(in, pos);
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), pos - 4);
  }
  const auto json_len = get_le<std::uint64_t>(in, pos);
  if (json_len > in.size() - pos) throw FormatError("checkpoint header length exceeds file size", pos - 8);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.begin() + static_cast<std::ptrdiff_t>(pos),
                                   in.begin() + static_cast<std::ptrdiff_t>(pos + json_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what(), pos);
  }
  pos += json_len;

  Model model;
  try {
    model.config = config_json::network_from_json(header.at("config"));
    const auto& meta = header.at("metadata");
    model.metadata.seed = meta.at("seed").get<std::uint64_t>();
    model.metadata.epochs = meta.at("epochs").get<int>();
    model.metadata.final_loss = meta.at("final_loss").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what(), sizeof(kMagic) + 12);
  }
  detail::build_topology(model.config, &model.parameters, &model.buffers);

  const auto& tensors = header.at("tensors");
  if (tensors.size() != model.parameters.size() + model.buffers.size()) {
    throw FormatError("checkpoint lists " + std::to_string(tensors.size()) + " tensors, config implies " +
                          std::to_string(model.parameters.size() + model.buffers.size()),
                      sizeof(kMagic) + 12);
  }
  std::size_t t = 0;
  const auto take_values = [&](std::vector<Parameter>& list) {
    for (auto& p : list) {
      const auto& entry = tensors[t++];
      if (entry.at("name").get<std::string>() != p.name ||
          entry.at("shape").get<std::vector<std::size_t>>() != p.shape) {
        throw FormatError("checkpoint tensor " + entry.at("name").get<std::string>() +
                              " does not match the layout expected for " + p.name,
                          sizeof(kMagic) + 12);
      }
      for (auto& v : p.value) v = std::bit_cast<double>(get_le<std::uint64_t>(in, pos));
    }
  };
  take_values(model.parameters);
  take_values(model.buffers);
  if (pos != in.size()) throw FormatError("trailing bytes after checkpoint payload", pos);
  return model;
}

}  // namespace ecgtf::nn
