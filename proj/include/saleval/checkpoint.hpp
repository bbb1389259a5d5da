#pragma once

// Checkpoint container:
//   8 bytes  magic "SALCKPT\0"
//   u32 LE   format version
//   u64 LE   header length
//   header   UTF-8 JSON (layer specs, input shape, dtype, seed, metadata)
//   payload  per layer: weights then biases, raw little-endian scalars

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "saleval/error.hpp"
#include "saleval/network.hpp"

namespace saleval {

inline constexpr char kCheckpointMagic[8] = {'S', 'A', 'L', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

inline nlohmann::json layer_spec_to_json(const LayerSpec& s) {
  nlohmann::json j{{"kind", std::string(to_string(s.kind))}};
  switch (s.kind) {
    case LayerKind::dense:
      j["in"] = s.in;
      j["out"] = s.out;
      break;
    case LayerKind::conv2d:
      j["in"] = s.in;
      j["out"] = s.out;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["padding"] = s.padding;
      break;
    case LayerKind::maxpool2d:
      j["kernel"] = s.kernel;
      break;
    case LayerKind::upsample2d:
      j["factor"] = s.factor;
      break;
    case LayerKind::reshape:
      j["target"] = s.target;
      break;
    default:
      break;
  }
  return j;
}

inline LayerSpec layer_spec_from_json(const nlohmann::json& j) {
  const auto kind = layer_kind_from_string(j.at("kind").get<std::string>());
  switch (kind) {
    case LayerKind::dense: return LayerSpec::dense(j.at("in"), j.at("out"));
    case LayerKind::conv2d:
      return LayerSpec::conv2d(j.at("in"), j.at("out"), j.at("kernel"), j.at("stride"), j.at("padding"));
    case LayerKind::relu: return LayerSpec::relu();
    case LayerKind::sigmoid: return LayerSpec::sigmoid();
    case LayerKind::flatten: return LayerSpec::flatten();
    case LayerKind::reshape: return LayerSpec::reshape(j.at("target").get<Shape>());
    case LayerKind::maxpool2d: return LayerSpec::maxpool2d(j.at("kernel"));
    case LayerKind::upsample2d: return LayerSpec::upsample2d(j.at("factor"));
  }
  fail(ErrorKind::ConfigError, "bad layer spec");
}

template <typename T>
constexpr const char* dtype_name() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? "float32" : "float64";
}

template <typename T>
struct Checkpoint {
  Network<T> net;
  std::uint64_t seed = 0;
  nlohmann::json metadata = nlohmann::json::object();
};

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint<T>& ckpt) {
  nlohmann::json header;
  header["format"] = "saleval-checkpoint";
  header["dtype"] = dtype_name<T>();
  header["input_shape"] = ckpt.net.input_shape();
  header["seed"] = ckpt.seed;
  header["metadata"] = ckpt.metadata;
  header["layers"] = nlohmann::json::array();
  for (const auto& l : ckpt.net.layers()) header["layers"].push_back(layer_spec_to_json(l.spec));
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 8);
  auto put = [&out](const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  };
  put(&kCheckpointVersion, 4);
  const std::uint64_t len = text.size();
  put(&len, 8);
  put(text.data(), text.size());
  for (const auto& l : ckpt.net.layers()) {
    put(l.weight.data(), l.weight.size() * sizeof(T));
    put(l.bias.data(), l.bias.size() * sizeof(T));
  }
  return out;
}

template <typename T>
Checkpoint<T> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 20 && std::memcmp(bytes.data(), kCheckpointMagic, 8) == 0, ErrorKind::BadMagic,
          "not a checkpoint");
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&len, bytes.data() + 12, 8);
  require(version == kCheckpointVersion, ErrorKind::BadMagic, "unsupported checkpoint version " + std::to_string(version));
  require(bytes.size() >= 20 + len, ErrorKind::TruncatedFile, "checkpoint header truncated");
  const auto header = nlohmann::json::parse(bytes.begin() + 20, bytes.begin() + 20 + static_cast<std::ptrdiff_t>(len));
  require(header.at("dtype") == dtype_name<T>(), ErrorKind::ConfigError,
          "checkpoint dtype " + header.at("dtype").get<std::string>());
  std::vector<LayerSpec> specs;
  for (const auto& j : header.at("layers")) specs.push_back(layer_spec_from_json(j));
  Checkpoint<T> ckpt{Network<T>(header.at("input_shape").get<Shape>(), specs), header.at("seed").get<std::uint64_t>(),
                     header.at("metadata")};
  std::size_t off = 20 + len;
  for (auto& l : ckpt.net.layers()) {
    for (auto* block : {&l.weight, &l.bias}) {
      const std::size_t n = block->size() * sizeof(T);
      require(off + n <= bytes.size(), ErrorKind::TruncatedFile, "checkpoint payload truncated");
      std::memcpy(block->data(), bytes.data() + off, n);
      off += n;
    }
  }
  require(off == bytes.size(), ErrorKind::TruncatedFile, "trailing bytes after checkpoint payload");
  return ckpt;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::IoError, "cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::IoError, "short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ckpt) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint<T>(bytes);
}

}  // namespace saleval
