#pragma once

// Saliency maps for one method over one split, persisted as a raw float32
// payload plus a JSON sidecar that describes it.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saleval/checkpoint.hpp"
#include "saleval/error.hpp"
#include "saleval/idx.hpp"

namespace saleval {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view text) {
  return fnv1a(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[std::size_t(i)] = digits[v & 0xf];
  return s;
}

struct ExplanationSet {
  std::string method;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;
  Split split = Split::train;
  std::vector<std::uint32_t> ids;      // source image ids
  std::vector<std::uint8_t> labels;    // ground-truth classes
  std::vector<std::uint8_t> targets;   // explained class (classifier argmax)
  std::vector<ImageGrid> maps;

  std::size_t size() const { return maps.size(); }
};

inline constexpr char kExplanationMagic[8] = {'S', 'A', 'L', 'E', 'X', 'P', 'L', '\0'};
inline constexpr std::uint32_t kExplanationVersion = 1;

inline std::filesystem::path sidecar_path(const std::filesystem::path& payload) {
  auto p = payload;
  return p.replace_extension(".json");
}

inline void save_explanations(const std::filesystem::path& payload, const ExplanationSet& set) {
  const std::size_t n = set.maps.size();
  require(set.ids.size() == n && set.labels.size() == n && set.targets.size() == n, ErrorKind::ShapeMismatch,
          "explanation set fields have different lengths");
  std::vector<std::uint8_t> bytes(kExplanationMagic, kExplanationMagic + 8);
  auto put = [&bytes](const void* p, std::size_t len) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + len);
  };
  put(&kExplanationVersion, 4);
  const std::uint64_t count = n;
  put(&count, 8);
  for (const auto& m : set.maps) put(m.pixels.data(), kPixels * sizeof(float));

  nlohmann::json side;
  side["format"] = "saleval-explanations";
  side["version"] = kExplanationVersion;
  side["payload"] = payload.filename().string();
  side["payload_fnv1a"] = hex64(fnv1a(bytes));
  side["method"] = set.method;
  side["params"] = set.params;
  side["seed"] = set.seed;
  side["split"] = to_string(set.split);
  side["count"] = n;
  side["shape"] = {kRows, kCols};
  side["ids"] = set.ids;
  side["labels"] = set.labels;
  side["targets"] = set.targets;
  write_file_bytes(payload, bytes);
  const std::string text = side.dump(1);
  write_file_bytes(sidecar_path(payload),
                   std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline ExplanationSet load_explanations(const std::filesystem::path& payload) {
  const auto bytes = read_file_bytes(payload);
  require(bytes.size() >= 20 && std::memcmp(bytes.data(), kExplanationMagic, 8) == 0, ErrorKind::BadMagic,
          payload.string() + " is not an explanation payload");
  std::uint32_t version = 0;
  std::uint64_t count = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&count, bytes.data() + 12, 8);
  require(version == kExplanationVersion, ErrorKind::BadMagic, "unsupported explanation version");
  require(bytes.size() == 20 + count * kPixels * sizeof(float), ErrorKind::TruncatedFile,
          payload.string() + " payload length does not match its count");

  const auto side_bytes = read_file_bytes(sidecar_path(payload));
  const auto side = nlohmann::json::parse(side_bytes.begin(), side_bytes.end());
  require(side.at("count").get<std::uint64_t>() == count, ErrorKind::ConfigError, "sidecar count mismatch");
  require(side.at("payload_fnv1a").get<std::string>() == hex64(fnv1a(bytes)), ErrorKind::ConfigError,
          payload.string() + " does not match its sidecar checksum");

  ExplanationSet set;
  set.method = side.at("method").get<std::string>();
  set.params = side.at("params");
  set.seed = side.at("seed").get<std::uint64_t>();
  set.split = side.at("split").get<std::string>() == "test" ? Split::test : Split::train;
  set.ids = side.at("ids").get<std::vector<std::uint32_t>>();
  set.labels = side.at("labels").get<std::vector<std::uint8_t>>();
  set.targets = side.at("targets").get<std::vector<std::uint8_t>>();
  require(set.ids.size() == count && set.labels.size() == count && set.targets.size() == count,
          ErrorKind::ConfigError, "sidecar arrays do not match the payload count");
  set.maps.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    std::memcpy(set.maps[i].pixels.data(), bytes.data() + 20 + i * kPixels * sizeof(float), kPixels * sizeof(float));
  return set;
}

}  // namespace saleval
