#pragma once

// MNIST-format IDX ingestion, train/test splits and per-class sampling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "saleval/error.hpp"
#include "saleval/rng.hpp"

namespace saleval {

inline constexpr std::size_t kRows = 28;
inline constexpr std::size_t kCols = 28;
inline constexpr std::size_t kPixels = kRows * kCols;
inline constexpr int kNumClasses = 10;

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// A 28x28 raster. Used both for input digits and for saliency maps.
struct ImageGrid {
  std::array<float, kPixels> pixels{};

  float& at(std::size_t r, std::size_t c) { return pixels[r * kCols + c]; }
  float at(std::size_t r, std::size_t c) const { return pixels[r * kCols + c]; }
  float& operator[](std::size_t i) { return pixels[i]; }
  float operator[](std::size_t i) const { return pixels[i]; }

  std::span<const float> view() const { return pixels; }
  auto begin() const { return pixels.begin(); }
  auto end() const { return pixels.end(); }
  static constexpr std::size_t size() { return kPixels; }

  bool all_finite() const {
    return std::all_of(pixels.begin(), pixels.end(), [](float v) { return std::isfinite(v); });
  }

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct LabeledDataset {
  std::vector<ImageGrid> images;
  std::vector<std::uint8_t> labels;
  /// Position of each sample in the source IDX file; stable identity across subsetting.
  std::vector<std::uint32_t> ids;
  Split split = Split::train;

  std::size_t size() const { return images.size(); }
};

namespace detail {

inline std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

inline void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace detail

inline std::vector<ImageGrid> parse_idx_images(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 16, ErrorKind::TruncatedFile, "IDX image header needs 16 bytes");
  const auto magic = detail::read_be32(bytes, 0);
  require(magic == kIdxImageMagic, ErrorKind::BadMagic, "expected 0x00000803 for an image file");
  const std::size_t count = detail::read_be32(bytes, 4);
  const std::size_t rows = detail::read_be32(bytes, 8);
  const std::size_t cols = detail::read_be32(bytes, 12);
  require(rows == kRows && cols == kCols, ErrorKind::ShapeMismatch,
          "images must be 28x28, got " + std::to_string(rows) + "x" + std::to_string(cols));
  require(bytes.size() - 16 == count * kPixels, ErrorKind::TruncatedFile,
          "declared " + std::to_string(count) + " images but payload has " + std::to_string(bytes.size() - 16) +
              " bytes");
  std::vector<ImageGrid> images(count);
  const std::uint8_t* p = bytes.data() + 16;
  for (auto& img : images)
    for (auto& px : img.pixels) px = static_cast<float>(*p++) / 255.0f;
  return images;
}

inline std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 8, ErrorKind::TruncatedFile, "IDX label header needs 8 bytes");
  require(detail::read_be32(bytes, 0) == kIdxLabelMagic, ErrorKind::BadMagic,
          "expected 0x00000801 for a label file");
  const std::size_t count = detail::read_be32(bytes, 4);
  require(bytes.size() - 8 == count, ErrorKind::TruncatedFile,
          "declared " + std::to_string(count) + " labels but payload has " + std::to_string(bytes.size() - 8) +
              " bytes");
  std::vector<std::uint8_t> labels(bytes.begin() + 8, bytes.end());
  for (std::size_t i = 0; i < labels.size(); ++i)
    require(labels[i] < kNumClasses, ErrorKind::LabelOutOfRange,
            "label " + std::to_string(labels[i]) + " at index " + std::to_string(i));
  return labels;
}

/// Inverse of parse_idx_images for grids holding k/255 values.
inline std::vector<std::uint8_t> serialize_idx_images(std::span<const ImageGrid> images) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.size() * kPixels);
  detail::write_be32(out, kIdxImageMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(images.size()));
  detail::write_be32(out, kRows);
  detail::write_be32(out, kCols);
  for (const auto& img : images)
    for (float v : img.pixels)
      out.push_back(static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0f), 0L, 255L)));
  return out;
}

inline std::vector<std::uint8_t> serialize_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  detail::write_be32(out, kIdxLabelMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline LabeledDataset load_idx_pair(const std::filesystem::path& images_path,
                                    const std::filesystem::path& labels_path, Split split) {
  LabeledDataset ds;
  ds.images = parse_idx_images(read_file_bytes(images_path));
  ds.labels = parse_idx_labels(read_file_bytes(labels_path));
  require(ds.images.size() == ds.labels.size(), ErrorKind::TruncatedFile,
          "image/label count mismatch: " + std::to_string(ds.images.size()) + " vs " +
              std::to_string(ds.labels.size()));
  ds.ids.resize(ds.images.size());
  for (std::size_t i = 0; i < ds.ids.size(); ++i) ds.ids[i] = static_cast<std::uint32_t>(i);
  ds.split = split;
  return ds;
}

/// Locates the canonical MNIST files in `dir`, accepting both `t10k-images-idx3-ubyte`
/// and `t10k-images.idx3-ubyte` spellings.
inline std::filesystem::path find_mnist_file(const std::filesystem::path& dir, const std::string& stem,
                                             const std::string& what, const std::string& idx) {
  for (const auto& name : {stem + "-" + what + "-" + idx + "-ubyte", stem + "-" + what + "." + idx + "-ubyte"}) {
    if (std::filesystem::exists(dir / name)) return dir / name;
  }
  fail(ErrorKind::IoError, "no " + stem + " " + what + " file under " + dir.string());
}

inline LabeledDataset load_mnist(const std::filesystem::path& dir, Split split) {
  const std::string stem = split == Split::train ? "train" : "t10k";
  return load_idx_pair(find_mnist_file(dir, stem, "images", "idx3"), find_mnist_file(dir, stem, "labels", "idx1"),
                       split);
}

/// Seeded subset of `n` samples, kept in source order. n >= size returns the dataset unchanged.
inline LabeledDataset subsample(const LabeledDataset& ds, std::size_t n, std::uint64_t seed) {
  if (n == 0 || n >= ds.size()) return ds;
  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto eng = make_engine({seed, 0x5b5e7ULL, static_cast<std::uint64_t>(ds.split)});
  std::shuffle(order.begin(), order.end(), eng);
  order.resize(n);
  std::sort(order.begin(), order.end());
  LabeledDataset out;
  out.split = ds.split;
  for (auto i : order) {
    out.images.push_back(ds.images[i]);
    out.labels.push_back(ds.labels[i]);
    out.ids.push_back(ds.ids[i]);
  }
  return out;
}

using ClassSamples = std::map<int, std::vector<std::size_t>>;

/// Draws exactly `s` distinct positions per class. Members of a class are
/// canonically ordered by `keys` before the seeded draw, and the result is
/// returned in key order, so the outcome does not depend on input ordering.
inline ClassSamples select_per_class(std::span<const std::uint8_t> labels, std::span<const std::uint32_t> keys,
                                     std::size_t s, std::uint64_t seed) {
  require(labels.size() == keys.size(), ErrorKind::ShapeMismatch, "labels/keys length mismatch");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  ClassSamples out;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& m = members[c];
    require(m.size() >= s, ErrorKind::InsufficientClassMembers,
            "class " + std::to_string(c) + " has " + std::to_string(m.size()) + " members, need " + std::to_string(s));
    std::sort(m.begin(), m.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    auto eng = make_engine({seed, 0xc1a55ULL, static_cast<std::uint64_t>(c)});
    std::shuffle(m.begin(), m.end(), eng);
    m.resize(s);
    std::sort(m.begin(), m.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    out[c] = std::move(m);
  }
  return out;
}

inline ClassSamples sample_per_class(const LabeledDataset& ds, std::size_t s, std::uint64_t seed) {
  return select_per_class(ds.labels, ds.ids, s, seed);
}

}  // namespace saleval
