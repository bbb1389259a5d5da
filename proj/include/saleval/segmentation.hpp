#pragma once

// Deterministic superpixels for small grayscale rasters: the largest regular
// grid that fits the target count, then repeated splits of the most varied
// cell until the target is reached.

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "saleval/error.hpp"

namespace saleval {

struct Segmentation {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> ids;  // row-major, one per pixel, contiguous 0..count-1
  int count = 0;

  friend bool operator==(const Segmentation&, const Segmentation&) = default;
};

template <typename T>
Segmentation segment_grid(std::span<const T> image, std::size_t rows, std::size_t cols, int target) {
  require(image.size() == rows * cols && rows > 0 && cols > 0, ErrorKind::ShapeMismatch,
          "image has " + std::to_string(image.size()) + " pixels, expected " + std::to_string(rows * cols));
  require(target >= 1, ErrorKind::InvalidArgument, "target segment count must be positive");
  const std::size_t goal = std::min<std::size_t>(std::size_t(target), rows * cols);

  std::size_t g = 1;
  for (std::size_t c = 1; c <= std::min(rows, cols); ++c)
    if (rows % c == 0 && cols % c == 0 && c * c <= goal) g = c;

  struct Cell {
    std::size_t r0, c0, h, w;
  };
  std::vector<Cell> cells;
  for (std::size_t cy = 0; cy < g; ++cy)
    for (std::size_t cx = 0; cx < g; ++cx) cells.push_back({cy * rows / g, cx * cols / g, rows / g, cols / g});

  auto variance = [&](const Cell& c) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t y = c.r0; y < c.r0 + c.h; ++y)
      for (std::size_t x = c.c0; x < c.c0 + c.w; ++x) {
        const double v = double(image[y * cols + x]);
        sum += v;
        sq += v * v;
      }
    const double n = double(c.h * c.w);
    return std::max(0.0, sq / n - (sum / n) * (sum / n));
  };

  while (cells.size() < goal) {
    std::size_t best = cells.size();
    double best_var = -1.0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      if (c.h * c.w < 2) continue;
      const double v = variance(c);
      const bool better = best == cells.size() || v > best_var ||
                          (v == best_var && c.h * c.w > cells[best].h * cells[best].w);
      if (better) {
        best = i;
        best_var = v;
      }
    }
    if (best == cells.size()) break;
    Cell& c = cells[best];
    if (c.h > c.w) {
      const std::size_t top = c.h / 2;
      cells.push_back({c.r0 + top, c.c0, c.h - top, c.w});
      cells[best].h = top;
    } else {
      const std::size_t left = c.w / 2;
      cells.push_back({c.r0, c.c0 + left, c.h, c.w - left});
      cells[best].w = left;
    }
  }

  Segmentation seg;
  seg.rows = rows;
  seg.cols = cols;
  seg.count = int(cells.size());
  seg.ids.assign(rows * cols, -1);
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t y = cells[i].r0; y < cells[i].r0 + cells[i].h; ++y)
      for (std::size_t x = cells[i].c0; x < cells[i].c0 + cells[i].w; ++x) seg.ids[y * cols + x] = int(i);
  return seg;
}

}  // namespace saleval
