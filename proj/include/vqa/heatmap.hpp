#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vqa/data.hpp"
#include "vqa/model.hpp"

namespace vqa {

// Attention weights of one example: one row per head plus the combined row.
struct Heatmap {
  std::vector<std::vector<double>> heads;
  std::vector<double> combined;
};

Heatmap compute_heatmap(const ModelConfig& model, const ParamStore& params, const VqaExample& example,
                        const FeatureStore& features);

// One line per head, then the combined line; K values each at full precision.
std::string heatmap_text(const Heatmap& heatmap);
Heatmap parse_heatmap_text(std::string_view text);

// Side length when K is a perfect square.
std::optional<std::size_t> grid_side(std::size_t regions);

// Binary graymap of a side x side grid, row-major, min-max scaled to 0..255.
// A constant row maps to 255 everywhere.
std::string heatmap_pgm(std::span<const double> weights, std::size_t side);

// Writes `text_path` and, for square K, <stem>_head<h>.pgm next to it.
// Returns every file written.
std::vector<std::filesystem::path> export_heatmap(const Heatmap& heatmap, const std::filesystem::path& text_path);

}  // namespace vqa
