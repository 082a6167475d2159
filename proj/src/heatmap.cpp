#include "vqa/heatmap.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "vqa/binary_io.hpp"
#include "vqa/errors.hpp"

namespace vqa {

Heatmap compute_heatmap(const ModelConfig& model, const ParamStore& params, const VqaExample& example,
                        const FeatureStore& features) {
  const std::vector<VqaExample> one{example};
  const std::size_t which = 0;
  const ModelInput input = make_input(one, std::span(&which, 1), features, model.num_answers);
  const ForwardResult out = forward(model, params, input, Mode::kEval);
  Heatmap map;
  for (const Tensor& w : out.head_weights) map.heads.push_back(w.values());
  map.combined = out.combined.values();
  return map;
}

std::string heatmap_text(const Heatmap& heatmap) {
  std::string out;
  char buf[64];
  auto row = [&](const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", values[i]);
      if (i) out += ' ';
      out += buf;
    }
    out += '\n';
  };
  for (const auto& h : heatmap.heads) row(h);
  row(heatmap.combined);
  return out;
}

Heatmap parse_heatmap_text(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::vector<double> row;
    const char* p = text.data() + pos;
    const char* last = text.data() + end;
    while (p < last) {
      while (p < last && *p == ' ') ++p;
      if (p == last) break;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, last, v);
      if (ec != std::errc()) throw FormatError(FormatFault::kBadNumber, "heatmap: bad number");
      row.push_back(v);
      p = next;
    }
    if (!row.empty()) rows.push_back(std::move(row));
    pos = end + 1;
  }
  if (rows.size() < 2) throw FormatError(FormatFault::kMalformedRecord, "heatmap needs at least one head row and the combined row");
  Heatmap map;
  map.combined = rows.back();
  rows.pop_back();
  map.heads = std::move(rows);
  return map;
}

std::optional<std::size_t> grid_side(std::size_t regions) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(regions))));
  if (side * side == regions) return side;
  return std::nullopt;
}

std::string heatmap_pgm(std::span<const double> weights, std::size_t side) {
  if (weights.size() != side * side) throw ShapeError("graymap needs side^2 weights");
  const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
  std::string out = "P5\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  for (double w : weights) {
    const double level = *hi > *lo ? 255.0 * (w - *lo) / (*hi - *lo) : 255.0;
    out += static_cast<char>(static_cast<unsigned char>(std::lround(level)));
  }
  return out;
}

std::vector<std::filesystem::path> export_heatmap(const Heatmap& heatmap, const std::filesystem::path& text_path) {
  std::vector<std::filesystem::path> written;
  if (text_path.has_parent_path()) std::filesystem::create_directories(text_path.parent_path());
  io::write_file(text_path, heatmap_text(heatmap));
  written.push_back(text_path);
  if (const auto side = grid_side(heatmap.combined.size())) {
    for (std::size_t h = 0; h < heatmap.heads.size(); ++h) {
      std::filesystem::path pgm = text_path;
      pgm.replace_filename(text_path.stem().string() + "_head" + std::to_string(h + 1) + ".pgm");
      io::write_file(pgm, heatmap_pgm(heatmap.heads[h], *side));
      written.push_back(pgm);
    }
  }
  return written;
}

}  // namespace vqa
