#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "prosospeak/mat.hpp"
#include "prosospeak/metrics.hpp"

namespace prosospeak {

/// Minimal native SVG emitters for the report figures.
void svg_roc_plot(const std::filesystem::path& path, const RocCurve& curve,
                  const std::string& title);
void svg_heatmap(const std::filesystem::path& path, const MatD& values,
                 const std::string& title);
void svg_bar_plot(const std::filesystem::path& path,
                  const std::vector<AttributionRow>& rows, const std::string& title);

}  // namespace prosospeak
