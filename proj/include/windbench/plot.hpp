#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "windbench/diagnostics.hpp"

namespace windbench::plot {

/// Standalone SVG document for one series (scatter or polyline plus its
/// reference line). Output depends only on the series.
std::string render_svg(const diagnostics::PlotSeries& s, int width = 640, int height = 480);

void write_svg(const std::filesystem::path& path, const diagnostics::PlotSeries& s);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Raw points as "x,y" CSV with a header naming both axes.
void write_series_csv(const std::filesystem::path& path, const diagnostics::PlotSeries& s);

}  // namespace windbench::plot
