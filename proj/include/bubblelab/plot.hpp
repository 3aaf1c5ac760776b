#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "bubblelab/analytics.hpp"

namespace bubblelab {

struct PlotOptions {
    std::string title = "Mean price across simulations";
    double fundamental = 14.0;
    int width = 800;
    int height = 480;
};

// Price panel (mean, 95% band, fundamental line) over a volume panel.
std::string render_price_svg(std::span<const PricePathPoint> path, const PlotOptions& options = {});

// Columns: round, mean_price, ci_lo, ci_hi, mean_volume.
void write_price_path_csv(const std::filesystem::path& path, std::span<const PricePathPoint> points);
void write_price_svg(const std::filesystem::path& path, std::span<const PricePathPoint> points,
                     const PlotOptions& options = {});

}  // namespace bubblelab
