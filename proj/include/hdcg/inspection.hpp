#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hdcg/image.hpp"
#include "hdcg/metrics.hpp"
#include "hdcg/networks.hpp"

namespace hdcg {

struct Checkpoint;

struct FeatureMapSet {
    std::string layer_name;
    std::vector<Image> maps;  // per channel, scaled to [0, 1]
    std::vector<Image> raw;   // activations as computed
    int native_height = 0;
    int native_width = 0;
    bool upscaled = false;
};

/// Activations of one generator layer for a single image.
FeatureMapSet extract_feature_maps(const Generator& gen, const Image& img, const std::string& layer);
/// Uses the checkpoint's HN -> LN generator.
FeatureMapSet extract_feature_maps(const Checkpoint& ckpt, const BScan& img, const std::string& layer);

/// Min-max scaling to [0, 1]; constant maps become all zero.
Image normalize01(const Image& map);

/// Bilinear resampling with half-pixel centres.
Image resize_bilinear(const Image& map, int height, int width);

/// Maps [0, 1] to a dark-purple -> orange -> yellow ramp.
std::array<double, 3> colormap(double v);

/// Blends the colour-mapped (and, if needed, up-scaled) map over the grayscale
/// image: (1 - alpha) * gray + alpha * colour.
RgbImage overlay(const Image& img, const Image& map, double alpha);

struct GridRow {
    Image input;
    Image map;
    std::string label;
};

/// One row per entry: input | overlay | colour-mapped map. Row labels go to a
/// sidecar text file next to the PNG.
void write_overlay_grid(const std::filesystem::path& png, const std::vector<GridRow>& rows, double alpha = 0.5);

struct LayerSkeleton {
    int width = 0;
    std::vector<std::optional<double>> ilm;  // row per column
    std::vector<std::optional<double>> rpe;
    std::vector<std::optional<double>> thickness;
    Mask skeleton;  // pixels of the two selected curves
};

/// Zhang-Suen thinning followed by removal of staircase corners.
Mask thin(const Mask& m);

/// img * map, thresholded at its mean, 3x3 median filtered and thinned. The
/// two longest curves spanning at least 20% of the width become ILM (upper)
/// and RPE (lower). Throws InsufficientStructureError otherwise.
LayerSkeleton skeletonize_layers(const Image& img, const Image& map);

struct ThicknessProfile {
    std::vector<int> columns;
    std::vector<double> ilm_row;
    std::vector<double> rpe_row;
    std::vector<double> thickness;  // pixels, or micrometres when scaled
    std::string unit = "px";
    std::optional<double> mean;
    std::optional<double> min;
    std::optional<double> max;
};

ThicknessProfile thickness_profile(const LayerSkeleton& skel, std::optional<double> scale_um_per_px = std::nullopt);

/// Columns: column_index, ilm_row, rpe_row, thickness_px.
void write_thickness_csv(const std::filesystem::path& path, const LayerSkeleton& skel);

struct ChannelScore {
    int channel = 0;
    /// Mean absolute row distance to the known boundaries; infinite when the
    /// channel yields no skeleton.
    double boundary_error = 0.0;
};

/// Ranks channels by how well their skeleton follows known upper and lower
/// boundaries (best first).
std::vector<ChannelScore> rank_tracker_channels(const FeatureMapSet& maps, const Image& img,
                                                const std::vector<double>& upper, const std::vector<double>& lower);

}  // namespace hdcg
