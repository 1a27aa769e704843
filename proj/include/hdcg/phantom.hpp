#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hdcg/image.hpp"

namespace hdcg {

/// Geometry and reflectivity of a synthetic retinal b-scan.
struct PhantomConfig {
    int height = 64;
    int width = 64;
    int n_layers = 4;
    /// Peak deviation of the layer boundaries from a straight line, in pixels.
    double curvature = 4.0;
    /// One intensity per layer, top to bottom. Empty means the built-in ramp.
    std::vector<double> reflectivities{};
    /// Intensity of vitreous and choroid regions.
    double background = 0.05;
    /// Fraction of the image height covered by the retina.
    double thickness_fraction = 0.45;
    int frames_hn = 12;
    int frames_ln = 60;
    std::uint64_t seed = 0;

    /// Throws ConfigError on an invalid combination.
    void validate() const;
    std::vector<double> layer_reflectivities() const;
};

void to_json(nlohmann::json& j, const PhantomConfig& c);
void from_json(const nlohmann::json& j, PhantomConfig& c);
PhantomConfig load_phantom_config(const std::filesystem::path& path);

struct PhantomSample {
    BScan clean;
    BScan hn;
    BScan ln;
    std::uint64_t seed = 0;
    int frames_hn = 12;
    int frames_ln = 60;
    /// Row position (fractional) of the inner and outer retina boundary per column.
    std::vector<double> top_boundary;
    std::vector<double> bottom_boundary;
};

/// Clean layered image plus its boundaries; deterministic in `seed`.
struct CleanPhantom {
    Image image;
    std::vector<double> top_boundary;
    std::vector<double> bottom_boundary;
};

CleanPhantom render_clean_phantom(const PhantomConfig& cfg, std::uint64_t seed);

/// Mean of `frames` independent speckle realizations clean * s_k, s_k ~ Exp(1).
/// Not clipped.
Image speckle_average(const Image& clean, int frames, std::mt19937_64& rng);

PhantomSample generate_phantom(const PhantomConfig& cfg, int frames_hn, int frames_ln, std::uint64_t seed);

}  // namespace hdcg
