#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hdcg/image.hpp"

namespace hdcg {

struct MedianParams {
    int window = 3;
};

enum class ThresholdRule { Bayes, Universal };

struct WaveletParams {
    ThresholdRule rule = ThresholdRule::Bayes;
    int levels = 3;
    /// Daubechies wavelet with this many vanishing moments (1..4).
    int vanishing_moments = 4;
    /// Noise level; estimated from the data when absent.
    std::optional<double> sigma;
    /// Replaces the rule's threshold for every detail subband when set.
    std::optional<double> threshold;
};

struct BilateralParams {
    double sigma_spatial = 2.0;
    double sigma_range = 0.1;
};

struct NlmeansParams {
    int patch = 5;
    int search = 13;
    double h = 0.1;
};

struct Bm3dParams {
    /// Noise level; estimated from the data when absent.
    std::optional<double> sigma;
    int block = 8;
    int search = 39;
    int max_group = 16;
    int step = 3;
    double lambda_3d = 2.7;
    /// Block-matching distance thresholds, mean squared difference per pixel.
    double match_threshold_hard = 2500.0 / (255.0 * 255.0);
    double match_threshold_wiener = 400.0 / (255.0 * 255.0);
};

/// Parameters for every baseline; each method reads its own block.
struct BaselineParams {
    MedianParams median;
    WaveletParams wavelet;
    BilateralParams bilateral;
    NlmeansParams nlmeans;
    Bm3dParams bm3d;

    void validate() const;
};

void to_json(nlohmann::json& j, const BaselineParams& p);
void from_json(const nlohmann::json& j, BaselineParams& p);
BaselineParams load_baseline_params(const std::filesystem::path& path);

/// median, wavelet, bilateral, nlmeans, bm3d.
const std::vector<std::string>& baseline_names();

/// Robust noise estimate: MAD of the finest diagonal wavelet subband / 0.6745.
double estimate_noise_sigma(const Image& img);

Image median_denoise(const Image& img, int window);
Image wavelet_denoise(const Image& img, const WaveletParams& params = {});
Image bilateral_denoise(const Image& img, double sigma_spatial, double sigma_range);
Image nlmeans_denoise(const Image& img, int patch, int search, double h);
Image bm3d_denoise(const Image& img, const Bm3dParams& params = {});

BScan median_denoise(const BScan& img, int window);
BScan wavelet_denoise(const BScan& img, const WaveletParams& params = {});
BScan bilateral_denoise(const BScan& img, double sigma_spatial, double sigma_range);
BScan nlmeans_denoise(const BScan& img, int patch, int search, double h);
BScan bm3d_denoise(const BScan& img, const Bm3dParams& params = {});

/// Orthogonal periodic 2D DWT (Mallat layout: approximation in the top-left
/// corner, halving per level). Sides must be divisible by 2^levels.
Image dwt2(const Image& img, int levels, int vanishing_moments);
Image idwt2(const Image& coeffs, int levels, int vanishing_moments);

struct BaselineRun {
    BScan output;
    double seconds = 0.0;
};

/// Dispatches by name and times the denoise call with a monotonic clock.
BaselineRun run_baseline(const std::string& name, const BScan& img, const BaselineParams& params = {});

/// Times `repeats` calls; every run's duration is returned.
std::vector<double> time_baseline(const std::string& name, const BScan& img, const BaselineParams& params,
                                  int repeats);

}  // namespace hdcg
