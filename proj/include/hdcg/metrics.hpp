#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdcg/image.hpp"

namespace hdcg {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// ---- registration -------------------------------------------------------------

struct Shift {
    double dy = 0.0;
    double dx = 0.0;
    /// Correlation peak over the mean absolute correlation surface value.
    double peak_confidence = 0.0;
    bool low_confidence = false;
};

/// Phase correlation. The returned shift s satisfies moving(p) ~ ref(p - s),
/// i.e. moving is ref translated by s; apply_shift(moving, s) aligns it with ref.
Shift register_translation(const Image& ref, const Image& moving, bool subpixel = false);
Shift register_translation(const BScan& ref, const BScan& moving, bool subpixel = false);

/// out(p) = img(p + s): undoes a translation by s. Bilinear for fractional
/// shifts, reflect fill outside the frame.
Image apply_shift(const Image& img, double dy, double dx);
BScan apply_shift(const BScan& img, const Shift& s);

/// Rows/columns of the frame that stay inside the source after apply_shift.
struct Region {
    int y0 = 0;
    int x0 = 0;
    int height = 0;
    int width = 0;
};

Region valid_overlap(int height, int width, double dy, double dx);
Image crop(const Image& img, const Region& r);

// ---- full-reference quality --------------------------------------------------

/// 10 log10(1 / MSE) for data range 1; +infinity when the images are equal.
double psnr(const Image& a, const Image& b);
double psnr(const BScan& a, const BScan& b);

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

/// Mean SSIM over window positions that lie fully inside the image.
double ssim(const Image& a, const Image& b, const SsimOptions& opt = {});
double ssim(const BScan& a, const BScan& b, const SsimOptions& opt = {});

// ---- masks and no-reference metrics ---------------------------------------------

class Mask {
public:
    Mask() = default;
    Mask(int height, int width, bool fill = false)
        : height_(height), width_(width), bits_(static_cast<std::size_t>(height) * width, fill ? 1 : 0) {}

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    bool operator()(int y, int x) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int y, int x, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
    std::size_t count() const noexcept;
    bool any() const noexcept { return count() > 0; }

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<unsigned char> bits_;
};

struct MaskPair {
    Mask retina;
    Mask signal;
    Mask background;
    double level_retina = 0.0;
    double level_signal = 0.0;
    /// Largest closed contour at level_retina, as (y, x) vertices.
    std::vector<std::pair<double, double>> retina_contour;
};

struct MaskOptions {
    std::optional<double> level_retina;  // auto: Otsu threshold of the smoothed image
    std::optional<double> level_signal;  // auto: 75th percentile inside the retina
    double smoothing_sigma = 3.0;
    int background_margin = 3;
};

/// Closed iso-contours of `img` at `level` (marching squares, linear
/// interpolation along cell edges). The image is framed by a one-pixel border
/// below the level so every contour closes.
std::vector<std::vector<std::pair<double, double>>> iso_contours(const Image& img, double level);

/// Pixels whose centres lie inside the polygon (even-odd rule).
Mask fill_polygon(const std::vector<std::pair<double, double>>& poly, int height, int width);

/// Otsu threshold over a 256-bin histogram of the value range.
double otsu_threshold(std::span<const double> values);

/// Throws MaskExtractionError when no usable contour or region exists.
MaskPair extract_masks(const Image& img, const MaskOptions& opt = {});
MaskPair extract_masks(const BScan& img, const MaskOptions& opt = {});

/// mean / population std over the mask; +infinity when std is 0.
double msr(const Image& img, const Mask& signal);
/// (mu_s - mu_b) / sqrt(var_s + var_b) with population variances.
double cnr(const Image& img, const Mask& signal, const Mask& background);

/// Mask illustration: grayscale image, background tinted blue,
/// signal tinted red, retina contour drawn in yellow.
RgbImage mask_overlay(const Image& img, const MaskPair& masks);

// ---- evaluation -------------------------------------------------------------------

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

/// Population statistics over finite values only.
MeanStd mean_std(std::span<const double> values);

struct SampleMetrics {
    std::string source_id;
    double cnr = 0.0;
    double msr = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
    Shift shift;
    bool excluded = false;
    std::string reason;
};

struct MetricRow {
    std::string method;
    MeanStd cnr, msr, psnr, ssim;
    int n = 0;
    int excluded = 0;
    std::vector<SampleMetrics> samples;
};

struct EvalPair {
    BScan hn;
    BScan reference;
};

struct EvalOptions {
    /// Fractional alignment resamples the denoised image bilinearly, which
    /// itself smooths noise; off by default.
    bool subpixel = false;
    MaskOptions masks;
};

using Denoiser = std::function<BScan(const BScan&)>;

/// Denoises every hn image, registers it onto the reference, computes
/// PSNR/SSIM on the valid overlap and CNR/MSR from masks of the denoised
/// image. Mask failures are excluded and counted; throws DataError if all fail.
MetricRow evaluate_method(const std::string& method, const std::vector<EvalPair>& pairs, const Denoiser& denoiser,
                          const EvalOptions& opt = {});

struct MetricReport {
    std::vector<MetricRow> rows;

    void write_csv(const std::filesystem::path& path) const;
    void write_samples_csv(const std::filesystem::path& path) const;
};

struct RuntimeRow {
    std::string method;
    std::string device;
    double mean_s = 0.0;
    double std_s = 0.0;
    int n = 0;
    std::vector<double> times;
};

struct RuntimeReport {
    std::vector<RuntimeRow> rows;

    void write_csv(const std::filesystem::path& path) const;
};

struct TimedMethod {
    std::string name;
    Denoiser run;
};

/// Single-threaded wall-clock timing: one untimed warm-up call per method,
/// then images x repeats timed calls.
RuntimeReport benchmark_runtime(const std::vector<TimedMethod>& methods, const std::vector<BScan>& images, int repeats,
                                const std::string& device = "cpu");

}  // namespace hdcg
