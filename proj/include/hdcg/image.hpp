#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hdcg {

/// Dense row-major 2D array of doubles.
class Image {
public:
    Image() = default;
    Image(int height, int width, double fill = 0.0);
    Image(int height, int width, std::vector<double> pixels);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }

    double& operator()(int y, int x) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    double operator()(int y, int x) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

    /// Reflect-indexed access (mirror without repeating the edge sample).
    double reflected(int y, int x) const;

    std::span<double> pixels() noexcept { return pixels_; }
    std::span<const double> pixels() const noexcept { return pixels_; }
    std::vector<double>& storage() noexcept { return pixels_; }

    double min() const;
    double max() const;
    double mean() const;

    bool same_shape(const Image& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> pixels_;
};

/// Mirror index into [0, n) without edge repetition (… 2 1 | 0 1 2 … n-1 | n-2 …).
int reflect_index(int i, int n) noexcept;

Image clip01(Image img);

enum class Domain { HighNoise, LowNoise, Generated, Clean };

std::string_view to_string(Domain d) noexcept;
Domain domain_from_string(std::string_view s);

/// A 2D grayscale scan with intensities in [0, 1], at least 8x8, tagged with its
/// noise domain and provenance.
class BScan {
public:
    static constexpr int kMinSide = 8;

    BScan() = default;
    /// Throws DataError if the intensity or size invariant is violated.
    BScan(Image pixels, Domain domain, std::string source_id = {});

    const Image& pixels() const noexcept { return pixels_; }
    int height() const noexcept { return pixels_.height(); }
    int width() const noexcept { return pixels_.width(); }
    Domain domain() const noexcept { return domain_; }
    const std::string& source_id() const noexcept { return source_id_; }

    BScan with_domain(Domain d) const { return BScan(pixels_, d, source_id_); }

private:
    Image pixels_;
    Domain domain_ = Domain::Clean;
    std::string source_id_;
};

// ---- I/O -----------------------------------------------------------------

/// Loads an 8- or 16-bit single-channel PNG or TIFF and divides by the
/// bit-depth maximum.
BScan load_bscan(const std::filesystem::path& path, Domain domain);

/// Writes an image as PNG, quantizing [0,1] to the given bit depth (8 or 16).
void save_png(const std::filesystem::path& path, const Image& img, int bit_depth = 8);

/// Raw integer samples of a grayscale file, before normalization.
struct RawGray {
    int height = 0;
    int width = 0;
    int bit_depth = 8;
    std::vector<std::uint16_t> samples;
};

RawGray read_gray_file(const std::filesystem::path& path);

/// 8-bit RGB PNG writer for overlays and mask illustrations.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> rgb;  // interleaved, row-major
};

void save_png_rgb(const std::filesystem::path& path, const RgbImage& img);

// ---- padding -------------------------------------------------------------

enum class PadMode { Reflect, Zero };

struct Padding {
    int top = 0;
    int bottom = 0;
    int left = 0;
    int right = 0;

    friend bool operator==(const Padding&, const Padding&) = default;
};

/// Pads to the smallest dimensions divisible by `multiple`, split as evenly
/// as possible with the extra pixel going to bottom/right.
std::pair<BScan, Padding> pad_to_multiple(const BScan& img, int multiple, PadMode mode = PadMode::Reflect);
Image pad_image(const Image& img, const Padding& pad, PadMode mode);
Image crop_padding(const Image& img, const Padding& pad);
BScan crop_padding(const BScan& img, const Padding& pad);

}  // namespace hdcg
