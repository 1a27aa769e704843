#include "hdcg/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hdcg/errors.hpp"

namespace hdcg {

Image::Image(int height, int width, double fill)
    : height_(height), width_(width), pixels_(static_cast<std::size_t>(height) * width, fill) {
    if (height < 0 || width < 0) throw ShapeError("negative image dimensions");
}

Image::Image(int height, int width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
    if (pixels_.size() != static_cast<std::size_t>(height) * width)
        throw ShapeError("pixel count does not match dimensions");
}

int reflect_index(int i, int n) noexcept {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

double Image::reflected(int y, int x) const {
    return (*this)(reflect_index(y, height_), reflect_index(x, width_));
}

double Image::min() const { return *std::min_element(pixels_.begin(), pixels_.end()); }
double Image::max() const { return *std::max_element(pixels_.begin(), pixels_.end()); }
double Image::mean() const {
    return std::accumulate(pixels_.begin(), pixels_.end(), 0.0) / static_cast<double>(pixels_.size());
}

Image clip01(Image img) {
    for (double& p : img.pixels()) p = std::clamp(p, 0.0, 1.0);
    return img;
}

std::string_view to_string(Domain d) noexcept {
    switch (d) {
        case Domain::HighNoise: return "hn";
        case Domain::LowNoise: return "ln";
        case Domain::Generated: return "generated";
        case Domain::Clean: return "clean";
    }
    return "unknown";
}

Domain domain_from_string(std::string_view s) {
    if (s == "hn" || s == "HighNoise") return Domain::HighNoise;
    if (s == "ln" || s == "LowNoise") return Domain::LowNoise;
    if (s == "generated" || s == "Generated") return Domain::Generated;
    if (s == "clean" || s == "Clean") return Domain::Clean;
    throw ConfigError("unknown domain '" + std::string(s) + "'");
}

BScan::BScan(Image pixels, Domain domain, std::string source_id)
    : pixels_(std::move(pixels)), domain_(domain), source_id_(std::move(source_id)) {
    if (pixels_.height() < kMinSide || pixels_.width() < kMinSide)
        throw ShapeError("b-scan must be at least 8x8, got " + std::to_string(pixels_.height()) + "x" +
                         std::to_string(pixels_.width()));
    for (double p : pixels_.pixels()) {
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("b-scan intensity outside [0,1]");
    }
}

// ---- padding -------------------------------------------------------------

std::pair<BScan, Padding> pad_to_multiple(const BScan& img, int multiple, PadMode mode) {
    if (multiple < 1) throw ConfigError("pad multiple must be >= 1");
    auto round_up = [multiple](int n) { return (n + multiple - 1) / multiple * multiple; };
    const int extra_h = round_up(img.height()) - img.height();
    const int extra_w = round_up(img.width()) - img.width();
    Padding pad{extra_h / 2, extra_h - extra_h / 2, extra_w / 2, extra_w - extra_w / 2};
    return {BScan(pad_image(img.pixels(), pad, mode), img.domain(), img.source_id()), pad};
}

Image pad_image(const Image& img, const Padding& pad, PadMode mode) {
    const int h = img.height() + pad.top + pad.bottom;
    const int w = img.width() + pad.left + pad.right;
    Image out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int sy = y - pad.top;
            const int sx = x - pad.left;
            if (mode == PadMode::Reflect) {
                out(y, x) = img.reflected(sy, sx);
            } else {
                const bool inside = sy >= 0 && sy < img.height() && sx >= 0 && sx < img.width();
                out(y, x) = inside ? img(sy, sx) : 0.0;
            }
        }
    }
    return out;
}

Image crop_padding(const Image& img, const Padding& pad) {
    const int h = img.height() - pad.top - pad.bottom;
    const int w = img.width() - pad.left - pad.right;
    if (h <= 0 || w <= 0) throw ShapeError("padding record larger than image");
    Image out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out(y, x) = img(y + pad.top, x + pad.left);
    return out;
}

BScan crop_padding(const BScan& img, const Padding& pad) {
    return BScan(crop_padding(img.pixels(), pad), img.domain(), img.source_id());
}

}  // namespace hdcg
