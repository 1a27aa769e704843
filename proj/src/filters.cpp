#include "hdcg/filters.hpp"

#include <cmath>

#include "hdcg/errors.hpp"

namespace hdcg {

int gaussian_radius(double sigma) { return static_cast<int>(std::ceil(3.0 * sigma)); }

std::vector<double> gaussian_kernel(double sigma, int radius) {
    if (!(sigma > 0.0)) throw ConfigError("gaussian sigma must be > 0");
    if (radius < 0) throw ConfigError("gaussian radius must be >= 0");
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

Image separable_filter(const Image& img, const std::vector<double>& kernel, PadMode mode) {
    const int r = static_cast<int>(kernel.size() / 2);
    const int h = img.height();
    const int w = img.width();
    auto sample = [&](const Image& src, int y, int x) {
        if (mode == PadMode::Reflect) return src.reflected(y, x);
        return (y < 0 || y >= h || x < 0 || x >= w) ? 0.0 : src(y, x);
    };
    Image rows(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -r; k <= r; ++k) s += kernel[k + r] * sample(img, y, x + k);
            rows(y, x) = s;
        }
    Image out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -r; k <= r; ++k) s += kernel[k + r] * sample(rows, y + k, x);
            out(y, x) = s;
        }
    return out;
}

Image gaussian_blur(const Image& img, double sigma, PadMode mode) {
    return separable_filter(img, gaussian_kernel(sigma, gaussian_radius(sigma)), mode);
}

Image reflect_pad(const Image& img, int r) { return pad_image(img, {r, r, r, r}, PadMode::Reflect); }

}  // namespace hdcg
