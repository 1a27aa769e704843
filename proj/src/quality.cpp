#include <cmath>

#include "hdcg/errors.hpp"
#include "hdcg/filters.hpp"
#include "hdcg/metrics.hpp"

namespace hdcg {

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b) || a.empty()) throw ShapeError("psnr needs non-empty images of equal shape");
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.pixels()[i] - b.pixels()[i];
        se += d * d;
    }
    if (se == 0.0) return kInfinity;
    return 10.0 * std::log10(static_cast<double>(a.size()) / se);
}

double psnr(const BScan& a, const BScan& b) { return psnr(a.pixels(), b.pixels()); }

namespace {

// Gaussian-weighted local mean over every fully contained window.
Image valid_filter(const Image& img, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int oh = img.height() - n + 1, ow = img.width() - n + 1;
    Image rows(img.height(), ow);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[i] * img(y, x + i);
            rows(y, x) = s;
        }
    Image out(oh, ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[i] * rows(y + i, x);
            out(y, x) = s;
        }
    return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimOptions& opt) {
    if (!a.same_shape(b)) throw ShapeError("ssim needs images of equal shape");
    if (opt.window < 1 || opt.window % 2 == 0) throw ConfigError("ssim window must be odd");
    if (a.height() < opt.window || a.width() < opt.window) throw ShapeError("image smaller than the ssim window");
    const auto k = gaussian_kernel(opt.sigma, opt.window / 2);
    Image aa(a.height(), a.width()), bb(a.height(), a.width()), ab(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a.pixels()[i], y = b.pixels()[i];
        aa.pixels()[i] = x * x;
        bb.pixels()[i] = y * y;
        ab.pixels()[i] = x * y;
    }
    const Image mu_a = valid_filter(a, k), mu_b = valid_filter(b, k);
    const Image e_aa = valid_filter(aa, k), e_bb = valid_filter(bb, k), e_ab = valid_filter(ab, k);
    const double c1 = std::pow(opt.k1 * opt.data_range, 2), c2 = std::pow(opt.k2 * opt.data_range, 2);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a.pixels()[i], mb = mu_b.pixels()[i];
        const double va = e_aa.pixels()[i] - ma * ma;
        const double vb = e_bb.pixels()[i] - mb * mb;
        const double cov = e_ab.pixels()[i] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return sum / static_cast<double>(mu_a.size());
}

double ssim(const BScan& a, const BScan& b, const SsimOptions& opt) { return ssim(a.pixels(), b.pixels(), opt); }

std::size_t Mask::count() const noexcept {
    std::size_t n = 0;
    for (auto v : bits_) n += v;
    return n;
}

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
    std::size_t n = 0;
};

Moments masked_moments(const Image& img, const Mask& m, const char* what) {
    if (m.height() != img.height() || m.width() != img.width())
        throw ShapeError(std::string(what) + " mask does not match the image");
    Moments r;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            if (m(y, x)) {
                r.mean += img(y, x);
                ++r.n;
            }
    if (r.n == 0) throw DataError(std::string(what) + " mask is empty");
    r.mean /= static_cast<double>(r.n);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            if (m(y, x)) r.var += (img(y, x) - r.mean) * (img(y, x) - r.mean);
    r.var /= static_cast<double>(r.n);
    return r;
}

}  // namespace

double msr(const Image& img, const Mask& signal) {
    const auto s = masked_moments(img, signal, "signal");
    if (s.var == 0.0) return kInfinity;
    return s.mean / std::sqrt(s.var);
}

double cnr(const Image& img, const Mask& signal, const Mask& background) {
    const auto s = masked_moments(img, signal, "signal");
    const auto b = masked_moments(img, background, "background");
    const double noise = std::sqrt(s.var + b.var);
    const double contrast = s.mean - b.mean;
    if (noise == 0.0) return contrast == 0.0 ? 0.0 : std::copysign(kInfinity, contrast);
    return contrast / noise;
}

MeanStd mean_std(std::span<const double> values) {
    MeanStd r;
    std::size_t n = 0;
    for (double v : values)
        if (std::isfinite(v)) {
            r.mean += v;
            ++n;
        }
    if (n == 0) return {kInfinity, 0.0};
    r.mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values)
        if (std::isfinite(v)) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(n));
    return r;
}

}  // namespace hdcg
