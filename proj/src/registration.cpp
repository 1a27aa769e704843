#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>

#include <fftw3.h>

#include "hdcg/errors.hpp"
#include "hdcg/metrics.hpp"

namespace hdcg {

namespace {

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class Fft2 {
public:
    Fft2(int h, int w, int sign) : n_(static_cast<std::size_t>(h) * w) {
        data_ = fftw_alloc_complex(n_);
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_2d(h, w, data_, data_, sign, FFTW_ESTIMATE);
    }
    ~Fft2() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(data_);
    }
    Fft2(const Fft2&) = delete;
    Fft2& operator=(const Fft2&) = delete;

    std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(data_); }
    void run() { fftw_execute(plan_); }

private:
    std::size_t n_;
    fftw_complex* data_ = nullptr;
    fftw_plan plan_ = nullptr;
};

bool is_flat(const Image& img) { return img.max() - img.min() < 1e-12; }

// Vertex of the parabola through (-1, l), (0, c), (1, r).
double parabola_offset(double l, double c, double r) {
    const double denom = l - 2.0 * c + r;
    if (std::abs(denom) < 1e-15) return 0.0;
    const double off = 0.5 * (l - r) / denom;
    return std::clamp(off, -0.5, 0.5);
}

}  // namespace

Shift register_translation(const Image& ref, const Image& moving, bool subpixel) {
    if (!ref.same_shape(moving)) throw ShapeError("registration needs images of equal shape");
    const int h = ref.height(), w = ref.width();
    Shift s;
    if (is_flat(ref) || is_flat(moving)) {
        s.low_confidence = true;
        return s;
    }
    Fft2 fa(h, w, FFTW_FORWARD), fb(h, w, FFTW_FORWARD), inv(h, w, FFTW_BACKWARD);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        fa.data()[i] = ref.pixels()[i];
        fb.data()[i] = moving.pixels()[i];
    }
    fa.run();
    fb.run();
    double peak_mag = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        inv.data()[i] = std::conj(fa.data()[i]) * fb.data()[i];
        peak_mag = std::max(peak_mag, std::abs(inv.data()[i]));
    }
    // Bins without energy carry only round-off phase; drop them.
    const double floor = peak_mag * 1e-10;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double m = std::abs(inv.data()[i]);
        inv.data()[i] = m > floor ? inv.data()[i] / m : 0.0;
    }
    inv.run();

    auto at = [&](int y, int x) {
        y = ((y % h) + h) % h;
        x = ((x % w) + w) % w;
        return inv.data()[static_cast<std::size_t>(y) * w + x].real();
    };
    int py = 0, px = 0;
    double best = -kInfinity, mean_abs = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = at(y, x);
            mean_abs += std::abs(v);
            if (v > best) {
                best = v;
                py = y;
                px = x;
            }
        }
    mean_abs /= static_cast<double>(ref.size());
    s.dy = py > h / 2 ? py - h : py;
    s.dx = px > w / 2 ? px - w : px;
    if (subpixel) {
        s.dy += parabola_offset(at(py - 1, px), best, at(py + 1, px));
        s.dx += parabola_offset(at(py, px - 1), best, at(py, px + 1));
    }
    s.peak_confidence = mean_abs > 0.0 ? best / mean_abs : 0.0;
    s.low_confidence = s.peak_confidence < 3.0;
    return s;
}

Shift register_translation(const BScan& ref, const BScan& moving, bool subpixel) {
    return register_translation(ref.pixels(), moving.pixels(), subpixel);
}

Image apply_shift(const Image& img, double dy, double dx) {
    const int h = img.height(), w = img.width();
    Image out(h, w);
    const double fy = std::floor(dy), fx = std::floor(dx);
    const double ty = dy - fy, tx = dx - fx;
    const int iy = static_cast<int>(fy), ix = static_cast<int>(fx);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int sy = y + iy, sx = x + ix;
            double v = (1.0 - ty) * (1.0 - tx) * img.reflected(sy, sx);
            if (tx != 0.0) v += (1.0 - ty) * tx * img.reflected(sy, sx + 1);
            if (ty != 0.0) v += ty * (1.0 - tx) * img.reflected(sy + 1, sx);
            if (ty != 0.0 && tx != 0.0) v += ty * tx * img.reflected(sy + 1, sx + 1);
            out(y, x) = v;
        }
    return out;
}

BScan apply_shift(const BScan& img, const Shift& s) {
    return BScan(clip01(apply_shift(img.pixels(), s.dy, s.dx)), img.domain(), img.source_id());
}

Region valid_overlap(int height, int width, double dy, double dx) {
    auto axis = [](int n, double d) {
        const int lo = std::max(0, static_cast<int>(std::ceil(-d)));
        const int hi = std::min(n - 1, static_cast<int>(std::floor(n - 1 - d)));
        return std::pair{lo, std::max(0, hi - lo + 1)};
    };
    const auto [y0, hh] = axis(height, dy);
    const auto [x0, ww] = axis(width, dx);
    return {y0, x0, hh, ww};
}

Image crop(const Image& img, const Region& r) {
    if (r.y0 < 0 || r.x0 < 0 || r.y0 + r.height > img.height() || r.x0 + r.width > img.width())
        throw ShapeError("crop region outside the image");
    Image out(r.height, r.width);
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x) out(y, x) = img(r.y0 + y, r.x0 + x);
    return out;
}

}  // namespace hdcg
