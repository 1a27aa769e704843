#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "hdcg/errors.hpp"
#include "hdcg/filters.hpp"
#include "hdcg/metrics.hpp"

namespace hdcg {

using Point = std::pair<double, double>;
using Polygon = std::vector<Point>;

std::vector<Polygon> iso_contours(const Image& img, double level) {
    const int h = img.height() + 2, w = img.width() + 2;
    const double low = std::min(img.min(), level) - 1.0;
    auto val = [&](int y, int x) {
        if (y == 0 || x == 0 || y == h - 1 || x == w - 1) return low;
        return img(y - 1, x - 1);
    };
    auto inside = [&](int y, int x) { return val(y, x) >= level; };

    // Edge ids: horizontal edges first, then vertical ones.
    const int n_horizontal = h * (w - 1);
    auto hid = [&](int y, int x) { return y * (w - 1) + x; };
    auto vid = [&](int y, int x) { return n_horizontal + y * w + x; };
    auto crossing = [&](int y0, int x0, int y1, int x1) {
        double v0 = val(y0, x0), v1 = val(y1, x1);
        double t = (level - v0) / (v1 - v0);
        // Keep vertices off the pixel centres so scanline filling is unambiguous.
        t = std::clamp(t, 1e-7, 1.0 - 1e-7);
        return Point{y0 + t * (y1 - y0) - 1.0, x0 + t * (x1 - x0) - 1.0};
    };

    std::unordered_map<int, Point> points;
    std::vector<std::pair<int, int>> segments;
    for (int y = 0; y + 1 < h; ++y)
        for (int x = 0; x + 1 < w; ++x) {
            const bool tl = inside(y, x), tr = inside(y, x + 1), br = inside(y + 1, x + 1), bl = inside(y + 1, x);
            const int top = hid(y, x), bottom = hid(y + 1, x), left = vid(y, x), right = vid(y, x + 1);
            std::vector<int> edges;
            if (tl != tr) edges.push_back(top);
            if (tr != br) edges.push_back(right);
            if (br != bl) edges.push_back(bottom);
            if (bl != tl) edges.push_back(left);
            if (edges.empty()) continue;
            for (int e : edges) {
                if (points.count(e)) continue;
                if (e == top) points[e] = crossing(y, x, y, x + 1);
                if (e == bottom) points[e] = crossing(y + 1, x, y + 1, x + 1);
                if (e == left) points[e] = crossing(y, x, y + 1, x);
                if (e == right) points[e] = crossing(y, x + 1, y + 1, x + 1);
            }
            if (edges.size() == 2) {
                segments.emplace_back(edges[0], edges[1]);
                continue;
            }
            // Saddle: the centre value decides which diagonal stays connected.
            const double centre = 0.25 * (val(y, x) + val(y, x + 1) + val(y + 1, x + 1) + val(y + 1, x));
            const bool centre_inside = centre >= level;
            if (tl != centre_inside) {
                segments.emplace_back(top, left);
                segments.emplace_back(right, bottom);
            } else {
                segments.emplace_back(top, right);
                segments.emplace_back(bottom, left);
            }
        }

    std::unordered_map<int, std::vector<int>> by_edge;
    for (int s = 0; s < static_cast<int>(segments.size()); ++s) {
        by_edge[segments[s].first].push_back(s);
        by_edge[segments[s].second].push_back(s);
    }
    std::vector<bool> used(segments.size(), false);
    std::vector<Polygon> out;
    for (std::size_t start = 0; start < segments.size(); ++start) {
        if (used[start]) continue;
        Polygon poly;
        int seg = static_cast<int>(start);
        int edge = segments[start].first;
        while (seg >= 0 && !used[seg]) {
            used[seg] = true;
            poly.push_back(points[edge]);
            edge = segments[seg].first == edge ? segments[seg].second : segments[seg].first;
            int next = -1;
            for (int cand : by_edge[edge])
                if (!used[cand]) next = cand;
            seg = next;
        }
        if (poly.size() >= 3) out.push_back(std::move(poly));
    }
    return out;
}

namespace {

double polygon_area(const Polygon& p) {
    double a = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& [y0, x0] = p[i];
        const auto& [y1, x1] = p[(i + 1) % p.size()];
        a += x0 * y1 - x1 * y0;
    }
    return 0.5 * std::abs(a);
}

void toggle_polygon(Mask& m, const Polygon& poly) {
    std::vector<double> xs;
    for (int y = 0; y < m.height(); ++y) {
        xs.clear();
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const auto& [y0, x0] = poly[i];
            const auto& [y1, x1] = poly[(i + 1) % poly.size()];
            if ((y0 <= y && y < y1) || (y1 <= y && y < y0)) xs.push_back(x0 + (y - y0) * (x1 - x0) / (y1 - y0));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            const int a = std::max(0, static_cast<int>(std::ceil(xs[k])));
            const int b = std::min(m.width() - 1, static_cast<int>(std::floor(xs[k + 1])));
            for (int x = a; x <= b; ++x) m.set(y, x, !m(y, x));
        }
    }
}

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

Mask fill_polygon(const Polygon& poly, int height, int width) {
    Mask m(height, width);
    toggle_polygon(m, poly);
    return m;
}

double otsu_threshold(std::span<const double> values) {
    if (values.empty()) throw DataError("otsu threshold of an empty set");
    const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx <= mn) return mn;
    constexpr int kBins = 256;
    std::vector<double> hist(kBins, 0.0);
    const double width = (mx - mn) / kBins;
    for (double v : values) hist[std::min(kBins - 1, static_cast<int>((v - mn) / width))] += 1.0;
    const double total = static_cast<double>(values.size());
    double sum_all = 0.0;
    for (int i = 0; i < kBins; ++i) sum_all += i * hist[i];
    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    int best_i = 0;
    for (int i = 0; i < kBins - 1; ++i) {
        w0 += hist[i];
        sum0 += i * hist[i];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_i = i;
        }
    }
    return mn + (best_i + 1) * width;
}

MaskPair extract_masks(const Image& img, const MaskOptions& opt) {
    if (!(opt.smoothing_sigma > 0.0)) throw ConfigError("mask smoothing sigma must be > 0");
    if (opt.background_margin < 0) throw ConfigError("background margin must be >= 0");
    if (img.empty() || !(img.max() > img.min())) throw MaskExtractionError("image has no contrast");
    const int h = img.height(), w = img.width();
    const Image smooth = gaussian_blur(img, opt.smoothing_sigma, PadMode::Zero);

    MaskPair r;
    r.level_retina = opt.level_retina ? *opt.level_retina : otsu_threshold(smooth.pixels());
    const auto contours = iso_contours(smooth, r.level_retina);
    if (contours.empty()) throw MaskExtractionError("no closed contour at the retina level");
    const auto largest = std::max_element(contours.begin(), contours.end(), [](const auto& a, const auto& b) {
        return polygon_area(a) < polygon_area(b);
    });
    r.retina_contour = *largest;
    r.retina = fill_polygon(*largest, h, w);
    if (!r.retina.any()) throw MaskExtractionError("retina region is empty");

    const int m = opt.background_margin;
    r.background = Mask(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool clear = true;
            for (int dy = -m; dy <= m && clear; ++dy)
                for (int dx = -m; dx <= m && clear; ++dx) {
                    if (dy * dy + dx * dx > m * m) continue;
                    const int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    if (r.retina(yy, xx)) clear = false;
                }
            r.background.set(y, x, clear);
        }
    if (!r.background.any()) throw MaskExtractionError("background region is empty");

    std::vector<double> inner;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (r.retina(y, x)) inner.push_back(smooth(y, x));
    r.level_signal = opt.level_signal ? *opt.level_signal : percentile(inner, 0.75);
    const double below = std::min(smooth.min(), r.level_signal) - 1.0;
    Image masked(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) masked(y, x) = r.retina(y, x) ? smooth(y, x) : below;
    r.signal = Mask(h, w);
    for (const auto& c : iso_contours(masked, r.level_signal)) toggle_polygon(r.signal, c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (!r.retina(y, x)) r.signal.set(y, x, false);
    if (!r.signal.any()) throw MaskExtractionError("signal region is empty");
    return r;
}

MaskPair extract_masks(const BScan& img, const MaskOptions& opt) { return extract_masks(img.pixels(), opt); }

RgbImage mask_overlay(const Image& img, const MaskPair& masks) {
    RgbImage out{img.height(), img.width(), {}};
    out.rgb.resize(static_cast<std::size_t>(img.height()) * img.width() * 3);
    auto put = [&](int y, int x, double r, double g, double b) {
        const std::size_t i = (static_cast<std::size_t>(y) * img.width() + x) * 3;
        out.rgb[i] = static_cast<std::uint8_t>(std::lround(std::clamp(r, 0.0, 1.0) * 255.0));
        out.rgb[i + 1] = static_cast<std::uint8_t>(std::lround(std::clamp(g, 0.0, 1.0) * 255.0));
        out.rgb[i + 2] = static_cast<std::uint8_t>(std::lround(std::clamp(b, 0.0, 1.0) * 255.0));
    };
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const double v = std::clamp(img(y, x), 0.0, 1.0);
            if (masks.signal.height() && masks.signal(y, x))
                put(y, x, 0.5 * v + 0.5, 0.5 * v, 0.5 * v);
            else if (masks.background.height() && masks.background(y, x))
                put(y, x, 0.65 * v, 0.65 * v, 0.65 * v + 0.35);
            else
                put(y, x, v, v, v);
        }
    const auto& c = masks.retina_contour;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const auto [y0, x0] = c[i];
        const auto [y1, x1] = c[(i + 1) % c.size()];
        const int steps = 1 + static_cast<int>(2.0 * std::max(std::abs(y1 - y0), std::abs(x1 - x0)));
        for (int s = 0; s <= steps; ++s) {
            const double t = static_cast<double>(s) / steps;
            const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
            const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
            if (y >= 0 && y < img.height() && x >= 0 && x < img.width()) put(y, x, 1.0, 0.9, 0.1);
        }
    }
    return out;
}

}  // namespace hdcg
