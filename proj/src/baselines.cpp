#include "hdcg/baselines.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <tuple>

#include <nlohmann/json.hpp>

#include "hdcg/errors.hpp"
#include "hdcg/filters.hpp"

namespace hdcg {

// ---- parameters --------------------------------------------------------------

void BaselineParams::validate() const {
    auto odd = [](int v) { return v >= 1 && v % 2 == 1; };
    if (!odd(median.window)) throw ConfigError("median window must be odd and >= 1");
    if (wavelet.levels < 1) throw ConfigError("wavelet levels must be >= 1");
    if (wavelet.vanishing_moments < 1 || wavelet.vanishing_moments > 4)
        throw ConfigError("wavelet vanishing_moments must be in 1..4");
    if (wavelet.sigma && !(*wavelet.sigma >= 0.0)) throw ConfigError("wavelet sigma must be >= 0");
    if (wavelet.threshold && !(*wavelet.threshold >= 0.0)) throw ConfigError("wavelet threshold must be >= 0");
    if (!(bilateral.sigma_spatial > 0.0) || !(bilateral.sigma_range > 0.0))
        throw ConfigError("bilateral sigmas must be > 0");
    if (!odd(nlmeans.patch) || !odd(nlmeans.search)) throw ConfigError("nlmeans patch and search must be odd");
    if (nlmeans.patch > nlmeans.search) throw ConfigError("nlmeans patch must not exceed search");
    if (!(nlmeans.h > 0.0)) throw ConfigError("nlmeans h must be > 0");
    if (bm3d.sigma && !(*bm3d.sigma > 0.0)) throw ConfigError("bm3d sigma must be > 0");
    if (bm3d.block != 8) throw ConfigError("bm3d block size is fixed at 8");
    if (!odd(bm3d.search) || bm3d.search < 1) throw ConfigError("bm3d search must be odd");
    if (bm3d.max_group < 1 || bm3d.step < 1) throw ConfigError("bm3d max_group and step must be >= 1");
    if (!(bm3d.lambda_3d > 0.0)) throw ConfigError("bm3d lambda_3d must be > 0");
}

void to_json(nlohmann::json& j, const BaselineParams& p) {
    nlohmann::json wavelet{{"rule", p.wavelet.rule == ThresholdRule::Bayes ? "bayes" : "universal"},
                           {"levels", p.wavelet.levels},
                           {"vanishing_moments", p.wavelet.vanishing_moments}};
    if (p.wavelet.sigma) wavelet["sigma"] = *p.wavelet.sigma;
    if (p.wavelet.threshold) wavelet["threshold"] = *p.wavelet.threshold;
    nlohmann::json bm3d{{"block", p.bm3d.block},
                        {"search", p.bm3d.search},
                        {"max_group", p.bm3d.max_group},
                        {"step", p.bm3d.step},
                        {"lambda_3d", p.bm3d.lambda_3d},
                        {"match_threshold_hard", p.bm3d.match_threshold_hard},
                        {"match_threshold_wiener", p.bm3d.match_threshold_wiener}};
    if (p.bm3d.sigma) bm3d["sigma"] = *p.bm3d.sigma;
    j = nlohmann::json{
        {"median", {{"window", p.median.window}}},
        {"wavelet", wavelet},
        {"bilateral", {{"sigma_spatial", p.bilateral.sigma_spatial}, {"sigma_range", p.bilateral.sigma_range}}},
        {"nlmeans", {{"patch", p.nlmeans.patch}, {"search", p.nlmeans.search}, {"h", p.nlmeans.h}}},
        {"bm3d", bm3d}};
}

void from_json(const nlohmann::json& j, BaselineParams& p) {
    const BaselineParams d;
    for (const auto& [key, _] : j.items())
        if (std::find(baseline_names().begin(), baseline_names().end(), key) == baseline_names().end())
            throw ConfigError("unknown baseline '" + key + "' in parameter file");
    const auto m = j.value("median", nlohmann::json::object());
    p.median.window = m.value("window", d.median.window);

    const auto w = j.value("wavelet", nlohmann::json::object());
    const auto rule = w.value("rule", std::string("bayes"));
    if (rule == "bayes")
        p.wavelet.rule = ThresholdRule::Bayes;
    else if (rule == "universal")
        p.wavelet.rule = ThresholdRule::Universal;
    else
        throw ConfigError("unknown wavelet rule '" + rule + "'");
    p.wavelet.levels = w.value("levels", d.wavelet.levels);
    p.wavelet.vanishing_moments = w.value("vanishing_moments", d.wavelet.vanishing_moments);
    p.wavelet.sigma = w.contains("sigma") ? std::optional<double>(w.at("sigma").get<double>()) : std::nullopt;
    p.wavelet.threshold =
        w.contains("threshold") ? std::optional<double>(w.at("threshold").get<double>()) : std::nullopt;

    const auto b = j.value("bilateral", nlohmann::json::object());
    p.bilateral.sigma_spatial = b.value("sigma_spatial", d.bilateral.sigma_spatial);
    p.bilateral.sigma_range = b.value("sigma_range", d.bilateral.sigma_range);

    const auto n = j.value("nlmeans", nlohmann::json::object());
    p.nlmeans.patch = n.value("patch", d.nlmeans.patch);
    p.nlmeans.search = n.value("search", d.nlmeans.search);
    p.nlmeans.h = n.value("h", d.nlmeans.h);

    const auto s = j.value("bm3d", nlohmann::json::object());
    p.bm3d.sigma = s.contains("sigma") ? std::optional<double>(s.at("sigma").get<double>()) : std::nullopt;
    p.bm3d.block = s.value("block", d.bm3d.block);
    p.bm3d.search = s.value("search", d.bm3d.search);
    p.bm3d.max_group = s.value("max_group", d.bm3d.max_group);
    p.bm3d.step = s.value("step", d.bm3d.step);
    p.bm3d.lambda_3d = s.value("lambda_3d", d.bm3d.lambda_3d);
    p.bm3d.match_threshold_hard = s.value("match_threshold_hard", d.bm3d.match_threshold_hard);
    p.bm3d.match_threshold_wiener = s.value("match_threshold_wiener", d.bm3d.match_threshold_wiener);
}

BaselineParams load_baseline_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open baseline parameter file '" + path.string() + "'");
    BaselineParams p;
    try {
        p = nlohmann::json::parse(in).get<BaselineParams>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid baseline parameter file: ") + e.what());
    }
    p.validate();
    return p;
}

const std::vector<std::string>& baseline_names() {
    static const std::vector<std::string> names{"median", "wavelet", "bilateral", "nlmeans", "bm3d"};
    return names;
}

// ---- wavelets ------------------------------------------------------------------

namespace {

const std::vector<double>& daubechies(int moments) {
    static const std::array<std::vector<double>, 4> filters{
        std::vector<double>{0.7071067811865476, 0.7071067811865476},
        std::vector<double>{0.48296291314469025, 0.836516303737469, 0.22414386804185735, -0.12940952255092145},
        std::vector<double>{0.3326705529509569, 0.8068915093133388, 0.4598775021193313, -0.13501102001039084,
                            -0.08544127388224149, 0.035226291882100656},
        std::vector<double>{0.23037781330885523, 0.7148465705525415, 0.6308807679295904, -0.02798376941698385,
                            -0.18703481171888114, 0.030841381835986965, 0.032883011666982945,
                            -0.010597401784997278}};
    if (moments < 1 || moments > 4) throw ConfigError("wavelet vanishing_moments must be in 1..4");
    return filters[moments - 1];
}

// One analysis level along a strided line of even length n.
void analyze_line(double* x, std::size_t stride, int n, const std::vector<double>& h, std::vector<double>& buf) {
    const int len = static_cast<int>(h.size());
    buf.assign(n, 0.0);
    const int half = n / 2;
    for (int i = 0; i < half; ++i) {
        double a = 0.0, d = 0.0;
        for (int k = 0; k < len; ++k) {
            const double v = x[static_cast<std::size_t>((2 * i + k) % n) * stride];
            a += h[k] * v;
            d += ((k % 2 == 0) ? 1.0 : -1.0) * h[len - 1 - k] * v;
        }
        buf[i] = a;
        buf[half + i] = d;
    }
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i) * stride] = buf[i];
}

void synthesize_line(double* x, std::size_t stride, int n, const std::vector<double>& h, std::vector<double>& buf) {
    const int len = static_cast<int>(h.size());
    buf.assign(n, 0.0);
    const int half = n / 2;
    for (int i = 0; i < half; ++i) {
        const double a = x[static_cast<std::size_t>(i) * stride];
        const double d = x[static_cast<std::size_t>(half + i) * stride];
        for (int k = 0; k < len; ++k)
            buf[(2 * i + k) % n] += h[k] * a + ((k % 2 == 0) ? 1.0 : -1.0) * h[len - 1 - k] * d;
    }
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i) * stride] = buf[i];
}

void check_dwt_size(const Image& img, int levels) {
    if (levels < 1) throw ConfigError("wavelet levels must be >= 1");
    const int m = 1 << levels;
    if (img.height() % m != 0 || img.width() % m != 0)
        throw ConfigError("image sides must be divisible by 2^levels for the wavelet transform");
}

double median_of(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

double soft(double v, double t) { return v > t ? v - t : (v < -t ? v + t : 0.0); }

}  // namespace

Image dwt2(const Image& img, int levels, int vanishing_moments) {
    check_dwt_size(img, levels);
    const auto& h = daubechies(vanishing_moments);
    Image c = img;
    std::vector<double> buf;
    const auto w = static_cast<std::size_t>(c.width());
    int rh = c.height(), rw = c.width();
    for (int l = 0; l < levels; ++l) {
        for (int y = 0; y < rh; ++y) analyze_line(&c(y, 0), 1, rw, h, buf);
        for (int x = 0; x < rw; ++x) analyze_line(&c(0, x), w, rh, h, buf);
        rh /= 2;
        rw /= 2;
    }
    return c;
}

Image idwt2(const Image& coeffs, int levels, int vanishing_moments) {
    check_dwt_size(coeffs, levels);
    const auto& h = daubechies(vanishing_moments);
    Image c = coeffs;
    std::vector<double> buf;
    const auto w = static_cast<std::size_t>(c.width());
    for (int l = levels - 1; l >= 0; --l) {
        const int rh = c.height() >> l;
        const int rw = c.width() >> l;
        for (int x = 0; x < rw; ++x) synthesize_line(&c(0, x), w, rh, h, buf);
        for (int y = 0; y < rh; ++y) synthesize_line(&c(y, 0), 1, rw, h, buf);
    }
    return c;
}

double estimate_noise_sigma(const Image& img) {
    const Padding pad{0, img.height() % 2, 0, img.width() % 2};
    const Image c = dwt2(pad_image(img, pad, PadMode::Reflect), 1, 4);
    std::vector<double> hh;
    for (int y = c.height() / 2; y < c.height(); ++y)
        for (int x = c.width() / 2; x < c.width(); ++x) hh.push_back(std::abs(c(y, x)));
    return median_of(std::move(hh)) / 0.6745;
}

Image wavelet_denoise(const Image& img, const WaveletParams& params) {
    BaselineParams check;
    check.wavelet = params;
    check.validate();
    const int m = 1 << params.levels;
    if (img.height() < m || img.width() < m) throw ConfigError("too many wavelet levels for this image size");
    const int filter = static_cast<int>(daubechies(params.vanishing_moments).size());
    const int margin = ((2 * filter + m - 1) / m) * m;
    const Padding pad{margin, margin + (m - img.height() % m) % m, margin, margin + (m - img.width() % m) % m};
    Image c = dwt2(pad_image(img, pad, PadMode::Reflect), params.levels, params.vanishing_moments);

    const int H = c.height(), W = c.width();
    auto subband = [&](int level, int which) {
        // which: 0 = HL (top-right), 1 = LH (bottom-left), 2 = HH
        const int sh = H >> level, sw = W >> level;
        const int y0 = which == 0 ? 0 : sh, x0 = which == 1 ? 0 : sw;
        return std::tuple{y0, x0, sh, sw};
    };
    double sigma = 0.0;
    if (params.sigma) {
        sigma = *params.sigma;
    } else {
        auto [y0, x0, sh, sw] = subband(1, 2);
        std::vector<double> hh;
        for (int y = y0; y < y0 + sh; ++y)
            for (int x = x0; x < x0 + sw; ++x) hh.push_back(std::abs(c(y, x)));
        sigma = median_of(std::move(hh)) / 0.6745;
    }
    const double universal = sigma * std::sqrt(2.0 * std::log(static_cast<double>(img.size())));
    for (int level = 1; level <= params.levels; ++level) {
        for (int which = 0; which < 3; ++which) {
            auto [y0, x0, sh, sw] = subband(level, which);
            double t = universal;
            if (params.threshold) {
                t = *params.threshold;
            } else if (params.rule == ThresholdRule::Bayes) {
                double power = 0.0, peak = 0.0;
                for (int y = y0; y < y0 + sh; ++y)
                    for (int x = x0; x < x0 + sw; ++x) {
                        power += c(y, x) * c(y, x);
                        peak = std::max(peak, std::abs(c(y, x)));
                    }
                power /= static_cast<double>(sh) * sw;
                const double sx2 = power - sigma * sigma;
                t = sx2 > 0.0 ? sigma * sigma / std::sqrt(sx2) : peak;
            }
            for (int y = y0; y < y0 + sh; ++y)
                for (int x = x0; x < x0 + sw; ++x) c(y, x) = soft(c(y, x), t);
        }
    }
    return clip01(crop_padding(idwt2(c, params.levels, params.vanishing_moments), pad));
}

// ---- median, bilateral, nl-means ----------------------------------------------------

Image median_denoise(const Image& img, int window) {
    if (window < 1 || window % 2 == 0) throw ConfigError("median window must be odd and >= 1");
    const int r = window / 2;
    const Image p = reflect_pad(img, r);
    Image out(img.height(), img.width());
    std::vector<double> buf(static_cast<std::size_t>(window) * window);
    const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            std::size_t k = 0;
            for (int dy = 0; dy < window; ++dy)
                for (int dx = 0; dx < window; ++dx) buf[k++] = p(y + dy, x + dx);
            std::nth_element(buf.begin(), mid, buf.end());
            out(y, x) = *mid;
        }
    return out;
}

Image bilateral_denoise(const Image& img, double sigma_spatial, double sigma_range) {
    if (!(sigma_spatial > 0.0) || !(sigma_range > 0.0)) throw ConfigError("bilateral sigmas must be > 0");
    const int r = gaussian_radius(sigma_spatial);
    const int n = 2 * r + 1;
    std::vector<double> spatial(static_cast<std::size_t>(n) * n);
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            spatial[(dy + r) * n + dx + r] = std::exp(-0.5 * (dy * dy + dx * dx) / (sigma_spatial * sigma_spatial));
    const double inv_range = 0.5 / (sigma_range * sigma_range);
    const Image p = reflect_pad(img, r);
    Image out(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const double c = img(y, x);
            double num = 0.0, den = 0.0;
            for (int dy = 0; dy < n; ++dy)
                for (int dx = 0; dx < n; ++dx) {
                    const double v = p(y + dy, x + dx);
                    const double w = spatial[dy * n + dx] * std::exp(-(v - c) * (v - c) * inv_range);
                    num += w * v;
                    den += w;
                }
            out(y, x) = num / den;
        }
    return out;
}

Image nlmeans_denoise(const Image& img, int patch, int search, double h) {
    if (patch < 1 || patch % 2 == 0 || search < 1 || search % 2 == 0)
        throw ConfigError("nlmeans patch and search must be odd");
    if (patch > search) throw ConfigError("nlmeans patch must not exceed search");
    if (!(h > 0.0)) throw ConfigError("nlmeans h must be > 0");
    const int pr = patch / 2, sr = search / 2;
    const int margin = pr + sr;
    const Image p = reflect_pad(img, margin);
    const double inv_h2 = 1.0 / (h * h);
    const double inv_n = 1.0 / (static_cast<double>(patch) * patch);
    Image out(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const int cy = y + margin, cx = x + margin;
            double num = 0.0, den = 0.0;
            for (int sy = -sr; sy <= sr; ++sy)
                for (int sx = -sr; sx <= sr; ++sx) {
                    double d2 = 0.0;
                    for (int py = -pr; py <= pr; ++py)
                        for (int px = -pr; px <= pr; ++px) {
                            const double diff = p(cy + py, cx + px) - p(cy + sy + py, cx + sx + px);
                            d2 += diff * diff;
                        }
                    const double w = std::exp(-d2 * inv_n * inv_h2);
                    num += w * p(cy + sy, cx + sx);
                    den += w;
                }
            out(y, x) = num / den;
        }
    return out;
}

// ---- BM3D ------------------------------------------------------------------------------

namespace {

constexpr int kB = 8;
constexpr int kB2 = kB * kB;
using Block = std::array<double, kB2>;

const std::array<double, kB2>& dct_matrix() {
    static const auto m = [] {
        std::array<double, kB2> c{};
        for (int k = 0; k < kB; ++k)
            for (int n = 0; n < kB; ++n) {
                const double s = k == 0 ? std::sqrt(1.0 / kB) : std::sqrt(2.0 / kB);
                c[k * kB + n] = s * std::cos(std::numbers::pi * (n + 0.5) * k / kB);
            }
        return c;
    }();
    return m;
}

const std::array<double, kB2>& kaiser_window() {
    static const auto w = [] {
        std::array<double, kB2> out{};
        std::array<double, kB> k1{};
        const double beta = 2.0;
        for (int n = 0; n < kB; ++n) {
            const double r = 2.0 * n / (kB - 1) - 1.0;
            k1[n] = std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - r * r)) / std::cyl_bessel_i(0.0, beta);
        }
        for (int y = 0; y < kB; ++y)
            for (int x = 0; x < kB; ++x) out[y * kB + x] = k1[y] * k1[x];
        return out;
    }();
    return w;
}

Block dct2(const Block& b, bool inverse) {
    const auto& c = dct_matrix();
    Block tmp{}, out{};
    // forward: C B C^T, inverse: C^T B C
    for (int i = 0; i < kB; ++i)
        for (int j = 0; j < kB; ++j) {
            double s = 0.0;
            for (int k = 0; k < kB; ++k) s += (inverse ? c[k * kB + i] : c[i * kB + k]) * b[k * kB + j];
            tmp[i * kB + j] = s;
        }
    for (int i = 0; i < kB; ++i)
        for (int j = 0; j < kB; ++j) {
            double s = 0.0;
            for (int k = 0; k < kB; ++k) s += tmp[i * kB + k] * (inverse ? c[k * kB + j] : c[j * kB + k]);
            out[i * kB + j] = s;
        }
    return out;
}

// Orthonormal Haar transform along the group axis (length a power of two).
void haar(std::vector<Block>& g, bool inverse) {
    const std::size_t n = g.size();
    std::vector<Block> tmp(n);
    const double s = std::numbers::sqrt2 / 2.0;
    if (!inverse) {
        for (std::size_t len = n; len > 1; len /= 2) {
            for (std::size_t i = 0; i < len / 2; ++i)
                for (int k = 0; k < kB2; ++k) {
                    tmp[i][k] = s * (g[2 * i][k] + g[2 * i + 1][k]);
                    tmp[len / 2 + i][k] = s * (g[2 * i][k] - g[2 * i + 1][k]);
                }
            std::copy_n(tmp.begin(), len, g.begin());
        }
    } else {
        for (std::size_t len = 2; len <= n; len *= 2) {
            for (std::size_t i = 0; i < len / 2; ++i)
                for (int k = 0; k < kB2; ++k) {
                    tmp[2 * i][k] = s * (g[i][k] + g[len / 2 + i][k]);
                    tmp[2 * i + 1][k] = s * (g[i][k] - g[len / 2 + i][k]);
                }
            std::copy_n(tmp.begin(), len, g.begin());
        }
    }
}

Block read_block(const Image& img, int y, int x) {
    Block b;
    for (int i = 0; i < kB; ++i)
        for (int j = 0; j < kB; ++j) b[i * kB + j] = img(y + i, x + j);
    return b;
}

std::vector<int> ref_positions(int n, int step) {
    std::vector<int> pos;
    for (int p = 0; p <= n - kB; p += step) pos.push_back(p);
    if (pos.back() != n - kB) pos.push_back(n - kB);
    return pos;
}

struct Match {
    double dist;
    int dy;
    int dx;
};

std::vector<std::pair<int, int>> match_blocks(const Image& img, int ry, int rx, int search, int max_group,
                                              double threshold) {
    const int half = search / 2;
    const int y0 = std::max(0, ry - half), y1 = std::min(img.height() - kB, ry + half);
    const int x0 = std::max(0, rx - half), x1 = std::min(img.width() - kB, rx + half);
    std::vector<Match> found;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            double d = 0.0;
            for (int i = 0; i < kB && d <= threshold * kB2; ++i)
                for (int j = 0; j < kB; ++j) {
                    const double diff = img(ry + i, rx + j) - img(y + i, x + j);
                    d += diff * diff;
                }
            d /= kB2;
            if (d <= threshold || (y == ry && x == rx)) found.push_back({d, y - ry, x - rx});
        }
    auto ref_first = [](const Match& a, const Match& b) {
        const bool az = a.dy == 0 && a.dx == 0, bz = b.dy == 0 && b.dx == 0;
        if (az != bz) return az;
        return std::tie(a.dist, a.dy, a.dx) < std::tie(b.dist, b.dy, b.dx);
    };
    std::sort(found.begin(), found.end(), ref_first);
    std::size_t keep = std::min<std::size_t>(found.size(), static_cast<std::size_t>(max_group));
    std::size_t pow2 = 1;
    while (pow2 * 2 <= keep) pow2 *= 2;
    std::vector<std::pair<int, int>> out;
    for (std::size_t i = 0; i < pow2; ++i) out.emplace_back(ry + found[i].dy, rx + found[i].dx);
    return out;
}

struct Accumulator {
    Image num;
    Image den;

    Accumulator(int h, int w) : num(h, w), den(h, w) {}

    void add(const Block& b, int y, int x, double weight) {
        const auto& k = kaiser_window();
        for (int i = 0; i < kB; ++i)
            for (int j = 0; j < kB; ++j) {
                const double w = weight * k[i * kB + j];
                num(y + i, x + j) += w * b[i * kB + j];
                den(y + i, x + j) += w;
            }
    }

    Image result() const {
        Image out(num.height(), num.width());
        for (std::size_t i = 0; i < out.size(); ++i) out.pixels()[i] = num.pixels()[i] / den.pixels()[i];
        return out;
    }
};

}  // namespace

Image bm3d_denoise(const Image& img, const Bm3dParams& params) {
    BaselineParams check;
    check.bm3d = params;
    check.validate();
    if (img.height() < kB || img.width() < kB) throw ConfigError("image is smaller than the bm3d block size");
    const double sigma = params.sigma ? *params.sigma : estimate_noise_sigma(img);
    if (!(sigma > 1e-12)) return img;
    const double sigma2 = sigma * sigma;
    const auto ys = ref_positions(img.height(), params.step);
    const auto xs = ref_positions(img.width(), params.step);

    // Stage 1: hard thresholding of the 3D group spectrum.
    Accumulator basic(img.height(), img.width());
    const double thr = params.lambda_3d * sigma;
    for (int ry : ys)
        for (int rx : xs) {
            const auto pos = match_blocks(img, ry, rx, params.search, params.max_group, params.match_threshold_hard);
            std::vector<Block> g;
            for (auto [y, x] : pos) g.push_back(dct2(read_block(img, y, x), false));
            haar(g, false);
            int nonzero = 0;
            for (std::size_t s = 0; s < g.size(); ++s)
                for (int k = 0; k < kB2; ++k) {
                    if (s == 0 && k == 0) {
                        ++nonzero;
                        continue;
                    }
                    if (std::abs(g[s][k]) < thr)
                        g[s][k] = 0.0;
                    else
                        ++nonzero;
                }
            haar(g, true);
            const double w = 1.0 / nonzero;
            for (std::size_t s = 0; s < g.size(); ++s) basic.add(dct2(g[s], true), pos[s].first, pos[s].second, w);
        }
    const Image pilot = basic.result();

    // Stage 2: empirical Wiener shrinkage with the stage-1 estimate as pilot.
    Accumulator final_est(img.height(), img.width());
    for (int ry : ys)
        for (int rx : xs) {
            const auto pos =
                match_blocks(pilot, ry, rx, params.search, params.max_group, params.match_threshold_wiener);
            std::vector<Block> gn, gp;
            for (auto [y, x] : pos) {
                gn.push_back(dct2(read_block(img, y, x), false));
                gp.push_back(dct2(read_block(pilot, y, x), false));
            }
            haar(gn, false);
            haar(gp, false);
            double energy = 0.0;
            for (std::size_t s = 0; s < gn.size(); ++s)
                for (int k = 0; k < kB2; ++k) {
                    const double p2 = gp[s][k] * gp[s][k];
                    const double wiener = (s == 0 && k == 0) ? 1.0 : p2 / (p2 + sigma2);
                    gn[s][k] *= wiener;
                    energy += wiener * wiener;
                }
            haar(gn, true);
            const double w = 1.0 / energy;
            for (std::size_t s = 0; s < gn.size(); ++s)
                final_est.add(dct2(gn[s], true), pos[s].first, pos[s].second, w);
        }
    return clip01(final_est.result());
}

// ---- BScan wrappers and dispatch ----------------------------------------------------------

namespace {

BScan wrap(const BScan& in, Image out) { return BScan(clip01(std::move(out)), Domain::Generated, in.source_id()); }

}  // namespace

BScan median_denoise(const BScan& img, int window) { return wrap(img, median_denoise(img.pixels(), window)); }
BScan wavelet_denoise(const BScan& img, const WaveletParams& params) {
    return wrap(img, wavelet_denoise(img.pixels(), params));
}
BScan bilateral_denoise(const BScan& img, double sigma_spatial, double sigma_range) {
    return wrap(img, bilateral_denoise(img.pixels(), sigma_spatial, sigma_range));
}
BScan nlmeans_denoise(const BScan& img, int patch, int search, double h) {
    return wrap(img, nlmeans_denoise(img.pixels(), patch, search, h));
}
BScan bm3d_denoise(const BScan& img, const Bm3dParams& params) { return wrap(img, bm3d_denoise(img.pixels(), params)); }

namespace {

BScan dispatch(const std::string& name, const BScan& img, const BaselineParams& p) {
    if (name == "median") return median_denoise(img, p.median.window);
    if (name == "wavelet") return wavelet_denoise(img, p.wavelet);
    if (name == "bilateral") return bilateral_denoise(img, p.bilateral.sigma_spatial, p.bilateral.sigma_range);
    if (name == "nlmeans") return nlmeans_denoise(img, p.nlmeans.patch, p.nlmeans.search, p.nlmeans.h);
    if (name == "bm3d") return bm3d_denoise(img, p.bm3d);
    throw ConfigError("unknown baseline '" + name + "'");
}

}  // namespace

BaselineRun run_baseline(const std::string& name, const BScan& img, const BaselineParams& params) {
    if (std::find(baseline_names().begin(), baseline_names().end(), name) == baseline_names().end())
        throw ConfigError("unknown baseline '" + name + "'");
    const auto t0 = std::chrono::steady_clock::now();
    BScan out = dispatch(name, img, params);
    const auto t1 = std::chrono::steady_clock::now();
    return {std::move(out), std::chrono::duration<double>(t1 - t0).count()};
}

std::vector<double> time_baseline(const std::string& name, const BScan& img, const BaselineParams& params,
                                  int repeats) {
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    std::vector<double> times;
    for (int i = 0; i < repeats; ++i) times.push_back(run_baseline(name, img, params).seconds);
    return times;
}

}  // namespace hdcg
