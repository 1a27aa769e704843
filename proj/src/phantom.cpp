#include "hdcg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "hdcg/errors.hpp"

namespace hdcg {

void PhantomConfig::validate() const {
    if (height < 32 || width < 32) throw ConfigError("phantom dimensions must be >= 32");
    if (n_layers < 2) throw ConfigError("phantom needs at least 2 layers");
    if (!reflectivities.empty() && static_cast<int>(reflectivities.size()) != n_layers)
        throw ConfigError("reflectivities must list one value per layer");
    for (double r : reflectivities)
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("reflectivities must lie in [0,1]");
    if (!(background >= 0.0 && background <= 1.0)) throw ConfigError("background must lie in [0,1]");
    if (!(thickness_fraction > 0.0 && thickness_fraction < 0.9))
        throw ConfigError("thickness_fraction must lie in (0, 0.9)");
    if (curvature < 0.0) throw ConfigError("curvature must be non-negative");
    if (frames_hn < 1 || frames_ln < 1) throw ConfigError("frame counts must be >= 1");
    if (frames_hn >= frames_ln) throw ConfigError("frames_hn must be smaller than frames_ln");
}

std::vector<double> PhantomConfig::layer_reflectivities() const {
    if (!reflectivities.empty()) return reflectivities;
    std::vector<double> r(n_layers);
    for (int k = 0; k < n_layers; ++k) {
        const double frac = std::fmod(0.5 + k * 0.6180339887, 1.0);
        r[k] = 0.25 + 0.6 * frac;
    }
    return r;
}

void to_json(nlohmann::json& j, const PhantomConfig& c) {
    j = nlohmann::json{{"height", c.height},
                       {"width", c.width},
                       {"n_layers", c.n_layers},
                       {"curvature", c.curvature},
                       {"reflectivities", c.reflectivities},
                       {"background", c.background},
                       {"thickness_fraction", c.thickness_fraction},
                       {"frames_hn", c.frames_hn},
                       {"frames_ln", c.frames_ln},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, PhantomConfig& c) {
    const PhantomConfig d;
    c.height = j.value("height", d.height);
    c.width = j.value("width", d.width);
    c.n_layers = j.value("n_layers", d.n_layers);
    c.curvature = j.value("curvature", d.curvature);
    c.reflectivities = j.value("reflectivities", d.reflectivities);
    c.background = j.value("background", d.background);
    c.thickness_fraction = j.value("thickness_fraction", d.thickness_fraction);
    c.frames_hn = j.value("frames_hn", d.frames_hn);
    c.frames_ln = j.value("frames_ln", d.frames_ln);
    c.seed = j.value("seed", d.seed);
}

PhantomConfig load_phantom_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open phantom config '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in).get<PhantomConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid phantom config: ") + e.what());
    }
}

namespace {

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

CleanPhantom render_clean_phantom(const PhantomConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    auto rng = stream_rng(seed, 0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    const double H = cfg.height;
    const double W = cfg.width;
    const double thickness = cfg.thickness_fraction * H;
    const double y0 = 0.5 * (H - thickness) + 0.05 * H * unit(rng);
    const double phase = 0.3 * unit(rng);
    const double tilt = 0.5 * cfg.curvature * unit(rng);

    std::vector<double> layer_share(cfg.n_layers);
    for (double& s : layer_share) s = 1.0 + 0.3 * unit(rng);
    double share_sum = 0.0;
    for (double s : layer_share) share_sum += s;

    // Boundary k sits at top(x) + offsets[k]; offsets[0] = 0, offsets[n] = thickness.
    std::vector<double> offsets(cfg.n_layers + 1, 0.0);
    for (int k = 0; k < cfg.n_layers; ++k) offsets[k + 1] = offsets[k] + thickness * layer_share[k] / share_sum;

    const auto refl = cfg.layer_reflectivities();
    CleanPhantom out{Image(cfg.height, cfg.width), std::vector<double>(cfg.width), std::vector<double>(cfg.width)};
    constexpr double kEdgeSoftness = 0.6;  // pixels
    for (int x = 0; x < cfg.width; ++x) {
        const double u = W > 1 ? x / (W - 1) - 0.5 : 0.0;
        const double top = y0 - cfg.curvature * std::cos(std::numbers::pi * 1.2 * u + phase) + tilt * u;
        out.top_boundary[x] = top;
        out.bottom_boundary[x] = top + thickness;
        for (int y = 0; y < cfg.height; ++y) {
            double v = cfg.background;
            for (int k = 0; k < cfg.n_layers; ++k) {
                const double upper = top + offsets[k];
                const double lower = top + offsets[k + 1];
                const double window = logistic((y - upper) / kEdgeSoftness) - logistic((y - lower) / kEdgeSoftness);
                v += (refl[k] - cfg.background) * window;
            }
            out.image(y, x) = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

Image speckle_average(const Image& clean, int frames, std::mt19937_64& rng) {
    if (frames < 1) throw ConfigError("frame count must be >= 1");
    std::exponential_distribution<double> speckle(1.0);
    Image out(clean.height(), clean.width());
    auto src = clean.pixels();
    auto dst = out.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) {
        double acc = 0.0;
        for (int k = 0; k < frames; ++k) acc += speckle(rng);
        dst[i] = src[i] * acc / frames;
    }
    return out;
}

PhantomSample generate_phantom(const PhantomConfig& cfg, int frames_hn, int frames_ln, std::uint64_t seed) {
    PhantomConfig c = cfg;
    c.frames_hn = frames_hn;
    c.frames_ln = frames_ln;
    c.validate();

    CleanPhantom clean = render_clean_phantom(c, seed);
    auto rng_hn = stream_rng(seed, 1);
    auto rng_ln = stream_rng(seed, 2);
    const std::string id = "phantom-" + std::to_string(seed);
    Image hn = clip01(speckle_average(clean.image, frames_hn, rng_hn));
    Image ln = clip01(speckle_average(clean.image, frames_ln, rng_ln));

    return PhantomSample{BScan(clean.image, Domain::Clean, id),
                         BScan(std::move(hn), Domain::HighNoise, id),
                         BScan(std::move(ln), Domain::LowNoise, id),
                         seed,
                         frames_hn,
                         frames_ln,
                         std::move(clean.top_boundary),
                         std::move(clean.bottom_boundary)};
}

}  // namespace hdcg
