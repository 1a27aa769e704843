#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "hdcg/baselines.hpp"
#include "hdcg/errors.hpp"
#include "hdcg/filters.hpp"
#include "hdcg/metrics.hpp"
#include "hdcg/phantom.hpp"

using namespace hdcg;

namespace {

Image brute_median(const Image& img, int window) {
    const int r = window / 2;
    Image out(img.height(), img.width());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            std::vector<double> v;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    v.push_back(img(reflect_index(y + dy, img.height()), reflect_index(x + dx, img.width())));
            std::sort(v.begin(), v.end());
            out(y, x) = v[v.size() / 2];
        }
    return out;
}

double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.pixels()[i] - b.pixels()[i]));
    return m;
}

Image gaussian_noise(const Image& base, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma);
    Image out = base;
    for (double& v : out.pixels()) v += n(rng);
    return out;
}

}  // namespace

TEST_CASE("median filter matches a brute-force reflect-padded median") {
    const Image img = testutil::random_image(11, 13, 2);
    for (int w : {1, 3, 5}) CHECK(median_denoise(img, w) == brute_median(img, w));
    CHECK_THROWS_AS(median_denoise(img, 4), ConfigError);
}

TEST_CASE("median filter removes an isolated impulse") {
    Image img(9, 9, 0.3);
    img(4, 4) = 1.0;
    const Image out = median_denoise(img, 3);
    CHECK(out(4, 4) == 0.3);
}

TEST_CASE("wavelet transform is orthogonal and invertible") {
    const Image img = testutil::random_image(32, 16, 5);
    for (int vm : {1, 2, 4}) {
        const Image c = dwt2(img, 3, vm);
        double e_img = 0.0, e_c = 0.0;
        for (double v : img.pixels()) e_img += v * v;
        for (double v : c.pixels()) e_c += v * v;
        CHECK(e_c == doctest::Approx(e_img).epsilon(1e-10));
        CHECK(max_abs_diff(idwt2(c, 3, vm), img) < 1e-10);
    }
    CHECK_THROWS(dwt2(Image(12, 12), 3, 4));
}

TEST_CASE("haar approximation coefficient of a constant block") {
    const Image c = dwt2(Image(8, 8, 0.5), 1, 1);
    CHECK(c(0, 0) == doctest::Approx(1.0));  // 0.5 * 2 for an orthonormal 2D Haar
    CHECK(std::abs(c(0, 4)) < 1e-12);
    CHECK(std::abs(c(4, 4)) < 1e-12);
}

TEST_CASE("noise estimate recovers the gaussian sigma") {
    const Image noisy = gaussian_noise(Image(128, 128, 0.5), 0.1, 3);
    CHECK(estimate_noise_sigma(noisy) == doctest::Approx(0.1).epsilon(0.1));
    CHECK(estimate_noise_sigma(Image(32, 32, 0.4)) == doctest::Approx(0.0));
}

TEST_CASE("bilateral filter limits") {
    const Image img = testutil::random_image(16, 16, 7);
    // A vast range sigma reduces it to a Gaussian blur.
    CHECK(max_abs_diff(bilateral_denoise(img, 1.5, 1e6), gaussian_blur(img, 1.5)) < 1e-9);
    // A tiny range sigma keeps every pixel (values are distinct).
    CHECK(max_abs_diff(bilateral_denoise(img, 1.5, 1e-6), img) < 1e-12);
    CHECK_THROWS_AS(bilateral_denoise(img, 0.0, 0.1), ConfigError);
}

TEST_CASE("every baseline keeps a constant image constant") {
    const BScan flat(Image(32, 32, 0.4), Domain::HighNoise, "flat");
    for (const auto& name : baseline_names()) {
        const BaselineRun r = run_baseline(name, flat);
        CAPTURE(name);
        CHECK(max_abs_diff(r.output.pixels(), flat.pixels()) < 1e-9);
        CHECK(r.output.domain() == Domain::Generated);
        CHECK(r.output.source_id() == "flat");
        CHECK(r.seconds >= 0.0);
    }
}

TEST_CASE("every baseline lowers the error of a noisy phantom") {
    const auto s = generate_phantom(PhantomConfig{}, 4, 60, 77);
    const double before = psnr(s.hn, s.clean);
    for (const auto& name : baseline_names()) {
        CAPTURE(name);
        CHECK(psnr(run_baseline(name, s.hn).output, s.clean) > before);
    }
}

TEST_CASE("nlmeans with a vanishing h is the identity") {
    const Image img = testutil::random_image(12, 12, 9);
    CHECK(max_abs_diff(nlmeans_denoise(img, 3, 5, 1e-6), img) < 1e-12);
    CHECK_THROWS_AS(nlmeans_denoise(img, 4, 5, 0.1), ConfigError);
    CHECK_THROWS_AS(nlmeans_denoise(img, 7, 5, 0.1), ConfigError);
}

TEST_CASE("bm3d with a given sigma is deterministic") {
    const auto s = generate_phantom(PhantomConfig{}, 4, 60, 5);
    Bm3dParams p;
    p.sigma = 0.1;
    CHECK(bm3d_denoise(s.hn, p).pixels() == bm3d_denoise(s.hn, p).pixels());
}

TEST_CASE("baseline params JSON round trip and validation") {
    BaselineParams p;
    p.median.window = 7;
    p.wavelet.rule = ThresholdRule::Universal;
    p.wavelet.sigma = 0.12;
    p.bm3d.sigma = 0.2;
    const nlohmann::json j = p;
    const BaselineParams back = j.get<BaselineParams>();
    CHECK(back.median.window == 7);
    CHECK(back.wavelet.rule == ThresholdRule::Universal);
    CHECK(back.wavelet.sigma == 0.12);
    CHECK(back.bm3d.sigma == 0.2);
    CHECK_FALSE(back.wavelet.threshold.has_value());

    BaselineParams bad;
    bad.median.window = 2;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    testutil::TempDir dir("params");
    std::ofstream(dir / "p.json") << R"({"nlmeans": {"h": -1}})";
    CHECK_THROWS_AS(load_baseline_params(dir / "p.json"), ConfigError);
}

TEST_CASE("unknown method names are config errors") {
    const BScan img(Image(16, 16, 0.5), Domain::HighNoise);
    CHECK_THROWS_AS(run_baseline("gauss", img), ConfigError);
}

TEST_CASE("timing returns one duration per repeat") {
    const BScan img(testutil::random_image(16, 16, 1), Domain::HighNoise);
    const auto t = time_baseline("median", img, {}, 4);
    CHECK(t.size() == 4);
    for (double v : t) CHECK(v >= 0.0);
}
