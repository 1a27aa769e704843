#include <doctest.h>

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "hdcg/errors.hpp"
#include "hdcg/metrics.hpp"
#include "hdcg/phantom.hpp"

using namespace hdcg;

namespace {

double oracle_psnr(const Image& a, const Image& b) {
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mse += std::pow(a.pixels()[i] - b.pixels()[i], 2);
    return 10.0 * std::log10(1.0 / (mse / a.size()));
}

// Direct evaluation of windowed statistics at every fully-contained window.
double oracle_ssim(const Image& a, const Image& b) {
    const int r = 5;
    std::vector<double> w;
    double wsum = 0.0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const double g = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
            w.push_back(g);
            wsum += g;
        }
    for (double& g : w) g /= wsum;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    int n = 0;
    for (int y = r; y < a.height() - r; ++y)
        for (int x = r; x < a.width() - r; ++x) {
            double ma = 0, mb = 0;
            int k = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx, ++k) {
                    ma += w[k] * a(y + dy, x + dx);
                    mb += w[k] * b(y + dy, x + dx);
                }
            double va = 0, vb = 0, cov = 0;
            k = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx, ++k) {
                    const double da = a(y + dy, x + dx) - ma, db = b(y + dy, x + dx) - mb;
                    va += w[k] * da * da;
                    vb += w[k] * db * db;
                    cov += w[k] * da * db;
                }
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++n;
        }
    return total / n;
}

Image circular_shift(const Image& img, int dy, int dx) {
    const int h = img.height(), w = img.width();
    Image out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out(y, x) = img(((y - dy) % h + h) % h, ((x - dx) % w + w) % w);
    return out;
}

Mask box_mask(int h, int w, int y0, int y1, int x0, int x1) {
    Mask m(h, w);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) m.set(y, x, true);
    return m;
}

}  // namespace

TEST_CASE("psnr matches the direct formula") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Image a = testutil::random_image(16, 16, s), b = testutil::random_image(16, 16, s + 100);
        CHECK(psnr(a, b) == doctest::Approx(oracle_psnr(a, b)).epsilon(1e-12));
    }
    const Image a = testutil::random_image(8, 8, 1);
    CHECK(psnr(a, a) == kInfinity);
    CHECK_THROWS_AS(psnr(a, Image(8, 9)), ShapeError);
}

TEST_CASE("ssim matches direct windowed statistics") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Image a = testutil::random_image(16, 16, s), b = testutil::random_image(16, 16, s + 50);
        CHECK(ssim(a, b) == doctest::Approx(oracle_ssim(a, b)).epsilon(1e-9));
    }
    const Image a = testutil::random_image(16, 16, 3);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(ssim(Image(8, 8), Image(8, 8)), ShapeError);
}

TEST_CASE("integer registration recovers circular shifts exactly") {
    const Image ref = testutil::random_image(32, 40, 4);
    for (auto [dy, dx] : {std::pair{0, 0}, {3, -5}, {-7, 2}, {15, 19}}) {
        const Shift s = register_translation(ref, circular_shift(ref, dy, dx));
        CHECK(s.dy == dy);
        CHECK(s.dx == dx);
        CHECK_FALSE(s.low_confidence);
    }
}

TEST_CASE("flat images give a low-confidence zero shift") {
    const Shift s = register_translation(Image(16, 16, 0.2), testutil::random_image(16, 16, 1));
    CHECK(s.low_confidence);
    CHECK(s.dy == 0.0);
    CHECK(s.dx == 0.0);
}

TEST_CASE("apply_shift undoes a translation and valid_overlap bounds it") {
    const Image ref = testutil::random_image(20, 20, 8);
    const Image moved = apply_shift(ref, -2, 3);  // moved(p) = ref(p - (2, -3))
    const Image back = apply_shift(moved, 2, -3);
    const Region r = valid_overlap(20, 20, 2, -3);
    CHECK(r.y0 == 0);
    CHECK(r.height == 18);
    CHECK(r.x0 == 3);
    CHECK(r.width == 17);
    CHECK(crop(back, r) == crop(ref, r));
    CHECK_THROWS_AS(crop(ref, Region{15, 0, 10, 5}), ShapeError);
}

TEST_CASE("cnr and msr oracles") {
    Image img(4, 4, 0.0);
    const Mask sig = box_mask(4, 4, 0, 2, 0, 4), bg = box_mask(4, 4, 2, 4, 0, 4);
    // signal {0.8, 0.6} x4, background {0.1, 0.3} x4
    for (int x = 0; x < 4; ++x) {
        img(0, x) = 0.8;
        img(1, x) = 0.6;
        img(2, x) = 0.1;
        img(3, x) = 0.3;
    }
    CHECK(msr(img, sig) == doctest::Approx(0.7 / 0.1).epsilon(1e-12));
    CHECK(cnr(img, sig, bg) == doctest::Approx(0.5 / std::sqrt(0.02)).epsilon(1e-12));
    CHECK(msr(Image(4, 4, 0.5), sig) == kInfinity);
}

TEST_CASE("otsu separates a bimodal sample") {
    std::vector<double> v(100, 0.2);
    v.insert(v.end(), 100, 0.8);
    const double t = otsu_threshold(v);
    CHECK(t > 0.2);
    CHECK(t < 0.8);
}

TEST_CASE("polygon fill uses pixel centres") {
    const std::vector<std::pair<double, double>> square{{1.5, 1.5}, {1.5, 4.5}, {4.5, 4.5}, {4.5, 1.5}};
    const Mask m = fill_polygon(square, 8, 8);
    CHECK(m.count() == 9);
    CHECK(m(2, 2));
    CHECK(m(4, 4));
    CHECK_FALSE(m(1, 1));
}

TEST_CASE("iso contours of a bright disc form one closed loop around it") {
    Image img(21, 21, 0.0);
    for (int y = 0; y < 21; ++y)
        for (int x = 0; x < 21; ++x)
            if ((y - 10) * (y - 10) + (x - 10) * (x - 10) <= 36) img(y, x) = 1.0;
    const auto loops = iso_contours(img, 0.5);
    REQUIRE(loops.size() == 1);
    const Mask inside = fill_polygon(loops[0], 21, 21);
    for (int y = 0; y < 21; ++y)
        for (int x = 0; x < 21; ++x) CHECK(inside(y, x) == (img(y, x) == 1.0));
}

TEST_CASE("phantom masks are disjoint and signal lies inside the retina") {
    const auto s = generate_phantom(PhantomConfig{}, 12, 60, 3);
    const MaskPair m = extract_masks(s.ln);
    CHECK(m.signal.any());
    CHECK(m.background.any());
    for (int y = 0; y < m.retina.height(); ++y)
        for (int x = 0; x < m.retina.width(); ++x) {
            CHECK_FALSE((m.signal(y, x) && m.background(y, x)));
            if (m.signal(y, x)) CHECK(m.retina(y, x));
            if (m.background(y, x)) CHECK_FALSE(m.retina(y, x));
        }
}

TEST_CASE("mask extraction fails cleanly on a flat image") {
    CHECK_THROWS_AS(extract_masks(Image(32, 32, 0.3)), MaskExtractionError);
}

TEST_CASE("mean_std skips non-finite values") {
    const std::vector<double> v{1.0, 3.0, kInfinity, std::nan("")};
    const MeanStd ms = mean_std(v);
    CHECK(ms.mean == 2.0);
    CHECK(ms.std == 1.0);
}

TEST_CASE("evaluating the reference against itself") {
    std::vector<EvalPair> pairs;
    for (std::uint64_t seed : {1, 2}) {
        const auto s = generate_phantom(PhantomConfig{}, 12, 60, seed);
        pairs.push_back({s.hn, s.ln});
    }
    std::size_t k = 0;
    const MetricRow row = evaluate_method("oracle", pairs, [&](const BScan&) { return pairs[k++].reference; });
    CHECK(row.n == 2);
    CHECK(row.excluded == 0);
    CHECK(row.ssim.mean == doctest::Approx(1.0));
    for (const auto& s : row.samples) {
        CHECK(s.shift.dy == 0.0);
        CHECK(s.psnr == kInfinity);
    }

    MetricReport report{{row}};
    testutil::TempDir dir("eval");
    report.write_csv(dir / "m.csv");
    std::ifstream in(dir / "m.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("method,cnr_mean", 0) == 0);
}

TEST_CASE("runtime benchmark times every image and repeat") {
    const std::vector<BScan> imgs{BScan(Image(8, 8, 0.5), Domain::HighNoise), BScan(Image(8, 8, 0.2), Domain::HighNoise)};
    int calls = 0;
    const auto report = benchmark_runtime({{"noop", [&](const BScan& b) { ++calls; return b; }}}, imgs, 3);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].n == 6);
    CHECK(calls == 7);  // includes the warm-up
    CHECK(report.rows[0].device == "cpu");
}
