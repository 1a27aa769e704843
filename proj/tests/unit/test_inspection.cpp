#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "hdcg/errors.hpp"
#include "hdcg/inspection.hpp"
#include "hdcg/training.hpp"

using namespace hdcg;

namespace {

// Two bright 3-pixel-thick horizontal lines centred on rows a and b.
Image two_lines(int h, int w, int a, int b) {
    Image img(h, w, 0.05);
    for (int x = 0; x < w; ++x)
        for (int d = -1; d <= 1; ++d) {
            img(a + d, x) = 0.9;
            img(b + d, x) = 0.9;
        }
    return img;
}

}  // namespace

TEST_CASE("normalize01 and resize") {
    Image m(2, 2);
    m(0, 0) = -1.0;
    m(1, 1) = 3.0;
    const Image n = normalize01(m);
    CHECK(n(0, 0) == 0.0);
    CHECK(n(1, 1) == 1.0);
    CHECK(n(0, 1) == 0.25);
    CHECK(normalize01(Image(3, 3, 7.0)) == Image(3, 3, 0.0));

    const Image up = resize_bilinear(Image(4, 4, 0.6), 16, 12);
    CHECK(up.height() == 16);
    CHECK(up.width() == 12);
    for (double v : up.pixels()) CHECK(v == doctest::Approx(0.6));
}

TEST_CASE("overlay at alpha 0 is the grayscale input and at alpha 1 the colour map") {
    const Image img = testutil::random_image(8, 8, 1);
    const Image map = testutil::random_image(4, 4, 2);
    const RgbImage gray = overlay(img, map, 0.0);
    REQUIRE(gray.rgb.size() == 8 * 8 * 3);
    for (int i = 0; i < 64; ++i) {
        const auto expect = static_cast<int>(std::lround(img.pixels()[i] * 255.0));
        for (int c = 0; c < 3; ++c) CHECK(std::abs(gray.rgb[3 * i + c] - expect) <= 1);
    }
    const Image up = resize_bilinear(map, 8, 8);
    const RgbImage col = overlay(img, map, 1.0);
    for (int i = 0; i < 64; ++i) {
        const auto rgb = colormap(up.pixels()[i]);
        for (int c = 0; c < 3; ++c) CHECK(std::abs(col.rgb[3 * i + c] - std::lround(rgb[c] * 255.0)) <= 1);
    }
    CHECK_THROWS_AS(overlay(img, map, 1.5), ConfigError);
}

TEST_CASE("colormap ramps from dark to bright") {
    const auto lo = colormap(0.0), hi = colormap(1.0);
    CHECK(lo[0] + lo[1] + lo[2] < hi[0] + hi[1] + hi[2]);
    CHECK(colormap(-3.0) == lo);
    CHECK(colormap(9.0) == hi);
}

TEST_CASE("thinning reduces a thick bar to a one pixel line") {
    Mask m(9, 30);
    for (int y = 3; y <= 5; ++y)
        for (int x = 2; x < 28; ++x) m.set(y, x, true);
    const Mask t = thin(m);
    for (int x = 5; x < 25; ++x) {
        int n = 0;
        for (int y = 0; y < 9; ++y) n += t(y, x);
        CHECK(n == 1);
        CHECK(t(4, x));
    }
}

TEST_CASE("two straight lines give ILM, RPE and their separation") {
    const Image img = two_lines(400, 200, 100, 300);
    const LayerSkeleton s = skeletonize_layers(img, Image(400, 200, 1.0));
    CHECK(s.width == 200);
    int covered = 0;
    for (int x = 0; x < 200; ++x) {
        if (!s.ilm[x] || !s.rpe[x]) continue;
        ++covered;
        CHECK(std::abs(*s.ilm[x] - 100.0) <= 1.0);
        CHECK(std::abs(*s.rpe[x] - 300.0) <= 1.0);
        CHECK(std::abs(*s.thickness[x] - 200.0) <= 1.0);
    }
    CHECK(covered >= 180);

    const ThicknessProfile px = thickness_profile(s);
    CHECK(px.unit == "px");
    REQUIRE(px.mean);
    CHECK(std::abs(*px.mean - 200.0) <= 1.0);
    const ThicknessProfile um = thickness_profile(s, 3.9);
    CHECK(um.unit == "um");
    CHECK(*um.mean == doctest::Approx(*px.mean * 3.9));
    CHECK_THROWS_AS(thickness_profile(s, 0.0), ConfigError);

    testutil::TempDir dir("thick");
    write_thickness_csv(dir / "t.csv", s);
    std::ifstream in(dir / "t.csv");
    std::string line;
    int lines = 0;
    std::getline(in, line);
    CHECK(line == "column_index,ilm_row,rpe_row,thickness_px");
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 200);
}

TEST_CASE("skeleton pixels have at most two neighbours") {
    const LayerSkeleton s = skeletonize_layers(two_lines(48, 120, 12, 30), Image(48, 120, 1.0));
    for (int y = 1; y < 47; ++y)
        for (int x = 1; x < 119; ++x) {
            if (!s.skeleton(y, x)) continue;
            int n = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) n += (dy || dx) && s.skeleton(y + dy, x + dx);
            CHECK(n <= 2);
        }
}

TEST_CASE("a single line is not enough structure") {
    Image img(48, 120, 0.05);
    for (int x = 0; x < 120; ++x) img(20, x) = 0.9;
    CHECK_THROWS_AS(skeletonize_layers(img, Image(48, 120, 1.0)), InsufficientStructureError);
    CHECK_THROWS_AS(skeletonize_layers(Image(48, 120, 0.3), Image(48, 120, 1.0)), InsufficientStructureError);
    CHECK_THROWS_AS(skeletonize_layers(two_lines(48, 120, 12, 30), Image(48, 120, 0.0)), InsufficientStructureError);
}

TEST_CASE("feature maps of every generator layer") {
    TrainConfig c;
    c.generator.base_channels = 4;
    c.generator.n_downsample = 2;
    c.generator.n_resblocks = 1;
    c.discriminator.base_channels = 4;
    c.discriminator.n_downsample = 3;
    const Checkpoint ck = initialize_training(c);
    const BScan img(testutil::random_image(30, 34, 3), Domain::HighNoise);
    const auto down = extract_feature_maps(ck, img, "down-sampling 1");
    // 30x34 pads to 32x36; the half-resolution maps lose the padding again.
    CHECK(down.maps.size() == 8);
    CHECK_FALSE(down.upscaled);
    CHECK(down.maps[0].height() == 15);
    CHECK(down.maps[0].width() == 17);
    CHECK(down.native_height == 15);
    const auto last = extract_feature_maps(ck, img, "final convolution");
    CHECK(last.maps.size() == 1);
    CHECK_FALSE(last.upscaled);
    for (double v : last.maps[0].pixels()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK_THROWS_AS(extract_feature_maps(ck, img, "bogus"), ConfigError);
}

TEST_CASE("channel ranking prefers maps that follow the boundaries") {
    const Image img = two_lines(48, 120, 12, 30);
    FeatureMapSet set;
    set.maps = {Image(48, 120, 0.0), Image(48, 120, 1.0)};
    const std::vector<double> upper(120, 12.0), lower(120, 30.0);
    const auto r = rank_tracker_channels(set, img, upper, lower);
    REQUIRE(r.size() == 2);
    CHECK(r[0].channel == 1);
    CHECK(r[0].boundary_error <= 1.0);
    CHECK(r[1].boundary_error == kInfinity);
    CHECK_THROWS_AS(rank_tracker_channels(set, img, {1.0}, lower), ShapeError);
}

TEST_CASE("overlay grid writes a png and label sidecar") {
    testutil::TempDir dir("grid");
    write_overlay_grid(dir / "g.png", {{Image(8, 8, 0.5), Image(4, 4, 0.1), "layer a"},
                                       {Image(8, 8, 0.2), Image(8, 8, 0.9), "layer b"}});
    CHECK(std::filesystem::exists(dir / "g.png"));
    std::ifstream in(dir / "g.png.labels.txt");
    std::string a, b;
    std::getline(in, a);
    std::getline(in, b);
    CHECK(a.find("layer a") != std::string::npos);
    CHECK(b.find("layer b") != std::string::npos);
}
