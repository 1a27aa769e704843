#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "hdcg/errors.hpp"
#include "hdcg/pipeline.hpp"

using namespace hdcg;

TEST_CASE("phantom dataset round trips through the loader") {
    testutil::TempDir dir("ds");
    PhantomConfig cfg;
    cfg.height = 32;
    cfg.width = 48;
    const auto ids = write_phantom_dataset(dir.path(), cfg, 3, 10);
    CHECK(ids == std::vector<std::string>{"p0000", "p0001", "p0002"});

    const auto pairs = load_eval_pairs(dir.path(), Domain::Clean);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[1].hn.source_id() == "p0001/0");
    CHECK(pairs[1].reference.domain() == Domain::Clean);
    const auto direct = generate_phantom(cfg, cfg.frames_hn, cfg.frames_ln, 11);
    for (std::size_t i = 0; i < direct.hn.pixels().size(); ++i)
        CHECK(std::abs(pairs[1].hn.pixels().pixels()[i] - direct.hn.pixels().pixels()[i]) <= 0.5 / 65535 + 1e-15);
    CHECK(load_eval_pairs(dir.path(), Domain::LowNoise, 2).size() == 2);

    std::ifstream in(dir / "manifest.json");
    const auto manifest = nlohmann::json::parse(in);
    CHECK(manifest["schema"] == "phantoms/v1");
    CHECK(manifest["samples"][2]["seed"] == 12);
    CHECK(manifest["samples"][0]["top_boundary"].size() == 48);
}

TEST_CASE("pairs need both domains") {
    testutil::TempDir dir("nopair");
    std::filesystem::create_directories(dir / "hn/a");
    std::filesystem::create_directories(dir / "ln/b");
    save_png(dir / "hn/a/0.png", Image(8, 8, 0.1));
    save_png(dir / "ln/b/0.png", Image(8, 8, 0.1));
    CHECK_THROWS_AS(load_eval_pairs(dir.path(), Domain::LowNoise), DataError);
}

TEST_CASE("denoiser factory") {
    const BScan img(testutil::random_image(16, 16, 1), Domain::HighNoise, "x");
    CHECK(make_denoiser("raw", {})(img).pixels() == img.pixels());
    CHECK(make_denoiser("median", {})(img).pixels() == median_denoise(img, 3).pixels());
    CHECK_THROWS_AS(make_denoiser("ours", {}), ConfigError);
    CHECK_THROWS_AS(make_denoiser("sharpen", {}), ConfigError);
}
