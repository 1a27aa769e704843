#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "hdcg/image.hpp"

namespace testutil {

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("hdcg-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline hdcg::Image random_image(int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    hdcg::Image img(h, w);
    for (double& v : img.pixels()) v = u(rng);
    return img;
}

inline hdcg::Image constant_image(int h, int w, double v) { return hdcg::Image(h, w, v); }

}  // namespace testutil
