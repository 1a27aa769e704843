#include "hdcg/inspection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>

#include "hdcg/baselines.hpp"
#include "hdcg/errors.hpp"
#include "hdcg/training.hpp"

namespace hdcg {

// ---- feature maps ------------------------------------------------------------------

Image normalize01(const Image& map) {
    const double lo = map.min(), hi = map.max();
    Image out(map.height(), map.width());
    if (hi - lo <= 0.0) return out;
    for (std::size_t i = 0; i < map.size(); ++i) out.pixels()[i] = (map.pixels()[i] - lo) / (hi - lo);
    return out;
}

FeatureMapSet extract_feature_maps(const Generator& gen, const Image& img, const std::string& layer) {
    const nn::Tensor act = gen.layer_output(to_tensor(img), layer);
    FeatureMapSet set;
    set.layer_name = layer;
    set.native_height = act.height();
    set.native_width = act.width();
    for (int c = 0; c < act.channels(); ++c) {
        Image raw = tensor_to_image(act, c);
        set.maps.push_back(normalize01(raw));
        set.raw.push_back(std::move(raw));
    }
    return set;
}

FeatureMapSet extract_feature_maps(const Checkpoint& ckpt, const BScan& img, const std::string& layer) {
    const Generator& gen = ckpt.model.gen_l;
    const auto [padded, pad] = pad_to_multiple(img, gen.spec().size_multiple());
    FeatureMapSet set = extract_feature_maps(gen, padded.pixels(), layer);
    if (pad == Padding{}) return set;
    // Drop the rows/columns that only cover padding, at the layer's resolution.
    const double sy = static_cast<double>(set.native_height) / padded.height();
    const double sx = static_cast<double>(set.native_width) / padded.width();
    const int y0 = static_cast<int>(std::lround(pad.top * sy));
    const int x0 = static_cast<int>(std::lround(pad.left * sx));
    const int h = std::clamp(static_cast<int>(std::lround(img.height() * sy)), 1, set.native_height - y0);
    const int w = std::clamp(static_cast<int>(std::lround(img.width() * sx)), 1, set.native_width - x0);
    for (auto* v : {&set.maps, &set.raw})
        for (auto& m : *v) m = crop(m, {y0, x0, h, w});
    for (auto& m : set.maps) m = normalize01(m);
    set.native_height = h;
    set.native_width = w;
    return set;
}

Image resize_bilinear(const Image& map, int height, int width) {
    if (map.empty() || height < 1 || width < 1) throw ShapeError("cannot resize an empty map");
    Image out(height, width);
    const double sy = static_cast<double>(map.height()) / height;
    const double sx = static_cast<double>(map.width()) / width;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, map.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, map.height() - 1);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, map.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, map.width() - 1);
            const double tx = fx - x0;
            out(y, x) = (1 - ty) * ((1 - tx) * map(y0, x0) + tx * map(y0, x1)) +
                        ty * ((1 - tx) * map(y1, x0) + tx * map(y1, x1));
        }
    }
    return out;
}

std::array<double, 3> colormap(double v) {
    static constexpr std::array<std::array<double, 4>, 4> stops{{{0.0, 0.05, 0.02, 0.2},
                                                                  {0.35, 0.5, 0.1, 0.5},
                                                                  {0.65, 0.95, 0.4, 0.1},
                                                                  {1.0, 1.0, 1.0, 0.3}}};
    v = std::clamp(v, 0.0, 1.0);
    for (std::size_t i = 1; i < stops.size(); ++i) {
        if (v <= stops[i][0]) {
            const auto& a = stops[i - 1];
            const auto& b = stops[i];
            const double t = (v - a[0]) / (b[0] - a[0]);
            return {a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2]), a[3] + t * (b[3] - a[3])};
        }
    }
    return {stops.back()[1], stops.back()[2], stops.back()[3]};
}

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

RgbImage overlay(const Image& img, const Image& map, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("overlay alpha must lie in [0, 1]");
    const Image m = map.same_shape(img) ? map : resize_bilinear(map, img.height(), img.width());
    RgbImage out{img.height(), img.width(), std::vector<std::uint8_t>(img.size() * 3)};
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double g = std::clamp(img.pixels()[i], 0.0, 1.0);
        const auto c = colormap(m.pixels()[i]);
        for (int k = 0; k < 3; ++k) out.rgb[i * 3 + k] = to_byte((1.0 - alpha) * g + alpha * c[k]);
    }
    return out;
}

void write_overlay_grid(const std::filesystem::path& png, const std::vector<GridRow>& rows, double alpha) {
    if (rows.empty()) throw DataError("overlay grid needs at least one row");
    const int h = rows.front().input.height(), w = rows.front().input.width();
    constexpr int kGap = 2;
    RgbImage grid{static_cast<int>(rows.size()) * (h + kGap) - kGap, 3 * w + 2 * kGap, {}};
    grid.rgb.assign(static_cast<std::size_t>(grid.height) * grid.width * 3, 255);
    auto blit = [&](const RgbImage& tile, int oy, int ox) {
        for (int y = 0; y < tile.height; ++y)
            for (int x = 0; x < tile.width; ++x)
                for (int k = 0; k < 3; ++k)
                    grid.rgb[(static_cast<std::size_t>(oy + y) * grid.width + ox + x) * 3 + k] =
                        tile.rgb[(static_cast<std::size_t>(y) * tile.width + x) * 3 + k];
    };
    std::ofstream labels(png.string() + ".labels.txt");
    if (!labels) throw IoError("cannot write labels next to '" + png.string() + "'");
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.input.height() != h || row.input.width() != w) throw ShapeError("overlay grid rows differ in size");
        const Image m = resize_bilinear(normalize01(row.map), h, w);
        const int oy = static_cast<int>(r) * (h + kGap);
        blit(overlay(row.input, m, 0.0), oy, 0);
        blit(overlay(row.input, m, alpha), oy, w + kGap);
        blit(overlay(row.input, m, 1.0), oy, 2 * (w + kGap));
        labels << r << '\t' << row.label << '\n';
    }
    save_png_rgb(png, grid);
}

// ---- skeletons -----------------------------------------------------------------------

namespace {

constexpr std::array<int, 8> kDy{-1, -1, 0, 1, 1, 1, 0, -1};  // P2..P9: N, NE, E, SE, S, SW, W, NW
constexpr std::array<int, 8> kDx{0, 1, 1, 1, 0, -1, -1, -1};

bool on(const Mask& m, int y, int x) { return y >= 0 && y < m.height() && x >= 0 && x < m.width() && m(y, x); }

std::array<bool, 8> ring(const Mask& m, int y, int x) {
    std::array<bool, 8> p{};
    for (int k = 0; k < 8; ++k) p[k] = on(m, y + kDy[k], x + kDx[k]);
    return p;
}

int neighbours(const Mask& m, int y, int x) {
    int n = 0;
    for (bool b : ring(m, y, x)) n += b;
    return n;
}

// Number of 8-connected groups among the set ring pixels.
int ring_components(const std::array<bool, 8>& p) {
    std::array<int, 8> label{};
    label.fill(-1);
    int groups = 0;
    for (int s = 0; s < 8; ++s) {
        if (!p[s] || label[s] >= 0) continue;
        std::vector<int> stack{s};
        label[s] = groups;
        while (!stack.empty()) {
            const int a = stack.back();
            stack.pop_back();
            for (int b = 0; b < 8; ++b) {
                if (!p[b] || label[b] >= 0) continue;
                if (std::abs(kDy[a] - kDy[b]) <= 1 && std::abs(kDx[a] - kDx[b]) <= 1) {
                    label[b] = groups;
                    stack.push_back(b);
                }
            }
        }
        ++groups;
    }
    return groups;
}

}  // namespace

Mask thin(const Mask& input) {
    Mask m = input;
    bool changed = true;
    std::vector<std::pair<int, int>> remove;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            remove.clear();
            for (int y = 0; y < m.height(); ++y)
                for (int x = 0; x < m.width(); ++x) {
                    if (!m(y, x)) continue;
                    const auto p = ring(m, y, x);
                    int b = 0, a = 0;
                    for (int k = 0; k < 8; ++k) {
                        b += p[k];
                        a += (!p[k] && p[(k + 1) % 8]);
                    }
                    if (b < 2 || b > 6 || a != 1) continue;
                    const bool n = p[0], e = p[2], s = p[4], w = p[6];
                    if (pass == 0 && ((n && e && s) || (e && s && w))) continue;
                    if (pass == 1 && ((n && e && w) || (n && s && w))) continue;
                    remove.emplace_back(y, x);
                }
            for (auto [y, x] : remove) m.set(y, x, false);
            changed = changed || !remove.empty();
        }
    }
    // Staircase corners: pixels with more than two neighbours whose removal
    // keeps their neighbourhood connected.
    changed = true;
    while (changed) {
        changed = false;
        for (int y = 0; y < m.height(); ++y)
            for (int x = 0; x < m.width(); ++x) {
                if (!m(y, x) || neighbours(m, y, x) <= 2) continue;
                if (ring_components(ring(m, y, x)) == 1) {
                    m.set(y, x, false);
                    changed = true;
                }
            }
    }
    return m;
}

LayerSkeleton skeletonize_layers(const Image& img, const Image& map) {
    if (!img.same_shape(map)) throw ShapeError("feature map must be up-scaled to the image size first");
    const int h = img.height(), w = img.width();
    Image product(h, w);
    for (std::size_t i = 0; i < img.size(); ++i) product.pixels()[i] = img.pixels()[i] * map.pixels()[i];
    const double mean = product.mean();
    Image binary(h, w);
    for (std::size_t i = 0; i < img.size(); ++i) binary.pixels()[i] = product.pixels()[i] > mean ? 1.0 : 0.0;
    const Image filtered = median_denoise(binary, 3);
    Mask fg(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) fg.set(y, x, filtered(y, x) > 0.5);
    Mask skel = thin(fg);
    // Remaining branch points would join separate curves; drop them.
    Mask curves(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) curves.set(y, x, skel(y, x) && neighbours(skel, y, x) <= 2);

    struct Curve {
        std::vector<std::pair<int, int>> pixels;
        int span = 0;
        double mean_row = 0.0;
    };
    std::vector<Curve> found;
    Mask seen(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!curves(y, x) || seen(y, x)) continue;
            Curve c;
            std::vector<std::pair<int, int>> stack{{y, x}};
            seen.set(y, x, true);
            while (!stack.empty()) {
                const auto [cy, cx] = stack.back();
                stack.pop_back();
                c.pixels.emplace_back(cy, cx);
                for (int k = 0; k < 8; ++k) {
                    const int ny = cy + kDy[k], nx = cx + kDx[k];
                    if (on(curves, ny, nx) && !seen(ny, nx)) {
                        seen.set(ny, nx, true);
                        stack.emplace_back(ny, nx);
                    }
                }
            }
            std::vector<bool> cols(w, false);
            for (auto [py, px] : c.pixels) {
                cols[px] = true;
                c.mean_row += py;
            }
            c.mean_row /= static_cast<double>(c.pixels.size());
            c.span = static_cast<int>(std::count(cols.begin(), cols.end(), true));
            found.push_back(std::move(c));
        }
    std::erase_if(found, [&](const Curve& c) { return c.span < 0.2 * w; });
    if (found.size() < 2) throw InsufficientStructureError("fewer than two layer curves spanning 20% of the width");
    std::sort(found.begin(), found.end(), [](const Curve& a, const Curve& b) {
        return a.span != b.span ? a.span > b.span : a.mean_row < b.mean_row;
    });
    found.resize(2);
    if (found[0].mean_row > found[1].mean_row) std::swap(found[0], found[1]);

    LayerSkeleton s;
    s.width = w;
    s.skeleton = Mask(h, w);
    auto rows = [&](const Curve& c) {
        std::vector<double> sum(w, 0.0);
        std::vector<int> n(w, 0);
        for (auto [py, px] : c.pixels) {
            sum[px] += py;
            ++n[px];
            s.skeleton.set(py, px, true);
        }
        std::vector<std::optional<double>> out(w);
        for (int x = 0; x < w; ++x)
            if (n[x]) out[x] = sum[x] / n[x];
        return out;
    };
    s.ilm = rows(found[0]);
    s.rpe = rows(found[1]);
    s.thickness.resize(w);
    for (int x = 0; x < w; ++x)
        if (s.ilm[x] && s.rpe[x]) s.thickness[x] = std::max(0.0, *s.rpe[x] - *s.ilm[x]);
    return s;
}

ThicknessProfile thickness_profile(const LayerSkeleton& skel, std::optional<double> scale_um_per_px) {
    if (scale_um_per_px && !(*scale_um_per_px > 0.0)) throw ConfigError("scale must be > 0");
    ThicknessProfile p;
    const double scale = scale_um_per_px.value_or(1.0);
    if (scale_um_per_px) p.unit = "um";
    for (int x = 0; x < static_cast<int>(skel.thickness.size()); ++x) {
        if (!skel.thickness[x]) continue;
        p.columns.push_back(x);
        p.ilm_row.push_back(*skel.ilm[x]);
        p.rpe_row.push_back(*skel.rpe[x]);
        p.thickness.push_back(*skel.thickness[x] * scale);
    }
    if (!p.thickness.empty()) {
        double sum = 0.0;
        for (double t : p.thickness) sum += t;
        p.mean = sum / static_cast<double>(p.thickness.size());
        p.min = *std::min_element(p.thickness.begin(), p.thickness.end());
        p.max = *std::max_element(p.thickness.begin(), p.thickness.end());
    }
    return p;
}

void write_thickness_csv(const std::filesystem::path& path, const LayerSkeleton& skel) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.precision(10);
    out << "column_index,ilm_row,rpe_row,thickness_px\n";
    auto cell = [&](const std::optional<double>& v) {
        if (v) out << *v;
    };
    for (int x = 0; x < skel.width; ++x) {
        out << x << ',';
        cell(skel.ilm[x]);
        out << ',';
        cell(skel.rpe[x]);
        out << ',';
        cell(skel.thickness[x]);
        out << '\n';
    }
}

std::vector<ChannelScore> rank_tracker_channels(const FeatureMapSet& maps, const Image& img,
                                                const std::vector<double>& upper, const std::vector<double>& lower) {
    if (static_cast<int>(upper.size()) != img.width() || static_cast<int>(lower.size()) != img.width())
        throw ShapeError("boundary curves must have one entry per image column");
    std::vector<ChannelScore> scores;
    for (int c = 0; c < static_cast<int>(maps.maps.size()); ++c) {
        ChannelScore s{c, kInfinity};
        try {
            const auto skel = skeletonize_layers(img, resize_bilinear(maps.maps[c], img.height(), img.width()));
            double err = 0.0;
            int n = 0;
            for (int x = 0; x < img.width(); ++x) {
                if (!skel.thickness[x]) continue;
                err += 0.5 * (std::abs(*skel.ilm[x] - upper[x]) + std::abs(*skel.rpe[x] - lower[x]));
                ++n;
            }
            if (n > 0) s.boundary_error = err / n;
        } catch (const InsufficientStructureError&) {
        }
        scores.push_back(s);
    }
    std::stable_sort(scores.begin(), scores.end(),
                     [](const ChannelScore& a, const ChannelScore& b) { return a.boundary_error < b.boundary_error; });
    return scores;
}

}  // namespace hdcg
