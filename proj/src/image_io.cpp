#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "hdcg/errors.hpp"
#include "hdcg/image.hpp"

namespace hdcg {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    return f;
}

bool has_png_signature(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

RawGray read_png(const std::filesystem::path& path) {
    FilePtr file = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_read_struct(p, i, nullptr); }
    } guard{&png, &info};

    if (setjmp(png_jmpbuf(png))) throw FormatError("corrupt PNG '" + path.string() + "'");
    png_init_io(png, file.get());
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY)
        throw FormatError("'" + path.string() + "' is not a single-channel grayscale image");
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    RawGray raw;
    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.bit_depth = depth == 16 ? 16 : 8;
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<png_byte> buffer(rowbytes * raw.height);
    std::vector<png_bytep> rows(raw.height);
    for (int y = 0; y < raw.height; ++y) rows[y] = buffer.data() + rowbytes * y;
    png_read_image(png, rows.data());

    raw.samples.resize(static_cast<std::size_t>(raw.width) * raw.height);
    for (int y = 0; y < raw.height; ++y) {
        for (int x = 0; x < raw.width; ++x) {
            const png_bytep row = rows[y];
            raw.samples[static_cast<std::size_t>(y) * raw.width + x] =
                raw.bit_depth == 16 ? static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]) : row[x];
        }
    }
    return raw;
}

void silence_tiff() {
    static const bool once = [] {
        TIFFSetWarningHandler(nullptr);
        TIFFSetErrorHandler(nullptr);
        return true;
    }();
    (void)once;
}

RawGray read_tiff(const std::filesystem::path& path) {
    silence_tiff();
    std::unique_ptr<TIFF, void (*)(TIFF*)> tif(TIFFOpen(path.c_str(), "r"), [](TIFF* t) {
        if (t) TIFFClose(t);
    });
    if (!tif) throw IoError("cannot read TIFF '" + path.string() + "'");
    uint32_t w = 0, h = 0;
    uint16_t spp = 1, bps = 8;
    TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
    TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bps);
    if (spp != 1) throw FormatError("'" + path.string() + "' is not a single-channel grayscale image");
    if (bps != 8 && bps != 16) throw FormatError("unsupported TIFF bit depth " + std::to_string(bps));
    if (TIFFIsTiled(tif.get())) throw FormatError("tiled TIFF is not supported");

    RawGray raw;
    raw.width = static_cast<int>(w);
    raw.height = static_cast<int>(h);
    raw.bit_depth = bps;
    raw.samples.resize(static_cast<std::size_t>(w) * h);
    std::vector<unsigned char> line(TIFFScanlineSize(tif.get()));
    for (uint32_t y = 0; y < h; ++y) {
        if (TIFFReadScanline(tif.get(), line.data(), y) < 0) throw FormatError("corrupt TIFF scanline");
        for (uint32_t x = 0; x < w; ++x) {
            std::uint16_t v = 0;
            if (bps == 8) {
                v = line[x];
            } else {
                std::memcpy(&v, line.data() + 2 * x, 2);  // libtiff delivers host byte order
            }
            raw.samples[static_cast<std::size_t>(y) * w + x] = v;
        }
    }
    return raw;
}

}  // namespace

RawGray read_gray_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such file '" + path.string() + "'");
    if (has_png_signature(path)) return read_png(path);
    return read_tiff(path);
}

BScan load_bscan(const std::filesystem::path& path, Domain domain) {
    const RawGray raw = read_gray_file(path);
    const double maxval = raw.bit_depth == 16 ? 65535.0 : 255.0;
    Image img(raw.height, raw.width);
    auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = raw.samples[i] / maxval;
    return BScan(std::move(img), domain, path.string());
}

namespace {

void write_png(const std::filesystem::path& path, int height, int width, int color_type, int bit_depth,
               const std::vector<png_bytep>& rows) {
    FilePtr file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_write_struct(p, i); }
    } guard{&png, &info};
    if (setjmp(png_jmpbuf(png))) throw IoError("failed writing PNG '" + path.string() + "'");
    png_init_io(png, file.get());
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // Deterministic output: no timestamps or text chunks.
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
}

}  // namespace

void save_png(const std::filesystem::path& path, const Image& img, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw ConfigError("PNG bit depth must be 8 or 16");
    const int bytes = bit_depth / 8;
    const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
    std::vector<png_byte> buffer(static_cast<std::size_t>(img.height()) * img.width() * bytes);
    std::vector<png_bytep> rows(img.height());
    for (int y = 0; y < img.height(); ++y) {
        rows[y] = buffer.data() + static_cast<std::size_t>(y) * img.width() * bytes;
        for (int x = 0; x < img.width(); ++x) {
            const auto v = static_cast<unsigned>(std::lround(std::clamp(img(y, x), 0.0, 1.0) * maxval));
            if (bytes == 2) {
                rows[y][2 * x] = static_cast<png_byte>(v >> 8);
                rows[y][2 * x + 1] = static_cast<png_byte>(v & 0xff);
            } else {
                rows[y][x] = static_cast<png_byte>(v);
            }
        }
    }
    write_png(path, img.height(), img.width(), PNG_COLOR_TYPE_GRAY, bit_depth, rows);
}

void save_png_rgb(const std::filesystem::path& path, const RgbImage& img) {
    if (img.rgb.size() != static_cast<std::size_t>(img.height) * img.width * 3)
        throw ShapeError("RGB buffer size mismatch");
    std::vector<png_bytep> rows(img.height);
    auto* base = const_cast<png_byte*>(img.rgb.data());
    for (int y = 0; y < img.height; ++y) rows[y] = base + static_cast<std::size_t>(y) * img.width * 3;
    write_png(path, img.height, img.width, PNG_COLOR_TYPE_RGB, 8, rows);
}

}  // namespace hdcg
