#include "berrygan/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace berrygan {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const char* what) {
    throw std::runtime_error(std::string(what) + ": " + path);
}

void write_png(const std::string& path, int width, int height, int color_type,
               const std::vector<std::uint8_t>& data) {
    const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    if (width <= 0 || height <= 0 ||
        data.size() != static_cast<std::size_t>(width) * height * channels)
        fail(path, "png write: bad buffer size");

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) fail(path, "cannot open for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(path, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        fail(path, "png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(path, "png write error");
    }

    png_init_io(png, fp.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(data.data() + static_cast<std::size_t>(y) * width * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Reads any 8/16-bit gray/rgb/palette PNG down to 8-bit grayscale.
void read_png(const std::string& path, int& width, int& height, std::vector<std::uint8_t>& out) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) fail(path, "cannot open for reading");

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
        fail(path, "not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(path, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        fail(path, "png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(path, "png read error");
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    out.assign(static_cast<std::size_t>(width) * height, 0);

    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = out.data() + static_cast<std::size_t>(y) * width;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

void write_png_gray(const std::string& path, const detail::Grid8& grid) {
    write_png(path, grid.width, grid.height, PNG_COLOR_TYPE_GRAY, grid.pixels);
}

void write_png_gray(const std::string& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels) {
    write_png(path, width, height, PNG_COLOR_TYPE_GRAY, pixels);
}

void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb) {
    write_png(path, width, height, PNG_COLOR_TYPE_RGB, rgb);
}

GrayscaleImage read_png_gray(const std::string& path) {
    GrayscaleImage img;
    read_png(path, img.width, img.height, img.pixels);
    return img;
}

RawMask read_png_raw_mask(const std::string& path) {
    RawMask m;
    read_png(path, m.width, m.height, m.pixels);
    return m;
}

BerryMask read_png_mask(const std::string& path) {
    BerryMask m;
    read_png(path, m.width, m.height, m.pixels);
    if (!m.is_quantized()) fail(path, "mask holds values outside {0,127,255}");
    return m;
}

void write_png_footprint(const std::string& path, const Footprint& fp) {
    std::vector<std::uint8_t> px(fp.bits.size());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = fp.bits[i] ? 255 : 0;
    write_png(path, fp.width, fp.height, PNG_COLOR_TYPE_GRAY, px);
}

Footprint read_png_footprint(const std::string& path) {
    int w = 0, h = 0;
    std::vector<std::uint8_t> px;
    read_png(path, w, h, px);
    Footprint fp(w, h);
    for (std::size_t i = 0; i < px.size(); ++i) fp.bits[i] = px[i] >= 128 ? 1 : 0;
    return fp;
}

}  // namespace berrygan
