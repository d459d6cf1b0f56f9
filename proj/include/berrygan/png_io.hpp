#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "berrygan/image.hpp"

namespace berrygan {

// All images and masks exchange as 8-bit single-channel PNG; the class
// encodings {0,127,255} are the on-disk values. Generation maps are the
// only RGB output.

void write_png_gray(const std::string& path, const detail::Grid8& grid);
void write_png_gray(const std::string& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels);
void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb);

GrayscaleImage read_png_gray(const std::string& path);
RawMask read_png_raw_mask(const std::string& path);
// Fails if the file holds anything outside {0,127,255}.
BerryMask read_png_mask(const std::string& path);

void write_png_footprint(const std::string& path, const Footprint& fp);
Footprint read_png_footprint(const std::string& path);

}  // namespace berrygan
