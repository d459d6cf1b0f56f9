#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace berrygan {

// Semantic classes of a berry mask and their fixed on-disk encodings.
enum class MaskClass : std::uint8_t {
    Background = 0,
    BerryEdge = 127,
    Berry = 255,
};

inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kBerryEdge = 127;
inline constexpr std::uint8_t kBerry = 255;

inline bool is_mask_value(std::uint8_t v) {
    return v == kBackground || v == kBerryEdge || v == kBerry;
}

// Compact class index 0/1/2 used for confusion-style tables.
inline int mask_class_index(std::uint8_t v) {
    switch (v) {
        case kBackground: return 0;
        case kBerryEdge: return 1;
        case kBerry: return 2;
        default: throw std::invalid_argument("not a mask value: " + std::to_string(int(v)));
    }
}

inline std::uint8_t mask_class_value(int index) {
    static constexpr std::uint8_t values[3] = {kBackground, kBerryEdge, kBerry};
    if (index < 0 || index > 2) throw std::invalid_argument("mask class index out of range");
    return values[index];
}

namespace detail {

// Row-major 8-bit grid shared by the image and mask value types below.
struct Grid8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Grid8() = default;
    Grid8(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
        if (w <= 0 || h <= 0) throw std::invalid_argument("grid dimensions must be positive");
        pixels.assign(static_cast<std::size_t>(w) * h, fill);
    }

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    std::size_t size() const { return pixels.size(); }

    bool operator==(const Grid8&) const = default;
};

}  // namespace detail

// Luminance grid; the L channel of both domains.
struct GrayscaleImage : detail::Grid8 {
    using Grid8::Grid8;
};

// Network output before quantization; unconstrained 8-bit values.
struct RawMask : detail::Grid8 {
    using Grid8::Grid8;
};

// 3-class semantic grid. Every pixel must be one of {0, 127, 255}.
struct BerryMask : detail::Grid8 {
    using Grid8::Grid8;

    bool is_quantized() const {
        for (std::uint8_t v : pixels)
            if (!is_mask_value(v)) return false;
        return true;
    }
};

// Boolean occluder footprint in patch coordinates.
struct Footprint {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // 0 or 1

    Footprint() = default;
    Footprint(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
        if (w <= 0 || h <= 0) throw std::invalid_argument("footprint dimensions must be positive");
        bits.assign(static_cast<std::size_t>(w) * h, fill);
    }

    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits) n += b;
        return n;
    }

    bool operator==(const Footprint&) const = default;
};

// Real-valued CHW grid in [-1, 1]; what the network consumes and emits.
struct NormalizedTensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values;

    NormalizedTensor() = default;
    NormalizedTensor(int c, int h, int w)
        : channels(c), height(h), width(w), values(static_cast<std::size_t>(c) * h * w, 0.0) {}

    double at(int c, int y, int x) const {
        return values[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double& at(int c, int y, int x) {
        return values[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
};

// v -> v/127.5 - 1, into a single-channel tensor.
NormalizedTensor normalize(const GrayscaleImage& img);
NormalizedTensor normalize(const BerryMask& mask);

// Round-half-away-from-zero of (v+1)*127.5, clamped to [0,255].
std::uint8_t denormalize_value(double v);
GrayscaleImage denormalize_image(const NormalizedTensor& t, int channel = 0);
RawMask denormalize_mask(const NormalizedTensor& t, int channel = 0);

// Threshold a raw network output onto the three classes:
// [0,50] -> background, (50,180] -> berry-edge, (180,255] -> berry.
std::uint8_t quantize_value(std::uint8_t v);
BerryMask quantize_mask(const RawMask& raw);

}  // namespace berrygan
