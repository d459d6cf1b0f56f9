#include "berrygan/image.hpp"

#include <cmath>

namespace berrygan {

namespace {

NormalizedTensor normalize_grid(const detail::Grid8& g) {
    NormalizedTensor t(1, g.height, g.width);
    for (std::size_t i = 0; i < g.pixels.size(); ++i)
        t.values[i] = g.pixels[i] / 127.5 - 1.0;
    return t;
}

template <typename GridT>
GridT denormalize_grid(const NormalizedTensor& t, int channel) {
    if (channel < 0 || channel >= t.channels)
        throw std::invalid_argument("denormalize: channel out of range");
    GridT g(t.width, t.height);
    const std::size_t plane = static_cast<std::size_t>(t.height) * t.width;
    const double* src = t.values.data() + plane * channel;
    for (std::size_t i = 0; i < plane; ++i) g.pixels[i] = denormalize_value(src[i]);
    return g;
}

}  // namespace

NormalizedTensor normalize(const GrayscaleImage& img) { return normalize_grid(img); }
NormalizedTensor normalize(const BerryMask& mask) { return normalize_grid(mask); }

std::uint8_t denormalize_value(double v) {
    if (v < -1.0) v = -1.0;
    if (v > 1.0) v = 1.0;
    double scaled = (v + 1.0) * 127.5;
    long r = std::lround(scaled);  // rounds halfway cases away from zero
    if (r < 0) r = 0;
    if (r > 255) r = 255;
    return static_cast<std::uint8_t>(r);
}

GrayscaleImage denormalize_image(const NormalizedTensor& t, int channel) {
    return denormalize_grid<GrayscaleImage>(t, channel);
}

RawMask denormalize_mask(const NormalizedTensor& t, int channel) {
    return denormalize_grid<RawMask>(t, channel);
}

std::uint8_t quantize_value(std::uint8_t v) {
    if (v <= 50) return kBackground;
    if (v <= 180) return kBerryEdge;
    return kBerry;
}

BerryMask quantize_mask(const RawMask& raw) {
    BerryMask out(raw.width, raw.height);
    for (std::size_t i = 0; i < raw.pixels.size(); ++i)
        out.pixels[i] = quantize_value(raw.pixels[i]);
    return out;
}

}  // namespace berrygan
