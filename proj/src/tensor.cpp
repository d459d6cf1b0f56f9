#include "berrygan/tensor.hpp"

#include <cstring>
#include <stdexcept>

namespace berrygan {

Tensor stack_batch(const std::vector<NormalizedTensor>& samples) {
    if (samples.empty()) throw std::invalid_argument("stack_batch: no samples");
    const NormalizedTensor& first = samples[0];
    Tensor out(static_cast<int>(samples.size()), first.channels, first.height, first.width);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const NormalizedTensor& s = samples[i];
        if (s.channels != first.channels || s.height != first.height || s.width != first.width)
            throw std::invalid_argument("stack_batch: shape mismatch");
        std::memcpy(out.sample(static_cast<int>(i)), s.values.data(), s.values.size() * sizeof(double));
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw std::invalid_argument("concat_channels: shape mismatch");
    Tensor out(a.n, a.c + b.c, a.h, a.w);
    std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
    for (int i = 0; i < a.n; ++i) {
        std::memcpy(out.sample(i), a.sample(i), a.sample_size() * sizeof(double));
        std::memcpy(out.sample(i) + a.c * plane, b.sample(i), b.sample_size() * sizeof(double));
    }
    return out;
}

Tensor slice_channels(const Tensor& t, int c0, int count) {
    if (c0 < 0 || count <= 0 || c0 + count > t.c)
        throw std::invalid_argument("slice_channels: bad channel range");
    Tensor out(t.n, count, t.h, t.w);
    std::size_t plane = static_cast<std::size_t>(t.h) * t.w;
    for (int i = 0; i < t.n; ++i)
        std::memcpy(out.sample(i), t.sample(i) + c0 * plane, out.sample_size() * sizeof(double));
    return out;
}

NormalizedTensor to_chw(const Tensor& t, int sample_index) {
    if (sample_index < 0 || sample_index >= t.n)
        throw std::invalid_argument("to_chw: sample index out of range");
    NormalizedTensor out(t.c, t.h, t.w);
    std::memcpy(out.values.data(), t.sample(sample_index), t.sample_size() * sizeof(double));
    return out;
}

}  // namespace berrygan
