#pragma once

#include <cstddef>
#include <vector>

#include "berrygan/image.hpp"

namespace berrygan {

// Batched NCHW tensor of doubles. Double precision keeps the finite
// difference gradient checks honest and Eigen's double GEMM is fast enough
// at this scale.
struct Tensor {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {}

    std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
    std::size_t size() const { return v.size(); }

    double at(int i, int ci, int y, int x) const {
        return v[((static_cast<std::size_t>(i) * c + ci) * h + y) * w + x];
    }
    double& at(int i, int ci, int y, int x) {
        return v[((static_cast<std::size_t>(i) * c + ci) * h + y) * w + x];
    }

    double* sample(int i) { return v.data() + static_cast<std::size_t>(i) * sample_size(); }
    const double* sample(int i) const { return v.data() + static_cast<std::size_t>(i) * sample_size(); }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

// Stack single-sample CHW tensors into one batch; all shapes must agree.
Tensor stack_batch(const std::vector<NormalizedTensor>& samples);

// Concatenate along channels; n/h/w must agree.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Channels [c0, c0+count) of every sample.
Tensor slice_channels(const Tensor& t, int c0, int count);

NormalizedTensor to_chw(const Tensor& t, int sample_index);

}  // namespace berrygan
