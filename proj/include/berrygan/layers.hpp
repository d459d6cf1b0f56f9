#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "berrygan/rng.hpp"
#include "berrygan/tensor.hpp"

namespace berrygan {

// Row-major everywhere so kernel/col layouts match the flattened NCHW data.
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ParamTensor {
    std::vector<double> w;
    std::vector<double> g;

    explicit ParamTensor(std::size_t size = 0, double fill = 0.0) : w(size, fill), g(size, 0.0) {}
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

// Layers cache what their backward pass needs during a training forward, so
// the call pattern is forward(train=true) immediately followed by backward.
// Backward accumulates into the parameter gradients and returns the input
// gradient.

class Conv2d {
public:
    Conv2d(int cin, int cout, int k, int stride, int pad, Rng& rng);

    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);
    void collect_params(std::vector<ParamTensor*>& out);

    int out_size(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }
    int cin() const { return cin_; }
    int cout() const { return cout_; }

    ParamTensor weight;  // (cout, cin, k, k)
    ParamTensor bias;    // (cout)

private:
    int cin_, cout_, k_, stride_, pad_;
    int in_h_ = 0, in_w_ = 0, in_n_ = 0;
    RowMat col_;  // (cin*k*k) x (n*ho*wo)
};

class ConvTranspose2d {
public:
    ConvTranspose2d(int cin, int cout, int k, int stride, int pad, Rng& rng);

    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);
    void collect_params(std::vector<ParamTensor*>& out);

    int out_size(int in) const { return (in - 1) * stride_ - 2 * pad_ + k_; }

    ParamTensor weight;  // (cin, cout, k, k)
    ParamTensor bias;    // (cout)

private:
    int cin_, cout_, k_, stride_, pad_;
    int in_h_ = 0, in_w_ = 0, in_n_ = 0;
    RowMat x_mat_;  // (cin) x (n*hi*wi)
};

class InstanceNorm {
public:
    explicit InstanceNorm(int channels, double eps = 1e-5);

    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);
    void collect_params(std::vector<ParamTensor*>& out);

    ParamTensor gamma;
    ParamTensor beta;

private:
    int channels_;
    double eps_;
    Tensor xhat_;
    std::vector<double> invstd_;  // per (sample, channel)
};

class LeakyReLU {
public:
    explicit LeakyReLU(double slope) : slope_(slope) {}

    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);

private:
    double slope_;
    std::vector<std::uint8_t> positive_;
};

class TanhLayer {
public:
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);

private:
    Tensor y_;
};

// Nearest-neighbor 2x upsampling, for the checkerboard-free decoder variant.
class Upsample2x {
public:
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);

private:
    int in_h_ = 0, in_w_ = 0;
};

class Dropout {
public:
    Dropout(double p, Rng* rng) : p_(p), rng_(rng) {}

    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& gy);

private:
    double p_;
    Rng* rng_;
    std::vector<std::uint8_t> keep_;
    bool active_ = false;
};

}  // namespace berrygan
