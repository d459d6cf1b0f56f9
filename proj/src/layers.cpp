#include "berrygan/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace berrygan {
namespace {

// One sample. col is (c*k*k) x (ho*wo) row-major; row r = (ci*k + ky)*k + kx.
void im2col(const double* x, int c, int h, int w, int k, int s, int p, int ho, int wo,
            double* col, std::size_t ld) {
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                std::size_t r = (static_cast<std::size_t>(ci) * k + ky) * k + kx;
                double* row = col + r * ld;
                for (int oy = 0; oy < ho; ++oy) {
                    int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= h) {
                        std::fill(row + static_cast<std::size_t>(oy) * wo,
                                  row + static_cast<std::size_t>(oy) * wo + wo, 0.0);
                        continue;
                    }
                    const double* src = x + (static_cast<std::size_t>(ci) * h + iy) * w;
                    double* dst = row + static_cast<std::size_t>(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        int ix = ox * s - p + kx;
                        dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

// Scatter-add the col representation back onto one sample image.
void col2im_add(const double* col, std::size_t ld, int c, int h, int w, int k, int s, int p,
                int ho, int wo, double* x) {
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                std::size_t r = (static_cast<std::size_t>(ci) * k + ky) * k + kx;
                const double* row = col + r * ld;
                for (int oy = 0; oy < ho; ++oy) {
                    int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= h) continue;
                    double* dst = x + (static_cast<std::size_t>(ci) * h + iy) * w;
                    const double* src = row + static_cast<std::size_t>(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        int ix = ox * s - p + kx;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

void init_normal(std::vector<double>& w, Rng& rng, double stddev) {
    for (double& v : w) v = rng.normal(0.0, stddev);
}

}  // namespace

Conv2d::Conv2d(int cin, int cout, int k, int stride, int pad, Rng& rng)
    : weight(static_cast<std::size_t>(cout) * cin * k * k),
      bias(static_cast<std::size_t>(cout)),
      cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad) {
    init_normal(weight.w, rng, 0.02);
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
    if (x.c != cin_) throw std::invalid_argument("conv: channel mismatch");
    int ho = out_size(x.h), wo = out_size(x.w);
    if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv: output would be empty");
    in_h_ = x.h;
    in_w_ = x.w;
    in_n_ = x.n;
    std::size_t howo = static_cast<std::size_t>(ho) * wo;
    std::size_t rows = static_cast<std::size_t>(cin_) * k_ * k_;
    RowMat col(rows, static_cast<std::size_t>(x.n) * howo);
    for (int i = 0; i < x.n; ++i)
        im2col(x.sample(i), cin_, x.h, x.w, k_, stride_, pad_, ho, wo,
               col.data() + static_cast<std::size_t>(i) * howo, col.cols());

    Eigen::Map<const RowMat> W(weight.w.data(), cout_, rows);
    RowMat Y = W * col;

    Tensor y(x.n, cout_, ho, wo);
    for (int i = 0; i < x.n; ++i) {
        double* ys = y.sample(i);
        for (int c = 0; c < cout_; ++c) {
            const double* src = Y.data() + static_cast<std::size_t>(c) * Y.cols() + static_cast<std::size_t>(i) * howo;
            double* dst = ys + static_cast<std::size_t>(c) * howo;
            double b = bias.w[c];
            for (std::size_t t = 0; t < howo; ++t) dst[t] = src[t] + b;
        }
    }
    if (train) col_ = std::move(col);
    return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
    int ho = gy.h, wo = gy.w;
    std::size_t howo = static_cast<std::size_t>(ho) * wo;
    std::size_t rows = static_cast<std::size_t>(cin_) * k_ * k_;

    // regroup gy into (cout) x (n*ho*wo)
    RowMat dY(cout_, static_cast<std::size_t>(gy.n) * howo);
    for (int i = 0; i < gy.n; ++i) {
        const double* gs = gy.sample(i);
        for (int c = 0; c < cout_; ++c) {
            double* dst = dY.data() + static_cast<std::size_t>(c) * dY.cols() + static_cast<std::size_t>(i) * howo;
            const double* src = gs + static_cast<std::size_t>(c) * howo;
            std::copy(src, src + howo, dst);
        }
    }

    Eigen::Map<RowMat> dW(weight.g.data(), cout_, rows);
    dW.noalias() += dY * col_.transpose();
    for (int c = 0; c < cout_; ++c) bias.g[c] += dY.row(c).sum();

    Eigen::Map<const RowMat> W(weight.w.data(), cout_, rows);
    RowMat dcol = W.transpose() * dY;

    Tensor gx(gy.n, cin_, in_h_, in_w_);
    for (int i = 0; i < gy.n; ++i)
        col2im_add(dcol.data() + static_cast<std::size_t>(i) * howo, dcol.cols(), cin_, in_h_, in_w_,
                   k_, stride_, pad_, ho, wo, gx.sample(i));
    col_.resize(0, 0);
    return gx;
}

void Conv2d::collect_params(std::vector<ParamTensor*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

ConvTranspose2d::ConvTranspose2d(int cin, int cout, int k, int stride, int pad, Rng& rng)
    : weight(static_cast<std::size_t>(cin) * cout * k * k),
      bias(static_cast<std::size_t>(cout)),
      cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad) {
    init_normal(weight.w, rng, 0.02);
}

Tensor ConvTranspose2d::forward(const Tensor& x, bool train) {
    if (x.c != cin_) throw std::invalid_argument("tconv: channel mismatch");
    int ho = out_size(x.h), wo = out_size(x.w);
    if (ho <= 0 || wo <= 0) throw std::invalid_argument("tconv: output would be empty");
    in_h_ = x.h;
    in_w_ = x.w;
    in_n_ = x.n;
    std::size_t hiwi = static_cast<std::size_t>(x.h) * x.w;

    RowMat X(cin_, static_cast<std::size_t>(x.n) * hiwi);
    for (int i = 0; i < x.n; ++i) {
        const double* xs = x.sample(i);
        for (int c = 0; c < cin_; ++c)
            std::copy(xs + static_cast<std::size_t>(c) * hiwi, xs + static_cast<std::size_t>(c + 1) * hiwi,
                      X.data() + static_cast<std::size_t>(c) * X.cols() + static_cast<std::size_t>(i) * hiwi);
    }

    std::size_t krows = static_cast<std::size_t>(cout_) * k_ * k_;
    Eigen::Map<const RowMat> W(weight.w.data(), cin_, krows);
    RowMat col = W.transpose() * X;  // (cout*k*k) x (n*hi*wi)

    Tensor y(x.n, cout_, ho, wo);
    for (int i = 0; i < x.n; ++i)
        col2im_add(col.data() + static_cast<std::size_t>(i) * hiwi, col.cols(), cout_, ho, wo, k_,
                   stride_, pad_, x.h, x.w, y.sample(i));

    std::size_t howo = static_cast<std::size_t>(ho) * wo;
    for (int i = 0; i < x.n; ++i) {
        double* ys = y.sample(i);
        for (int c = 0; c < cout_; ++c) {
            double b = bias.w[c];
            double* dst = ys + static_cast<std::size_t>(c) * howo;
            for (std::size_t t = 0; t < howo; ++t) dst[t] += b;
        }
    }
    if (train) x_mat_ = std::move(X);
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& gy) {
    int ho = gy.h, wo = gy.w;
    std::size_t hiwi = static_cast<std::size_t>(in_h_) * in_w_;
    std::size_t krows = static_cast<std::size_t>(cout_) * k_ * k_;

    RowMat dcol(krows, static_cast<std::size_t>(gy.n) * hiwi);
    for (int i = 0; i < gy.n; ++i)
        im2col(gy.sample(i), cout_, ho, wo, k_, stride_, pad_, in_h_, in_w_,
               dcol.data() + static_cast<std::size_t>(i) * hiwi, dcol.cols());

    Eigen::Map<RowMat> dW(weight.g.data(), cin_, krows);
    dW.noalias() += x_mat_ * dcol.transpose();

    std::size_t howo = static_cast<std::size_t>(ho) * wo;
    for (int i = 0; i < gy.n; ++i) {
        const double* gs = gy.sample(i);
        for (int c = 0; c < cout_; ++c) {
            const double* src = gs + static_cast<std::size_t>(c) * howo;
            double acc = 0.0;
            for (std::size_t t = 0; t < howo; ++t) acc += src[t];
            bias.g[c] += acc;
        }
    }

    Eigen::Map<const RowMat> W(weight.w.data(), cin_, krows);
    RowMat dX = W * dcol;  // (cin) x (n*hi*wi)

    Tensor gx(gy.n, cin_, in_h_, in_w_);
    for (int i = 0; i < gy.n; ++i) {
        double* xs = gx.sample(i);
        for (int c = 0; c < cin_; ++c)
            std::copy(dX.data() + static_cast<std::size_t>(c) * dX.cols() + static_cast<std::size_t>(i) * hiwi,
                      dX.data() + static_cast<std::size_t>(c) * dX.cols() + static_cast<std::size_t>(i + 1) * hiwi,
                      xs + static_cast<std::size_t>(c) * hiwi);
    }
    x_mat_.resize(0, 0);
    return gx;
}

void ConvTranspose2d::collect_params(std::vector<ParamTensor*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

InstanceNorm::InstanceNorm(int channels, double eps)
    : gamma(channels, 1.0), beta(channels, 0.0), channels_(channels), eps_(eps) {}

Tensor InstanceNorm::forward(const Tensor& x, bool train) {
    if (x.c != channels_) throw std::invalid_argument("instancenorm: channel mismatch");
    std::size_t m = static_cast<std::size_t>(x.h) * x.w;
    Tensor y(x.n, x.c, x.h, x.w);
    xhat_ = Tensor(x.n, x.c, x.h, x.w);
    invstd_.assign(static_cast<std::size_t>(x.n) * x.c, 0.0);
    for (int i = 0; i < x.n; ++i) {
        for (int c = 0; c < x.c; ++c) {
            const double* src = x.sample(i) + static_cast<std::size_t>(c) * m;
            double mean = 0.0;
            for (std::size_t t = 0; t < m; ++t) mean += src[t];
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (std::size_t t = 0; t < m; ++t) {
                double d = src[t] - mean;
                var += d * d;
            }
            var /= static_cast<double>(m);
            double inv = 1.0 / std::sqrt(var + eps_);
            invstd_[static_cast<std::size_t>(i) * x.c + c] = inv;
            double g = gamma.w[c], b = beta.w[c];
            double* xh = xhat_.sample(i) + static_cast<std::size_t>(c) * m;
            double* dst = y.sample(i) + static_cast<std::size_t>(c) * m;
            for (std::size_t t = 0; t < m; ++t) {
                xh[t] = (src[t] - mean) * inv;
                dst[t] = g * xh[t] + b;
            }
        }
    }
    if (!train) {
        xhat_ = Tensor();
        invstd_.clear();
    }
    return y;
}

Tensor InstanceNorm::backward(const Tensor& gy) {
    std::size_t m = static_cast<std::size_t>(gy.h) * gy.w;
    double md = static_cast<double>(m);
    Tensor gx(gy.n, gy.c, gy.h, gy.w);
    for (int i = 0; i < gy.n; ++i) {
        for (int c = 0; c < gy.c; ++c) {
            const double* g = gy.sample(i) + static_cast<std::size_t>(c) * m;
            const double* xh = xhat_.sample(i) + static_cast<std::size_t>(c) * m;
            double inv = invstd_[static_cast<std::size_t>(i) * gy.c + c];
            double gam = gamma.w[c];
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t t = 0; t < m; ++t) {
                sum_g += g[t];
                sum_gx += g[t] * xh[t];
            }
            gamma.g[c] += sum_gx;
            beta.g[c] += sum_g;
            double* dst = gx.sample(i) + static_cast<std::size_t>(c) * m;
            for (std::size_t t = 0; t < m; ++t)
                dst[t] = gam * inv * (g[t] - sum_g / md - xh[t] * sum_gx / md);
        }
    }
    return gx;
}

void InstanceNorm::collect_params(std::vector<ParamTensor*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
}

Tensor LeakyReLU::forward(const Tensor& x, bool train) {
    Tensor y = x;
    if (train) positive_.assign(x.size(), 0);
    for (std::size_t t = 0; t < y.v.size(); ++t) {
        bool pos = y.v[t] > 0.0;
        if (!pos) y.v[t] *= slope_;
        if (train && pos) positive_[t] = 1;
    }
    return y;
}

Tensor LeakyReLU::backward(const Tensor& gy) {
    Tensor gx = gy;
    for (std::size_t t = 0; t < gx.v.size(); ++t)
        if (!positive_[t]) gx.v[t] *= slope_;
    return gx;
}

Tensor TanhLayer::forward(const Tensor& x, bool train) {
    Tensor y = x;
    for (double& v : y.v) v = std::tanh(v);
    if (train) y_ = y;
    return y;
}

Tensor TanhLayer::backward(const Tensor& gy) {
    Tensor gx = gy;
    for (std::size_t t = 0; t < gx.v.size(); ++t) gx.v[t] *= 1.0 - y_.v[t] * y_.v[t];
    return gx;
}

Tensor Upsample2x::forward(const Tensor& x, bool train) {
    (void)train;
    in_h_ = x.h;
    in_w_ = x.w;
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int i = 0; i < x.n; ++i) {
        for (int c = 0; c < x.c; ++c) {
            const double* src = x.sample(i) + static_cast<std::size_t>(c) * x.h * x.w;
            double* dst = y.sample(i) + static_cast<std::size_t>(c) * y.h * y.w;
            for (int yy = 0; yy < y.h; ++yy)
                for (int xx = 0; xx < y.w; ++xx)
                    dst[static_cast<std::size_t>(yy) * y.w + xx] =
                        src[static_cast<std::size_t>(yy / 2) * x.w + xx / 2];
        }
    }
    return y;
}

Tensor Upsample2x::backward(const Tensor& gy) {
    Tensor gx(gy.n, gy.c, in_h_, in_w_);
    for (int i = 0; i < gy.n; ++i) {
        for (int c = 0; c < gy.c; ++c) {
            const double* src = gy.sample(i) + static_cast<std::size_t>(c) * gy.h * gy.w;
            double* dst = gx.sample(i) + static_cast<std::size_t>(c) * in_h_ * in_w_;
            for (int yy = 0; yy < gy.h; ++yy)
                for (int xx = 0; xx < gy.w; ++xx)
                    dst[static_cast<std::size_t>(yy / 2) * in_w_ + xx / 2] +=
                        src[static_cast<std::size_t>(yy) * gy.w + xx];
        }
    }
    return gx;
}

Tensor Dropout::forward(const Tensor& x, bool train) {
    active_ = train && p_ > 0.0;
    if (!active_) return x;
    Tensor y = x;
    keep_.assign(x.size(), 1);
    double scale = 1.0 / (1.0 - p_);
    for (std::size_t t = 0; t < y.v.size(); ++t) {
        if (rng_->uniform_real() < p_) {
            keep_[t] = 0;
            y.v[t] = 0.0;
        } else {
            y.v[t] *= scale;
        }
    }
    return y;
}

Tensor Dropout::backward(const Tensor& gy) {
    if (!active_) return gy;
    Tensor gx = gy;
    double scale = 1.0 / (1.0 - p_);
    for (std::size_t t = 0; t < gx.v.size(); ++t) gx.v[t] = keep_[t] ? gx.v[t] * scale : 0.0;
    return gx;
}

}  // namespace berrygan
