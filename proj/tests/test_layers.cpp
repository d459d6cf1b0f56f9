#include <doctest.h>

#include <cmath>
#include <functional>

#include "berrygan/layers.hpp"

using namespace berrygan;

namespace {

Tensor random_tensor(int n, int c, int h, int w, Rng& rng) {
    Tensor t(n, c, h, w);
    for (auto& v : t.v) v = rng.uniform_real(-1.0, 1.0);
    return t;
}

// L(x) = sum(coef * layer(x)); analytic gradients come from backward(coef).
struct FdCheck {
    std::function<Tensor(const Tensor&)> forward;   // must cache for backward
    std::function<Tensor(const Tensor&)> backward;  // takes dL/dy = coef
};

double rel_err(double got, double want) {
    double denom = std::max({std::abs(got), std::abs(want), 1e-8});
    return std::abs(got - want) / denom;
}

// Central finite difference of L with respect to one scalar slot.
double fd_slot(const std::function<double()>& loss, double* slot, double h = 1e-5) {
    double keep = *slot;
    *slot = keep + h;
    double up = loss();
    *slot = keep - h;
    double down = loss();
    *slot = keep;
    return (up - down) / (2.0 * h);
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

// Checks input gradient plus any collected parameter gradients of one layer.
template <typename Layer>
void check_layer_gradients(Layer& layer, Tensor x, Rng& rng, double tol = 2e-4) {
    Tensor y0 = layer.forward(x, true);
    Tensor coef = random_tensor(y0.n, y0.c, y0.h, y0.w, rng);

    auto loss = [&] { return dot(layer.forward(x, true), coef); };

    layer.forward(x, true);
    Tensor gx = layer.backward(coef);
    REQUIRE(gx.same_shape(x));

    for (int probe = 0; probe < 12; ++probe) {
        std::size_t i = rng.next_u32() % x.v.size();
        double fd = fd_slot(loss, &x.v[i]);
        CHECK(rel_err(gx.v[i], fd) < tol);
    }

    std::vector<ParamTensor*> params;
    if constexpr (requires { layer.collect_params(params); }) {
        layer.collect_params(params);
        for (ParamTensor* p : params) {
            for (double& g : p->g) g = 0.0;
        }
        layer.forward(x, true);
        layer.backward(coef);
        for (ParamTensor* p : params) {
            for (int probe = 0; probe < 6; ++probe) {
                std::size_t i = rng.next_u32() % p->w.size();
                double fd = fd_slot(loss, &p->w[i]);
                CHECK(rel_err(p->g[i], fd) < tol);
            }
        }
    }
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("convolution gradients match finite differences") {
    Rng rng(31, 0);
    Conv2d conv(3, 4, 4, 2, 1, rng);
    check_layer_gradients(conv, random_tensor(2, 3, 8, 8, rng), rng);
    CHECK(conv.out_size(8) == 4);
    CHECK(conv.out_size(64) == 32);
}

TEST_CASE("stride-1 convolution gradients match finite differences") {
    Rng rng(32, 0);
    Conv2d conv(2, 3, 3, 1, 1, rng);
    check_layer_gradients(conv, random_tensor(1, 2, 6, 6, rng), rng);
    CHECK(conv.out_size(6) == 6);
}

TEST_CASE("transposed convolution gradients match finite differences") {
    Rng rng(33, 0);
    ConvTranspose2d tconv(4, 3, 4, 2, 1, rng);
    check_layer_gradients(tconv, random_tensor(2, 4, 5, 5, rng), rng);
    CHECK(tconv.out_size(5) == 10);
    CHECK(tconv.out_size(32) == 64);
}

TEST_CASE("instance norm gradients match finite differences") {
    Rng rng(34, 0);
    InstanceNorm norm(3);
    check_layer_gradients(norm, random_tensor(2, 3, 6, 6, rng), rng);
}

TEST_CASE("instance norm standardizes each sample channel") {
    Rng rng(35, 0);
    InstanceNorm norm(2);
    Tensor x = random_tensor(3, 2, 7, 7, rng);
    Tensor y = norm.forward(x, false);
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 2; ++c) {
            double mean = 0.0, var = 0.0;
            for (int p = 0; p < 49; ++p) mean += y.at(i, c, p / 7, p % 7);
            mean /= 49.0;
            for (int p = 0; p < 49; ++p) {
                double d = y.at(i, c, p / 7, p % 7) - mean;
                var += d * d;
            }
            var /= 49.0;
            CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
            CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
        }
}

TEST_CASE("activation gradients match finite differences") {
    Rng rng(36, 0);
    LeakyReLU lrelu(0.2);
    check_layer_gradients(lrelu, random_tensor(2, 3, 5, 5, rng), rng);
    TanhLayer tanh_layer;
    check_layer_gradients(tanh_layer, random_tensor(2, 3, 5, 5, rng), rng);
}

TEST_CASE("leaky relu slope applies only below zero") {
    LeakyReLU lrelu(0.2);
    Tensor x(1, 1, 1, 2);
    x.v = {2.0, -2.0};
    Tensor y = lrelu.forward(x, false);
    CHECK(y.v[0] == doctest::Approx(2.0));
    CHECK(y.v[1] == doctest::Approx(-0.4));
}

TEST_CASE("upsampling doubles spatially and routes gradients back") {
    Rng rng(37, 0);
    Upsample2x up;
    Tensor x = random_tensor(1, 2, 3, 3, rng);
    Tensor y = up.forward(x, true);
    CHECK(y.h == 6);
    CHECK(y.w == 6);
    for (int yy = 0; yy < 6; ++yy)
        for (int xx = 0; xx < 6; ++xx)
            CHECK(y.at(0, 1, yy, xx) == x.at(0, 1, yy / 2, xx / 2));
    check_layer_gradients(up, random_tensor(1, 2, 3, 3, rng), rng);
}

TEST_CASE("dropout is identity when inactive and rescales when active") {
    Rng rng(38, 0);
    Dropout off(0.0, &rng);
    Tensor x = random_tensor(1, 1, 4, 4, rng);
    CHECK(off.forward(x, true).v == x.v);

    Dropout half(0.5, &rng);
    CHECK(half.forward(x, false).v == x.v);  // eval mode passes through
    Tensor y = half.forward(x, true);
    int zeros = 0;
    for (std::size_t i = 0; i < y.v.size(); ++i) {
        if (y.v[i] == 0.0) {
            ++zeros;
        } else {
            CHECK(y.v[i] == doctest::Approx(x.v[i] * 2.0));
        }
    }
    CHECK(zeros > 0);
    CHECK(zeros < int(y.v.size()));
}

TEST_CASE("tensor helpers stack, concatenate and slice consistently") {
    NormalizedTensor a(2, 3, 3), b(2, 3, 3);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        a.values[i] = double(i);
        b.values[i] = double(i) + 100.0;
    }
    Tensor batch = stack_batch({a, b});
    CHECK(batch.n == 2);
    CHECK(batch.c == 2);
    CHECK(batch.at(1, 0, 0, 0) == 100.0);

    Tensor joined = concat_channels(batch, batch);
    CHECK(joined.c == 4);
    CHECK(joined.at(0, 2, 1, 1) == batch.at(0, 0, 1, 1));

    Tensor back = slice_channels(joined, 2, 2);
    CHECK(back.v == batch.v);

    NormalizedTensor chw = to_chw(batch, 1);
    CHECK(chw.values == b.values);
}

}  // TEST_SUITE
