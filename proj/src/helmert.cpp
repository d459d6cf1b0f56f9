#include "berrygan/helmert.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace berrygan {

double HelmertParams::a() const { return s * std::cos(theta); }
double HelmertParams::b() const { return s * std::sin(theta); }

HelmertParams HelmertParams::from_linear(double tx, double ty, double a, double b) {
    HelmertParams p;
    p.tx = tx;
    p.ty = ty;
    p.s = std::hypot(a, b);
    p.theta = std::atan2(b, a);
    return p;
}

HelmertFit estimate_helmert(const std::vector<KeypointPair>& pairs) {
    if (pairs.size() < 2) throw std::invalid_argument("helmert: need at least 2 keypoint pairs");

    const int n = static_cast<int>(pairs.size());
    Eigen::MatrixXd A(2 * n, 4);
    Eigen::VectorXd rhs(2 * n);
    for (int i = 0; i < n; ++i) {
        const KeypointPair& kp = pairs[i];
        if (!std::isfinite(kp.sx) || !std::isfinite(kp.sy) || !std::isfinite(kp.tx) || !std::isfinite(kp.ty))
            throw std::invalid_argument("helmert: non-finite keypoint");
        A.row(2 * i) << 1.0, 0.0, kp.sx, -kp.sy;
        A.row(2 * i + 1) << 0.0, 1.0, kp.sy, kp.sx;
        rhs(2 * i) = kp.tx;
        rhs(2 * i + 1) = kp.ty;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < 4)
        throw std::invalid_argument("helmert: rank-deficient system (coincident source points)");
    Eigen::Vector4d x = qr.solve(rhs);

    HelmertFit fit;
    fit.params = HelmertParams::from_linear(x(0), x(1), x(2), x(3));
    Eigen::VectorXd res = A * x - rhs;
    double sx2 = 0.0, sy2 = 0.0;
    for (int i = 0; i < n; ++i) {
        sx2 += res(2 * i) * res(2 * i);
        sy2 += res(2 * i + 1) * res(2 * i + 1);
    }
    fit.rms_x = std::sqrt(sx2 / n);
    fit.rms_y = std::sqrt(sy2 / n);
    return fit;
}

HelmertParams inverse(const HelmertParams& p) {
    double a = p.a(), b = p.b();
    double s2 = a * a + b * b;
    if (s2 <= 0.0) throw std::invalid_argument("helmert: cannot invert zero scale");
    double ai = a / s2, bi = -b / s2;
    double txi = -(ai * p.tx - bi * p.ty);
    double tyi = -(bi * p.tx + ai * p.ty);
    return HelmertParams::from_linear(txi, tyi, ai, bi);
}

namespace {

// source position for output pixel (x, y) under inverse mapping
inline void source_pos(const HelmertParams& inv, int x, int y, double& sx, double& sy) {
    sx = inv.tx + inv.a() * x - inv.b() * y;
    sy = inv.ty + inv.b() * x + inv.a() * y;
}

}  // namespace

GrayscaleImage apply_helmert(const HelmertParams& p, const GrayscaleImage& img) {
    HelmertParams inv = inverse(p);
    double ia = inv.a(), ib = inv.b();
    GrayscaleImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double sx = inv.tx + ia * x - ib * y;
            double sy = inv.ty + ib * x + ia * y;
            int x0 = static_cast<int>(std::floor(sx));
            int y0 = static_cast<int>(std::floor(sy));
            double fx = sx - x0, fy = sy - y0;
            double acc = 0.0;
            for (int dy = 0; dy <= 1; ++dy) {
                for (int dx = 0; dx <= 1; ++dx) {
                    double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
                    if (wgt == 0.0) continue;
                    int xs = x0 + dx, ys = y0 + dy;
                    double v = img.in_bounds(xs, ys) ? img.at(xs, ys) : 0.0;
                    acc += wgt * v;
                }
            }
            out.at(x, y) = static_cast<std::uint8_t>(std::lround(std::min(std::max(acc, 0.0), 255.0)));
        }
    }
    return out;
}

BerryMask apply_helmert(const HelmertParams& p, const BerryMask& mask) {
    HelmertParams inv = inverse(p);
    double ia = inv.a(), ib = inv.b();
    BerryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            double sx = inv.tx + ia * x - ib * y;
            double sy = inv.ty + ib * x + ia * y;
            int xs = static_cast<int>(std::lround(sx));
            int ys = static_cast<int>(std::lround(sy));
            out.at(x, y) = mask.in_bounds(xs, ys) ? mask.at(xs, ys) : kBackground;
        }
    }
    return out;
}

std::vector<ExtractedPatch> extract_patches(const GrayscaleImage& img, const BerryMask& mask,
                                            int window, int stride) {
    if (window <= 0 || stride <= 0) throw std::invalid_argument("extract: window and stride must be positive");
    if (img.width != mask.width || img.height != mask.height)
        throw std::invalid_argument("extract: image/mask size mismatch");
    if (img.width < window || img.height < window)
        throw std::invalid_argument("extract: image smaller than the window");

    std::vector<ExtractedPatch> patches;
    for (int oy = 0; oy + window <= img.height; oy += stride) {
        for (int ox = 0; ox + window <= img.width; ox += stride) {
            ExtractedPatch p;
            p.origin_x = ox;
            p.origin_y = oy;
            p.image = GrayscaleImage(window, window);
            p.mask = BerryMask(window, window);
            for (int y = 0; y < window; ++y) {
                for (int x = 0; x < window; ++x) {
                    p.image.at(x, y) = img.at(ox + x, oy + y);
                    p.mask.at(x, y) = mask.at(ox + x, oy + y);
                }
            }
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

namespace {

template <typename GridT>
GridT resize_nearest_impl(const GridT& src, int target) {
    if (src.width != src.height) throw std::invalid_argument("resize: patch must be square");
    if (target <= 0) throw std::invalid_argument("resize: bad target size");
    if (src.width == target) return src;
    GridT out(target, target);
    for (int y = 0; y < target; ++y) {
        int ys = static_cast<int>(static_cast<std::int64_t>(y) * src.height / target);
        for (int x = 0; x < target; ++x) {
            int xs = static_cast<int>(static_cast<std::int64_t>(x) * src.width / target);
            out.at(x, y) = src.at(xs, ys);
        }
    }
    return out;
}

}  // namespace

GrayscaleImage resize_nearest(const GrayscaleImage& img, int target) {
    return resize_nearest_impl(img, target);
}

BerryMask resize_nearest(const BerryMask& mask, int target) {
    return resize_nearest_impl(mask, target);
}

}  // namespace berrygan
