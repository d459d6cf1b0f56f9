#pragma once

#include <vector>

#include "berrygan/image.hpp"

namespace berrygan {

// 4-parameter similarity transform: x' = tx + a*x - b*y, y' = ty + b*x + a*y
// with a = s*cos(theta), b = s*sin(theta).
struct HelmertParams {
    double tx = 0.0;
    double ty = 0.0;
    double s = 1.0;
    double theta = 0.0;

    double a() const;
    double b() const;
    static HelmertParams from_linear(double tx, double ty, double a, double b);
};

struct KeypointPair {
    double sx = 0.0;
    double sy = 0.0;
    double tx = 0.0;
    double ty = 0.0;
};

struct HelmertFit {
    HelmertParams params;
    double rms_x = 0.0;
    double rms_y = 0.0;
};

// Least-squares fit over >= 2 non-coincident pairs. Throws on fewer pairs or
// a rank-deficient system (all sources coincident).
HelmertFit estimate_helmert(const std::vector<KeypointPair>& pairs);

HelmertParams inverse(const HelmertParams& p);

// Inverse-mapped resampling: bilinear for grayscale, nearest-neighbor for
// masks so class encodings survive. Source samples outside the image are 0.
GrayscaleImage apply_helmert(const HelmertParams& p, const GrayscaleImage& img);
BerryMask apply_helmert(const HelmertParams& p, const BerryMask& mask);

struct ExtractedPatch {
    GrayscaleImage image;
    BerryMask mask;
    int origin_x = 0;
    int origin_y = 0;
};

// Sliding square windows; partial windows at the far edges are dropped.
std::vector<ExtractedPatch> extract_patches(const GrayscaleImage& img, const BerryMask& mask,
                                            int window = 656, int stride = 162);

// Nearest-neighbor to target x target with source index floor(i*src/dst).
GrayscaleImage resize_nearest(const GrayscaleImage& img, int target);
BerryMask resize_nearest(const BerryMask& mask, int target);

}  // namespace berrygan
