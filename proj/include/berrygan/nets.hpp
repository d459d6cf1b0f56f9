#pragma once

#include <vector>

#include "berrygan/layers.hpp"

namespace berrygan {

struct GeneratorConfig {
    int in_channels = 2;   // LA = 2, A = 1; output channel count matches
    int base_channels = 32;
    int depth = 4;         // stride-2 stages down and up
    int max_channels = 512;  // doubling stops here, so deep configs stay sane
    bool upsample_conv = false;  // true: nearest upsample + conv instead of tconv
    double dropout = 0.0;  // applied in the first decoder stages when > 0
};

// Encoder-decoder with skip connections. Spatial size is preserved end to
// end (inputs must be divisible by 2^depth); the final tanh keeps outputs
// in (-1, 1).
class UNetGenerator {
public:
    UNetGenerator(const GeneratorConfig& cfg, Rng& rng);
    UNetGenerator(const UNetGenerator&) = delete;
    UNetGenerator& operator=(const UNetGenerator&) = delete;

    Tensor forward(const Tensor& x, bool train = false);
    Tensor backward(const Tensor& gy);
    std::vector<ParamTensor*> params();
    const GeneratorConfig& config() const { return cfg_; }

private:
    GeneratorConfig cfg_;
    Rng dropout_rng_;
    std::vector<Conv2d> enc_convs_;
    std::vector<InstanceNorm> enc_norms_;
    std::vector<LeakyReLU> enc_acts_;
    std::vector<ConvTranspose2d> dec_tconvs_;
    std::vector<Upsample2x> dec_ups_;
    std::vector<Conv2d> dec_convs_;
    std::vector<InstanceNorm> dec_norms_;
    std::vector<LeakyReLU> dec_acts_;
    std::vector<Dropout> dec_drops_;
    TanhLayer tanh_;
    std::vector<Tensor> enc_out_;
    std::vector<int> concat_up_ch_;
};

struct DiscriminatorConfig {
    int in_channels = 4;   // condition + candidate, stacked
    int base_channels = 32;
    int stride2_layers = 2;  // the full-scale profile uses 3
    int max_channels = 512;
};

// Fully convolutional patch classifier; the score grid is strictly smaller
// than the input, so each score judges one receptive-field patch.
class PatchDiscriminator {
public:
    PatchDiscriminator(const DiscriminatorConfig& cfg, Rng& rng);
    PatchDiscriminator(const PatchDiscriminator&) = delete;
    PatchDiscriminator& operator=(const PatchDiscriminator&) = delete;

    Tensor forward(const Tensor& x, bool train = false);
    Tensor backward(const Tensor& gy);
    std::vector<ParamTensor*> params();
    const DiscriminatorConfig& config() const { return cfg_; }

private:
    DiscriminatorConfig cfg_;
    std::vector<Conv2d> convs_;
    std::vector<InstanceNorm> norms_;   // all but the first and last conv
    std::vector<LeakyReLU> acts_;
};

}  // namespace berrygan
