#include "berrygan/nets.hpp"

#include <algorithm>
#include <stdexcept>

namespace berrygan {

namespace {

int stage_channels(int base, int level, int cap) {
    long long ch = static_cast<long long>(base) << level;
    return static_cast<int>(std::min<long long>(ch, cap));
}

}  // namespace

UNetGenerator::UNetGenerator(const GeneratorConfig& cfg, Rng& rng)
    : cfg_(cfg), dropout_rng_(rng.split(0x6472)) {
    if (cfg.depth < 2) throw std::invalid_argument("generator: depth must be at least 2");
    if (cfg.in_channels < 1 || cfg.base_channels < 1 || cfg.max_channels < cfg.base_channels)
        throw std::invalid_argument("generator: bad channel config");

    int d = cfg.depth;
    auto ch = [&](int level) { return stage_channels(cfg.base_channels, level, cfg.max_channels); };
    enc_convs_.reserve(d);
    enc_acts_.reserve(d);
    for (int i = 0; i < d; ++i) {
        int cin = i == 0 ? cfg.in_channels : ch(i - 1);
        int cout = ch(i);
        enc_convs_.emplace_back(cin, cout, 4, 2, 1, rng);
        if (i > 0) enc_norms_.emplace_back(cout);
        enc_acts_.emplace_back(0.2);
    }

    for (int i = 0; i < d; ++i) {
        // stage input: bottleneck for i = 0, else previous output + skip
        int up_ch = i == 0 ? ch(d - 1) : ch(d - 1 - i) * 2;
        int cout = i == d - 1 ? cfg.in_channels : ch(d - 2 - i);
        if (cfg.upsample_conv) {
            dec_ups_.emplace_back();
            dec_convs_.emplace_back(up_ch, cout, 3, 1, 1, rng);
        } else {
            dec_tconvs_.emplace_back(up_ch, cout, 4, 2, 1, rng);
        }
        if (i < d - 1) {
            dec_norms_.emplace_back(cout);
            dec_acts_.emplace_back(0.0);  // plain ReLU on the decoder side
            dec_drops_.emplace_back(i < 3 ? cfg.dropout : 0.0, &dropout_rng_);
        }
    }
}

Tensor UNetGenerator::forward(const Tensor& x, bool train) {
    if (x.c != cfg_.in_channels) throw std::invalid_argument("generator: channel mismatch");
    int div = 1 << cfg_.depth;
    if (x.h % div != 0 || x.w % div != 0 || x.h < div || x.w < div)
        throw std::invalid_argument("generator: spatial size must be divisible by 2^depth");

    int d = cfg_.depth;
    enc_out_.assign(d, Tensor());
    concat_up_ch_.assign(d, 0);

    Tensor t = x;
    for (int i = 0; i < d; ++i) {
        t = enc_convs_[i].forward(t, train);
        if (i > 0) t = enc_norms_[i - 1].forward(t, train);
        t = enc_acts_[i].forward(t, train);
        enc_out_[i] = t;
    }

    for (int i = 0; i < d; ++i) {
        if (i > 0) {
            concat_up_ch_[i] = t.c;
            t = concat_channels(t, enc_out_[d - 1 - i]);
        }
        if (cfg_.upsample_conv) {
            t = dec_ups_[i].forward(t, train);
            t = dec_convs_[i].forward(t, train);
        } else {
            t = dec_tconvs_[i].forward(t, train);
        }
        if (i < d - 1) {
            t = dec_norms_[i].forward(t, train);
            t = dec_drops_[i].forward(t, train);
            t = dec_acts_[i].forward(t, train);
        } else {
            t = tanh_.forward(t, train);
        }
    }
    if (!train) {
        enc_out_.clear();
    }
    return t;
}

Tensor UNetGenerator::backward(const Tensor& gy) {
    int d = cfg_.depth;
    std::vector<Tensor> skip_grad(d);

    Tensor g = gy;
    for (int i = d - 1; i >= 0; --i) {
        if (i < d - 1) {
            g = dec_acts_[i].backward(g);
            g = dec_drops_[i].backward(g);
            g = dec_norms_[i].backward(g);
        } else {
            g = tanh_.backward(g);
        }
        if (cfg_.upsample_conv) {
            g = dec_convs_[i].backward(g);
            g = dec_ups_[i].backward(g);
        } else {
            g = dec_tconvs_[i].backward(g);
        }
        if (i > 0) {
            int up_ch = concat_up_ch_[i];
            skip_grad[d - 1 - i] = slice_channels(g, up_ch, g.c - up_ch);
            g = slice_channels(g, 0, up_ch);
        }
    }

    for (int i = d - 1; i >= 0; --i) {
        if (skip_grad[i].n > 0) {
            for (std::size_t t = 0; t < g.v.size(); ++t) g.v[t] += skip_grad[i].v[t];
        }
        g = enc_acts_[i].backward(g);
        if (i > 0) g = enc_norms_[i - 1].backward(g);
        g = enc_convs_[i].backward(g);
    }
    return g;
}

std::vector<ParamTensor*> UNetGenerator::params() {
    std::vector<ParamTensor*> out;
    for (auto& l : enc_convs_) l.collect_params(out);
    for (auto& l : enc_norms_) l.collect_params(out);
    for (auto& l : dec_tconvs_) l.collect_params(out);
    for (auto& l : dec_convs_) l.collect_params(out);
    for (auto& l : dec_norms_) l.collect_params(out);
    return out;
}

PatchDiscriminator::PatchDiscriminator(const DiscriminatorConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.stride2_layers < 1) throw std::invalid_argument("discriminator: need a stride-2 layer");
    auto grow = [&](int c) { return std::min(c * 2, cfg.max_channels); };
    int ch = std::min(cfg.base_channels, cfg.max_channels);
    convs_.emplace_back(cfg.in_channels, ch, 4, 2, 1, rng);
    acts_.emplace_back(0.2);
    for (int i = 1; i < cfg.stride2_layers; ++i) {
        convs_.emplace_back(ch, grow(ch), 4, 2, 1, rng);
        ch = grow(ch);
        norms_.emplace_back(ch);
        acts_.emplace_back(0.2);
    }
    convs_.emplace_back(ch, grow(ch), 4, 1, 1, rng);
    norms_.emplace_back(grow(ch));
    acts_.emplace_back(0.2);
    convs_.emplace_back(grow(ch), 1, 4, 1, 1, rng);
}

Tensor PatchDiscriminator::forward(const Tensor& x, bool train) {
    if (x.c != cfg_.in_channels) throw std::invalid_argument("discriminator: channel mismatch");
    Tensor t = x;
    std::size_t ni = 0;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        t = convs_[i].forward(t, train);
        if (i + 1 < convs_.size()) {
            if (i > 0) t = norms_[ni++].forward(t, train);
            t = acts_[i].forward(t, train);
        }
    }
    if (t.h >= x.h || t.w >= x.w) throw std::logic_error("discriminator: score grid not smaller than input");
    return t;
}

Tensor PatchDiscriminator::backward(const Tensor& gy) {
    Tensor g = gy;
    std::size_t ni = norms_.size();
    for (std::size_t i = convs_.size(); i-- > 0;) {
        if (i + 1 < convs_.size()) {
            g = acts_[i].backward(g);
            if (i > 0) g = norms_[--ni].backward(g);
        }
        g = convs_[i].backward(g);
    }
    return g;
}

std::vector<ParamTensor*> PatchDiscriminator::params() {
    std::vector<ParamTensor*> out;
    for (auto& l : convs_) l.collect_params(out);
    for (auto& l : norms_) l.collect_params(out);
    return out;
}

}  // namespace berrygan
