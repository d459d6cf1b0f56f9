#include "berrygan/gan.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace berrygan {

int input_mode_channels(InputMode mode) { return mode == InputMode::LA ? 2 : 1; }

std::string to_string(InputMode mode) { return mode == InputMode::LA ? "LA" : "A"; }

InputMode input_mode_from_string(const std::string& s) {
    if (s == "LA" || s == "la") return InputMode::LA;
    if (s == "A" || s == "a") return InputMode::A;
    throw std::invalid_argument("unknown input mode: " + s);
}

void TrainConfig::validate() const {
    if (lambda_l1 <= 0.0) throw std::invalid_argument("train config: lambda_l1 must be positive");
    if (epochs <= 0 || epochs % 2 != 0)
        throw std::invalid_argument("train config: epochs must be positive and even");
    if (depth < 2) throw std::invalid_argument("train config: depth must be at least 2");
    if (crop_size < (1 << depth) || crop_size % (1 << depth) != 0)
        throw std::invalid_argument("train config: crop_size must be divisible by 2^depth");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be positive");
    if (lr <= 0.0) throw std::invalid_argument("train config: lr must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("train config: dropout out of range");
}

double lr_at(const TrainConfig& cfg, int epoch) {
    double half = cfg.epochs / 2.0;
    if (epoch < half) return cfg.lr;
    return cfg.lr * (1.0 - (epoch - half) / half);
}

double mse_to_const(const Tensor& scores, double label) {
    double acc = 0.0;
    for (double s : scores.v) {
        double d = s - label;
        acc += d * d;
    }
    return acc / static_cast<double>(scores.v.size());
}

double discriminator_loss(const Tensor& d_real_scores, const Tensor& d_fake_scores) {
    if (!d_real_scores.same_shape(d_fake_scores))
        throw std::invalid_argument("discriminator loss: score shape mismatch");
    return 0.5 * (mse_to_const(d_fake_scores, 0.0) + mse_to_const(d_real_scores, 1.0));
}

LossParts generator_loss(const Tensor& d_fake_scores, const Tensor& target,
                         const Tensor& generated, double lambda, bool literal_label) {
    if (!target.same_shape(generated))
        throw std::invalid_argument("generator loss: target/generated shape mismatch");
    LossParts parts;
    parts.adversarial = mse_to_const(d_fake_scores, literal_label ? 0.0 : 1.0);
    double acc = 0.0;
    for (std::size_t t = 0; t < target.v.size(); ++t) acc += std::abs(target.v[t] - generated.v[t]);
    parts.l1 = acc / static_cast<double>(target.v.size());
    parts.total = parts.adversarial + lambda * parts.l1;
    return parts;
}

Adam::Adam(std::vector<ParamTensor*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), b1_(beta1), b2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (ParamTensor* p : params_) {
        m_.emplace_back(p->w.size(), 0.0);
        v_.emplace_back(p->w.size(), 0.0);
    }
}

void Adam::zero_grad() {
    for (ParamTensor* p : params_) p->zero_grad();
}

void Adam::step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        ParamTensor* p = params_[i];
        std::vector<double>& m = m_[i];
        std::vector<double>& v = v_[i];
        for (std::size_t j = 0; j < p->w.size(); ++j) {
            double g = p->g[j];
            m[j] = b1_ * m[j] + (1.0 - b1_) * g;
            v[j] = b2_ * v[j] + (1.0 - b2_) * g * g;
            p->w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
        }
    }
}

GanModel make_model(const TrainConfig& cfg) {
    cfg.validate();
    GanModel m;
    m.cfg = cfg;
    Rng rng(cfg.seed, 31);
    GeneratorConfig g;
    g.in_channels = input_mode_channels(cfg.input_mode);
    g.base_channels = cfg.base_channels;
    g.depth = cfg.depth;
    g.upsample_conv = cfg.upsample_conv;
    g.dropout = cfg.dropout;
    m.gen = std::make_unique<UNetGenerator>(g, rng);
    DiscriminatorConfig d;
    d.in_channels = g.in_channels * 2;
    d.base_channels = cfg.base_channels;
    d.stride2_layers = cfg.disc_layers;
    m.disc = std::make_unique<PatchDiscriminator>(d, rng);
    return m;
}

namespace {

NormalizedTensor two_channel(const NormalizedTensor& a, const NormalizedTensor& b) {
    NormalizedTensor out(2, a.height, a.width);
    std::memcpy(out.values.data(), a.values.data(), a.values.size() * sizeof(double));
    std::memcpy(out.values.data() + a.values.size(), b.values.data(), b.values.size() * sizeof(double));
    return out;
}

// Crop with optional vertical flip into an externally provided CHW slot.
void copy_crop(const NormalizedTensor& src, int ox, int oy, int crop, bool flip, double* dst) {
    for (int c = 0; c < src.channels; ++c) {
        const double* plane = src.values.data() + static_cast<std::size_t>(c) * src.height * src.width;
        double* out_plane = dst + static_cast<std::size_t>(c) * crop * crop;
        for (int y = 0; y < crop; ++y) {
            int sy = flip ? oy + crop - 1 - y : oy + y;
            std::memcpy(out_plane + static_cast<std::size_t>(y) * crop,
                        plane + static_cast<std::size_t>(sy) * src.width + ox,
                        static_cast<std::size_t>(crop) * sizeof(double));
        }
    }
}

// d/ds of scale * MSE(s, label)
Tensor mse_grad(const Tensor& scores, double label, double scale) {
    Tensor g = scores;
    double k = 2.0 * scale / static_cast<double>(scores.v.size());
    for (double& v : g.v) v = k * (v - label);
    return g;
}

}  // namespace

NormalizedTensor pair_input(const PatchPair& pair, InputMode mode) {
    if (mode == InputMode::LA)
        return two_channel(normalize(pair.occluded_image), normalize(pair.occluded_mask));
    return normalize(pair.occluded_mask);
}

NormalizedTensor pair_target(const PatchPair& pair, InputMode mode) {
    if (mode == InputMode::LA)
        return two_channel(normalize(pair.nonoccluded_image), normalize(pair.nonoccluded_mask));
    return normalize(pair.nonoccluded_mask);
}

std::vector<EpochLoss> train(GanModel& model, const std::vector<PatchPair>& pairs,
                             const std::function<void(const EpochLoss&)>& on_epoch) {
    const TrainConfig& cfg = model.cfg;
    cfg.validate();
    if (pairs.empty()) throw std::invalid_argument("train: empty dataset");

    int full = pairs[0].occluded_image.width;
    for (const PatchPair& p : pairs) {
        if (p.occluded_image.width != full || p.occluded_image.height != full)
            throw std::invalid_argument("train: pairs must share one square size");
    }
    if (full < cfg.crop_size) throw std::invalid_argument("train: patches smaller than crop size");

    const int in_ch = input_mode_channels(cfg.input_mode);
    std::vector<NormalizedTensor> inputs, targets;
    inputs.reserve(pairs.size());
    targets.reserve(pairs.size());
    for (const PatchPair& p : pairs) {
        inputs.push_back(pair_input(p, cfg.input_mode));
        targets.push_back(pair_target(p, cfg.input_mode));
    }

    Adam adam_g(model.gen->params(), cfg.beta1, cfg.beta2);
    Adam adam_d(model.disc->params(), cfg.beta1, cfg.beta2);
    Rng rng(cfg.seed, 37);

    std::vector<int> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    const int max_off = full - cfg.crop_size;
    const double g_label = cfg.literal_generator_label ? 0.0 : 1.0;

    std::vector<EpochLoss> history;
    history.reserve(cfg.epochs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = lr_at(cfg, epoch);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = rng.uniform_below(static_cast<std::uint32_t>(i));
            std::swap(order[i - 1], order[j]);
        }

        double sum_d = 0.0, sum_g = 0.0, sum_adv = 0.0, sum_l1 = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            int bsz = static_cast<int>(std::min<std::size_t>(cfg.batch_size, order.size() - start));
            Tensor bin(bsz, in_ch, cfg.crop_size, cfg.crop_size);
            Tensor btgt(bsz, in_ch, cfg.crop_size, cfg.crop_size);
            for (int k = 0; k < bsz; ++k) {
                int idx = order[start + k];
                int ox = max_off > 0 ? rng.uniform_int(0, max_off) : 0;
                int oy = max_off > 0 ? rng.uniform_int(0, max_off) : 0;
                bool flip = rng.coin();
                copy_crop(inputs[idx], ox, oy, cfg.crop_size, flip, bin.sample(k));
                copy_crop(targets[idx], ox, oy, cfg.crop_size, flip, btgt.sample(k));
            }

            Tensor fake = model.gen->forward(bin, true);

            adam_d.zero_grad();
            Tensor d_real = model.disc->forward(concat_channels(bin, btgt), true);
            model.disc->backward(mse_grad(d_real, 1.0, 0.5));
            Tensor d_fake = model.disc->forward(concat_channels(bin, fake), true);
            model.disc->backward(mse_grad(d_fake, 0.0, 0.5));
            double l_d = 0.5 * (mse_to_const(d_fake, 0.0) + mse_to_const(d_real, 1.0));
            adam_d.step(lr);

            adam_g.zero_grad();
            Tensor d_fake2 = model.disc->forward(concat_channels(bin, fake), true);
            LossParts lg = generator_loss(d_fake2, btgt, fake, cfg.lambda_l1,
                                          cfg.literal_generator_label);
            Tensor g_concat = model.disc->backward(mse_grad(d_fake2, g_label, 1.0));
            Tensor g_fake = slice_channels(g_concat, in_ch, in_ch);
            double l1_scale = cfg.lambda_l1 / static_cast<double>(fake.v.size());
            for (std::size_t t = 0; t < g_fake.v.size(); ++t) {
                double d = fake.v[t] - btgt.v[t];
                g_fake.v[t] += l1_scale * ((d > 0.0) - (d < 0.0));
            }
            model.gen->backward(g_fake);
            adam_g.step(lr);

            if (!std::isfinite(l_d) || !std::isfinite(lg.total)) {
                std::ostringstream msg;
                msg << "train: non-finite loss at epoch " << epoch << " batch " << batches
                    << " (d=" << l_d << ", g=" << lg.total << ")";
                throw DivergenceError(msg.str());
            }
            sum_d += l_d;
            sum_g += lg.total;
            sum_adv += lg.adversarial;
            sum_l1 += lg.l1;
            ++batches;
        }

        EpochLoss el;
        el.epoch = epoch;
        el.lr = lr;
        el.d_loss = sum_d / batches;
        el.g_loss = sum_g / batches;
        el.g_adversarial = sum_adv / batches;
        el.g_l1 = sum_l1 / batches;
        history.push_back(el);
        if (on_epoch) on_epoch(el);
    }
    return history;
}

InferResult infer_pair(UNetGenerator& gen, InputMode mode, const GrayscaleImage& occluded_image,
                       const BerryMask& occluded_mask) {
    if (occluded_image.width != occluded_mask.width || occluded_image.height != occluded_mask.height)
        throw std::invalid_argument("infer: image/mask size mismatch");
    NormalizedTensor in = mode == InputMode::LA
                              ? two_channel(normalize(occluded_image), normalize(occluded_mask))
                              : normalize(occluded_mask);
    Tensor x = stack_batch({in});
    Tensor y = gen.forward(x, false);
    NormalizedTensor out = to_chw(y, 0);

    InferResult res;
    if (mode == InputMode::LA) {
        res.has_image = true;
        res.image = denormalize_image(out, 0);
        res.raw_mask = denormalize_mask(out, 1);
    } else {
        res.raw_mask = denormalize_mask(out, 0);
    }
    return res;
}

namespace {

template <typename GridT>
GridT crop_grid(const GridT& g, int x0, int y0, int size) {
    GridT out(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            out.at(x, y) = g.at(x0 + x, y0 + y);
    return out;
}

}  // namespace

PatchPair crop_pair_center(const PatchPair& pair, int size) {
    int w = pair.occluded_image.width, h = pair.occluded_image.height;
    if (size > w || size > h) throw std::invalid_argument("crop: size exceeds patch");
    int x0 = (w - size) / 2, y0 = (h - size) / 2;
    PatchPair out;
    out.occluded_image = crop_grid(pair.occluded_image, x0, y0, size);
    out.occluded_mask = crop_grid(pair.occluded_mask, x0, y0, size);
    out.nonoccluded_image = crop_grid(pair.nonoccluded_image, x0, y0, size);
    out.nonoccluded_mask = crop_grid(pair.nonoccluded_mask, x0, y0, size);
    out.leaf_footprint = Footprint(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            out.leaf_footprint.set(x, y, pair.leaf_footprint.at(x0 + x, y0 + y));
    out.provenance = pair.provenance;
    return out;
}

double heldout_l1(UNetGenerator& gen, InputMode mode, const std::vector<PatchPair>& pairs,
                  int crop_size) {
    if (pairs.empty()) throw std::invalid_argument("heldout_l1: empty pair set");
    double acc = 0.0;
    for (const PatchPair& p : pairs) {
        PatchPair c = crop_pair_center(p, crop_size);
        Tensor x = stack_batch({pair_input(c, mode)});
        Tensor t = stack_batch({pair_target(c, mode)});
        Tensor y = gen.forward(x, false);
        double s = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i) s += std::abs(y.v[i] - t.v[i]);
        acc += s / static_cast<double>(y.v.size());
    }
    return acc / static_cast<double>(pairs.size());
}

namespace {

void write_all_params(std::ofstream& out, GanModel& model) {
    std::vector<ParamTensor*> ps = model.gen->params();
    std::vector<ParamTensor*> ds = model.disc->params();
    ps.insert(ps.end(), ds.begin(), ds.end());
    std::size_t total = 0;
    for (ParamTensor* p : ps) total += p->w.size();
    out << "params " << total << "\n";
    for (ParamTensor* p : ps)
        out.write(reinterpret_cast<const char*>(p->w.data()),
                  static_cast<std::streamsize>(p->w.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::string& path, const GanModel& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    const TrainConfig& c = model.cfg;
    out << "berrygan-checkpoint 1\n";
    out << "mode " << to_string(c.input_mode) << "\n";
    out << "crop " << c.crop_size << "\n";
    out << "base " << c.base_channels << "\n";
    out << "depth " << c.depth << "\n";
    out << "disc_layers " << c.disc_layers << "\n";
    out << "epochs " << c.epochs << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", c.lr);
    out << "lr " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", c.lambda_l1);
    out << "lambda_l1 " << buf << "\n";
    out << "batch " << c.batch_size << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", c.beta1);
    out << "beta1 " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", c.beta2);
    out << "beta2 " << buf << "\n";
    out << "upsample " << (c.upsample_conv ? 1 : 0) << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", c.dropout);
    out << "dropout " << buf << "\n";
    out << "literal_label " << (c.literal_generator_label ? 1 : 0) << "\n";
    out << "seed " << c.seed << "\n";
    // params() is non-const by design; the model is not mutated here
    write_all_params(out, const_cast<GanModel&>(model));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

GanModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "berrygan-checkpoint 1")
        throw std::runtime_error("checkpoint: bad header in " + path);

    TrainConfig cfg;
    std::size_t total = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "mode") {
            std::string v;
            ls >> v;
            cfg.input_mode = input_mode_from_string(v);
        } else if (key == "crop") ls >> cfg.crop_size;
        else if (key == "base") ls >> cfg.base_channels;
        else if (key == "depth") ls >> cfg.depth;
        else if (key == "disc_layers") ls >> cfg.disc_layers;
        else if (key == "epochs") ls >> cfg.epochs;
        else if (key == "lr") ls >> cfg.lr;
        else if (key == "lambda_l1") ls >> cfg.lambda_l1;
        else if (key == "batch") ls >> cfg.batch_size;
        else if (key == "beta1") ls >> cfg.beta1;
        else if (key == "beta2") ls >> cfg.beta2;
        else if (key == "upsample") { int v; ls >> v; cfg.upsample_conv = v != 0; }
        else if (key == "dropout") ls >> cfg.dropout;
        else if (key == "literal_label") { int v; ls >> v; cfg.literal_generator_label = v != 0; }
        else if (key == "seed") ls >> cfg.seed;
        else if (key == "params") {
            ls >> total;
            break;
        } else {
            throw std::runtime_error("checkpoint: unknown key '" + key + "' in " + path);
        }
    }
    if (total == 0) throw std::runtime_error("checkpoint: missing params section in " + path);

    GanModel model = make_model(cfg);
    std::vector<ParamTensor*> ps = model.gen->params();
    std::vector<ParamTensor*> ds = model.disc->params();
    ps.insert(ps.end(), ds.begin(), ds.end());
    std::size_t expect = 0;
    for (ParamTensor* p : ps) expect += p->w.size();
    if (expect != total)
        throw std::runtime_error("checkpoint: parameter count mismatch in " + path);
    for (ParamTensor* p : ps) {
        in.read(reinterpret_cast<char*>(p->w.data()),
                static_cast<std::streamsize>(p->w.size() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint: truncated parameter data in " + path);
    }
    return model;
}

void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("loss csv: cannot open " + path);
    out << "epoch,lr,d_loss,g_loss,g_adversarial,g_l1\n";
    char buf[256];
    for (const EpochLoss& e : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%.12g,%.12g\n", e.epoch, e.lr,
                      e.d_loss, e.g_loss, e.g_adversarial, e.g_l1);
        out << buf;
    }
}

}  // namespace berrygan
