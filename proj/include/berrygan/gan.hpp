#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <memory>
#include <string>
#include <vector>

#include "berrygan/leaf.hpp"
#include "berrygan/nets.hpp"

namespace berrygan {

// LA feeds grayscale + mask through the model; A is mask-only.
// Numeric failure during optimization (non-finite losses and friends),
// kept as its own type so callers can exit differently on it.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class InputMode { LA, A };

int input_mode_channels(InputMode mode);
std::string to_string(InputMode mode);
InputMode input_mode_from_string(const std::string& s);

struct TrainConfig {
    InputMode input_mode = InputMode::LA;
    int crop_size = 64;     // random-crop size during training
    int base_channels = 32;
    int depth = 4;
    int disc_layers = 2;    // stride-2 discriminator stages
    int epochs = 40;        // must be even for the two-phase schedule
    double lr = 0.0004;
    double lambda_l1 = 100.0;
    int batch_size = 4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    bool upsample_conv = false;
    double dropout = 0.0;
    // train the generator toward the literal label constant instead of the
    // standard "judged real" target
    bool literal_generator_label = false;
    std::uint64_t seed = 1;

    void validate() const;
};

// Constant for the first half of training, then linear to 0. Defined for
// e in [0, epochs]; lr(epochs) is exactly 0.
double lr_at(const TrainConfig& cfg, int epoch);

struct LossParts {
    double total = 0.0;
    double adversarial = 0.0;
    double l1 = 0.0;
};

double mse_to_const(const Tensor& scores, double label);
double discriminator_loss(const Tensor& d_real_scores, const Tensor& d_fake_scores);
LossParts generator_loss(const Tensor& d_fake_scores, const Tensor& target,
                         const Tensor& generated, double lambda, bool literal_label = false);

class Adam {
public:
    Adam(std::vector<ParamTensor*> params, double beta1, double beta2, double eps = 1e-8);
    void zero_grad();
    void step(double lr);

private:
    std::vector<ParamTensor*> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    double b1_, b2_, eps_;
    long t_ = 0;
};

struct GanModel {
    TrainConfig cfg;
    std::unique_ptr<UNetGenerator> gen;
    std::unique_ptr<PatchDiscriminator> disc;
};

GanModel make_model(const TrainConfig& cfg);

struct EpochLoss {
    int epoch = 0;
    double lr = 0.0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double g_adversarial = 0.0;
    double g_l1 = 0.0;
};

// Model input/target tensors for one pair at full patch size.
NormalizedTensor pair_input(const PatchPair& pair, InputMode mode);
NormalizedTensor pair_target(const PatchPair& pair, InputMode mode);

// Alternating updates, one discriminator step then one generator step per
// batch. Applies the shared random crop + vertical flip augmentation, the
// two-phase learning rate, and a non-finite-loss divergence guard.
// Deterministic per cfg.seed.
std::vector<EpochLoss> train(GanModel& model, const std::vector<PatchPair>& pairs,
                             const std::function<void(const EpochLoss&)>& on_epoch = nullptr);

struct InferResult {
    bool has_image = false;
    GrayscaleImage image;  // only in LA mode
    RawMask raw_mask;
};

// Runs the generator on occluded inputs and denormalizes the outputs.
InferResult infer_pair(UNetGenerator& gen, InputMode mode, const GrayscaleImage& occluded_image,
                       const BerryMask& occluded_mask);

// Deterministic center crop of all grids in a pair, for evaluation at the
// model's native size.
PatchPair crop_pair_center(const PatchPair& pair, int size);

// Mean absolute error (normalized units) of the generator on a pair set,
// inputs center-cropped to crop size.
double heldout_l1(UNetGenerator& gen, InputMode mode, const std::vector<PatchPair>& pairs,
                  int crop_size);

void save_checkpoint(const std::string& path, const GanModel& model);
GanModel load_checkpoint(const std::string& path);

void write_loss_csv(const std::string& path, const std::vector<EpochLoss>& history);

}  // namespace berrygan
