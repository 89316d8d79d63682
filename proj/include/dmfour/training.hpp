#pragma once

#include "dmfour/autodiff.hpp"
#include "dmfour/model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dmfour {

/// Weights of the stage-1, stage-2, perceptual and luminance terms.
struct LossWeights {
    double s1 = 0.5;
    double s2 = 1.0;
    double per = 0.2;
    double lum = 0.1;
};

struct LossBreakdown {
    double total = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    double per = 0.0;
    double lum = 0.0;
};

struct LossTerms {
    Var total;
    LossBreakdown breakdown;
};

/// Mean of the MSEs between 3-level Gaussian pyramids (full, 1/2, 1/4 resolution) of a and b.
Var perceptual_proxy(Var a, Var b);
double perceptual_proxy(const Tensor& a, const Tensor& b);

/// Weighted sum of MSE(i_s1, gt), MSE(i_s2, gt), the perceptual proxy on (i_s2, gt) and
/// MSE(l_att_pred, l_att_target). The luminance term is zero when no prediction is given.
LossTerms loss_total(Var i_s1, Var i_s2, Var gt, std::optional<Var> l_att_pred, Var l_att_target,
                     const LossWeights& w);
LossBreakdown loss_total(const Tensor& i_s1, const Tensor& i_s2, const Tensor& gt, const Tensor* l_att_pred,
                         const Tensor& l_att_target, const LossWeights& w);

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t step = 0;
    AdamOptions options{};
};

/// One bias-corrected Adam update. Throws NumericError on a non-finite adjoint, naming the
/// offending parameter when `names` is provided.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr,
               std::span<const std::string> names = {});

struct TrainConfig {
    ModelConfig model{};
    Ablation ablation{};
    LossWeights weights{};
    std::size_t crop = 64;
    std::size_t batch = 4;
    double lr = 4.0e-4;
    std::size_t iters = 300;
    std::uint64_t seed = 7;
    /// Fractions of `iters` at which the learning rate is multiplied by `lr_gamma`.
    std::vector<double> milestones{0.5, 0.75};
    double lr_gamma = 0.5;
    bool flip = true;
    std::size_t checkpoint_every = 0; ///< 0: only at the end

    /// Crop 256, batch 8, 1e5 iterations, Stage-2 width 64.
    static TrainConfig full_scale();

    double lr_at(std::size_t iteration) const;
};

/// Registered low-light / ground-truth pair with an optional infrared companion.
struct ImagePair {
    std::string id;
    Tensor low; ///< 13HW in [0, 1]
    Tensor gt;  ///< 13HW in [0, 1]
    Tensor infrared; ///< 11HW; the Y channel of `low` when no infrared image was supplied
    bool infrared_fallback = false;
};

/// Builds a pair, substituting the Y channel of `low` when `infrared` is empty.
ImagePair make_pair(std::string id, Tensor low, Tensor gt, Tensor infrared = {});

struct Batch {
    Tensor low;
    Tensor gt;
    Tensor infrared;
};

struct IterationLog {
    std::size_t iteration = 0;
    LossBreakdown loss;
    double lr = 0.0;

    /// One JSON object, no trailing newline.
    std::string to_json() const;
};

struct TrainHooks {
    std::function<void(const IterationLog&)> on_iteration;
    std::function<void(std::size_t iteration, const Model&)> on_checkpoint;
};

struct TrainResult {
    Model model;
    std::vector<IterationLog> log;
    /// Per parameter (declaration order): whether any iteration produced a nonzero adjoint.
    std::vector<bool> received_gradient;
    std::vector<std::string> parameter_names;
};

/// Deterministic end-to-end training of both stages.
TrainResult train(const TrainConfig& cfg, const std::vector<ImagePair>& data, const TrainHooks& hooks = {});
/// Continues training an existing model.
TrainResult train(const TrainConfig& cfg, Model model, const std::vector<ImagePair>& data,
                  const TrainHooks& hooks = {});

struct AblationRun {
    std::string name;
    Ablation ablation;
};

/// The full model followed by one run per removable component.
std::vector<AblationRun> ablation_suite();

/// Random crop + optional horizontal flip of `batch` pairs drawn from `data`.
Batch sample_batch(const std::vector<ImagePair>& data, std::size_t batch, std::size_t crop, bool flip, Rng& rng);

/// Horizontal mirror of a BCHW tensor.
Tensor flip_horizontal(const Tensor& x);
Tensor crop(const Tensor& x, std::size_t top, std::size_t left, std::size_t height, std::size_t width);

} // namespace dmfour
