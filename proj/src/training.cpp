#include "dmfour/training.hpp"

#include "dmfour/color.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace dmfour {

namespace {

constexpr std::size_t kPyramidLevels = 3;

} // namespace

Var perceptual_proxy(Var a, Var b)
{
    if (a.shape() != b.shape()) {
        throw ShapeError("perceptual_proxy: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    Var total = mse(a, b);
    for (std::size_t level = 1; level < kPyramidLevels; ++level) {
        a = pyramid_down(a);
        b = pyramid_down(b);
        total = add(total, mse(a, b));
    }
    return scale(total, 1.0 / static_cast<double>(kPyramidLevels));
}

double perceptual_proxy(const Tensor& a, const Tensor& b)
{
    Tape tape;
    tape.set_grad_enabled(false);
    return perceptual_proxy(tape.constant(a), tape.constant(b)).value().item();
}

LossTerms loss_total(Var i_s1, Var i_s2, Var gt, std::optional<Var> l_att_pred, Var l_att_target,
                     const LossWeights& w)
{
    if (i_s1.shape() != gt.shape() || i_s2.shape() != gt.shape()) {
        throw ShapeError("loss_total: image shapes " + shape_str(i_s1.shape()) + ", " + shape_str(i_s2.shape()) +
                         ", " + shape_str(gt.shape()) + " differ");
    }
    const Var s1 = mse(i_s1, gt);
    const Var s2 = mse(i_s2, gt);
    const Var per = perceptual_proxy(i_s2, gt);
    Var total = add(add(scale(s1, w.s1), scale(s2, w.s2)), scale(per, w.per));
    LossBreakdown br{0.0, s1.value().item(), s2.value().item(), per.value().item(), 0.0};
    if (l_att_pred) {
        if (l_att_pred->shape() != l_att_target.shape()) {
            throw ShapeError("loss_total: attention map shapes " + shape_str(l_att_pred->shape()) + " vs " +
                             shape_str(l_att_target.shape()));
        }
        const Var lum = mse(*l_att_pred, l_att_target);
        br.lum = lum.value().item();
        total = add(total, scale(lum, w.lum));
    }
    br.total = total.value().item();
    return {total, br};
}

LossBreakdown loss_total(const Tensor& i_s1, const Tensor& i_s2, const Tensor& gt, const Tensor* l_att_pred,
                         const Tensor& l_att_target, const LossWeights& w)
{
    Tape tape;
    tape.set_grad_enabled(false);
    std::optional<Var> pred;
    if (l_att_pred != nullptr) {
        pred = tape.constant(*l_att_pred);
    }
    return loss_total(tape.constant(i_s1), tape.constant(i_s2), tape.constant(gt), pred,
                      tape.constant(l_att_target), w)
        .breakdown;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr,
               std::span<const std::string> names)
{
    if (params.size() != grads.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " adjoints");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        require_same_shape(*params[i], grads[i], "adam_step");
        if (!grads[i].all_finite()) {
            std::string who = i < names.size() ? names[i] : "parameter " + std::to_string(i);
            throw NumericError("adam_step: non-finite adjoint for " + who + " at step " +
                               std::to_string(state.step + 1));
        }
    }
    if (state.m.empty()) {
        for (Tensor* p : params) {
            state.m.emplace_back(p->shape());
            state.v.emplace_back(p->shape());
        }
    }
    const AdamOptions& o = state.options;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::span<double> p = params[i]->data();
        std::span<const double> g = grads[i].data();
        std::span<double> m = state.m[i].data();
        std::span<double> v = state.v[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
            v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
            p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + o.eps);
        }
    }
}

TrainConfig TrainConfig::full_scale()
{
    TrainConfig c;
    c.crop = 256;
    c.batch = 8;
    c.iters = 100000;
    c.model.stage2_width = 64;
    return c;
}

double TrainConfig::lr_at(std::size_t iteration) const
{
    double rate = lr;
    for (double m : milestones) {
        if (static_cast<double>(iteration) >= m * static_cast<double>(iters)) {
            rate *= lr_gamma;
        }
    }
    return rate;
}

ImagePair make_pair(std::string id, Tensor low, Tensor gt, Tensor infrared)
{
    require_rank(low, 4, "make_pair");
    if (low.dim(0) != 1 || low.dim(1) != 3) {
        throw ShapeError("make_pair: " + id + ": expected a 13HW image, got " + shape_str(low.shape()));
    }
    if (low.shape() != gt.shape()) {
        throw ShapeError("make_pair: " + id + ": low " + shape_str(low.shape()) + " and gt " +
                         shape_str(gt.shape()) + " differ in size");
    }
    ImagePair p;
    p.id = std::move(id);
    if (infrared.empty()) {
        p.infrared = luminance(low);
        p.infrared_fallback = true;
    } else {
        const Shape want{1, 1, low.dim(2), low.dim(3)};
        if (infrared.shape() != want) {
            throw ShapeError("make_pair: " + p.id + ": infrared " + shape_str(infrared.shape()) +
                             " does not match " + shape_str(want));
        }
        p.infrared = std::move(infrared);
    }
    p.low = std::move(low);
    p.gt = std::move(gt);
    return p;
}

Tensor flip_horizontal(const Tensor& x)
{
    require_rank(x, 4, "flip_horizontal");
    Tensor out(x.shape());
    const std::size_t w = x.dim(3);
    const std::size_t rows = x.size() / w;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < w; ++j) {
            out[r * w + j] = x[r * w + (w - 1 - j)];
        }
    }
    return out;
}

Tensor crop(const Tensor& x, std::size_t top, std::size_t left, std::size_t height, std::size_t width)
{
    require_rank(x, 4, "crop");
    if (top + height > x.dim(2) || left + width > x.dim(3)) {
        throw ShapeError("crop: window exceeds " + shape_str(x.shape()));
    }
    Tensor out({x.dim(0), x.dim(1), height, width});
    for (std::size_t b = 0; b < x.dim(0); ++b) {
        for (std::size_t c = 0; c < x.dim(1); ++c) {
            for (std::size_t i = 0; i < height; ++i) {
                for (std::size_t j = 0; j < width; ++j) {
                    out.at(b, c, i, j) = x.at(b, c, top + i, left + j);
                }
            }
        }
    }
    return out;
}

Batch sample_batch(const std::vector<ImagePair>& data, std::size_t batch, std::size_t crop_size, bool flip, Rng& rng)
{
    std::vector<Tensor> low, gt, ir;
    for (std::size_t n = 0; n < batch; ++n) {
        const ImagePair& p = data[rng.index(data.size())];
        const std::size_t top = rng.index(p.low.dim(2) - crop_size + 1);
        const std::size_t left = rng.index(p.low.dim(3) - crop_size + 1);
        Tensor l = crop(p.low, top, left, crop_size, crop_size);
        Tensor g = crop(p.gt, top, left, crop_size, crop_size);
        Tensor i = crop(p.infrared, top, left, crop_size, crop_size);
        if (flip && rng.coin()) {
            l = flip_horizontal(l);
            g = flip_horizontal(g);
            i = flip_horizontal(i);
        }
        low.push_back(std::move(l));
        gt.push_back(std::move(g));
        ir.push_back(std::move(i));
    }
    return {stack_batch(low), stack_batch(gt), stack_batch(ir)};
}

std::vector<AblationRun> ablation_suite()
{
    std::vector<AblationRun> runs{{"full", Ablation{}}};
    const auto off = [&runs](std::string name, bool Ablation::*flag) {
        Ablation a;
        a.*flag = false;
        runs.push_back({std::move(name), a});
    };
    off("no_luminance_branch", &Ablation::luminance_branch);
    off("no_infrared_branch", &Ablation::infrared_branch);
    off("no_luminance_augment", &Ablation::luminance_augment);
    off("no_infrared_augment", &Ablation::infrared_augment);
    off("no_ffc_path", &Ablation::ffc_path);
    off("no_multiscale_path", &Ablation::multiscale_path);
    off("no_stage1", &Ablation::stage1);
    off("no_stage2", &Ablation::stage2);
    return runs;
}

std::string IterationLog::to_json() const
{
    nlohmann::ordered_json j;
    j["iteration"] = iteration;
    j["total"] = loss.total;
    j["s1"] = loss.s1;
    j["s2"] = loss.s2;
    j["per"] = loss.per;
    j["lum"] = loss.lum;
    j["lr"] = lr;
    return j.dump();
}

TrainResult train(const TrainConfig& cfg, const std::vector<ImagePair>& data, const TrainHooks& hooks)
{
    return train(cfg, Model::init(cfg.model, cfg.seed), data, hooks);
}

TrainResult train(const TrainConfig& cfg, Model model, const std::vector<ImagePair>& data, const TrainHooks& hooks)
{
    if (data.empty()) {
        throw std::invalid_argument("train: dataset is empty");
    }
    if (cfg.batch == 0 || cfg.crop == 0) {
        throw std::invalid_argument("train: batch and crop must be positive");
    }
    for (const ImagePair& p : data) {
        if (cfg.crop > p.low.dim(2) || cfg.crop > p.low.dim(3)) {
            throw ShapeError("train: crop " + std::to_string(cfg.crop) + " exceeds image " + p.id + " of size " +
                             shape_str(p.low.shape()));
        }
    }

    TrainResult result;
    std::vector<Tensor*> params;
    model.for_each_param([&](const std::string& name, Tensor& t) {
        params.push_back(&t);
        result.parameter_names.push_back(name);
    });
    result.received_gradient.assign(params.size(), false);

    // Data order is drawn from its own stream so that it does not depend on the parameter count.
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    AdamState adam;
    const LuminanceTargetOptions lum_opt{model.config.lum_eps, model.config.lum_clamp_max};

    for (std::size_t it = 0; it < cfg.iters; ++it) {
        const Batch b = sample_batch(data, cfg.batch, cfg.crop, cfg.flip, rng);
        const Tensor target = luminance_attention_target(luminance(b.low), luminance(b.gt), lum_opt);

        Tape tape;
        const ForwardOutput out = model_forward(tape.constant(b.low), tape.constant(b.infrared), model, cfg.ablation);
        std::optional<Var> pred;
        if (out.l_att_pred.valid()) {
            pred = out.l_att_pred;
        }
        const LossTerms loss =
            loss_total(out.i_s1, out.i_s2, tape.constant(b.gt), pred, tape.constant(target), cfg.weights);
        if (!std::isfinite(loss.breakdown.total)) {
            throw NumericError("train: non-finite loss at iteration " + std::to_string(it));
        }

        std::vector<Tensor> grads;
        grads.reserve(params.size());
        const Adjoints adj = tape.backward(loss.total);
        for (std::size_t i = 0; i < params.size(); ++i) {
            grads.push_back(adj.of_parameter(*params[i]));
            if (!result.received_gradient[i] && max_abs(grads.back()) > 0.0) {
                result.received_gradient[i] = true;
            }
        }
        const double lr = cfg.lr_at(it);
        adam_step(params, grads, adam, lr, result.parameter_names);

        IterationLog entry{it, loss.breakdown, lr};
        if (hooks.on_iteration) {
            hooks.on_iteration(entry);
        }
        result.log.push_back(entry);
        const bool last = it + 1 == cfg.iters;
        if (hooks.on_checkpoint && (last || (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0))) {
            hooks.on_checkpoint(it + 1, model);
        }
    }
    result.model = std::move(model);
    return result;
}

} // namespace dmfour
