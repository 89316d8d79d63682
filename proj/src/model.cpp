#include "dmfour/model.hpp"

namespace dmfour {

Model Model::init(const ModelConfig& cfg, std::uint64_t seed)
{
    Rng rng(seed);
    Model m;
    m.config = cfg;
    m.stage1 = Stage1Net::init(cfg, rng);
    m.stage2 = Stage2Net::init(cfg, rng);
    return m;
}

std::size_t Model::parameter_count() const
{
    std::size_t n = 0;
    for_each_param([&n](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
}

ForwardOutput model_forward(Var i_low, Var i_inf, const Model& model, const Ablation& ablation)
{
    ForwardOutput out;
    out.i_s1 = i_low;
    if (ablation.stage1) {
        Stage1Output s1 = stage1_forward(i_low, i_inf, model.stage1, {model.config.leaky_slope, ablation});
        out.i_s1 = s1.i_s1;
        out.l_att_pred = s1.l_att_pred;
    }
    out.i_s2 = out.i_s1;
    if (ablation.stage2) {
        out.i_s2 = stage2_forward(out.i_s1, model.stage2, {model.config.leaky_slope, ablation});
    }
    return out;
}

Enhanced enhance(const Model& model, const Tensor& i_low, const Tensor& i_inf, const Ablation& ablation)
{
    Tape tape;
    tape.set_grad_enabled(false);
    ForwardOutput out = model_forward(tape.constant(i_low), tape.constant(i_inf), model, ablation);
    return {out.i_s1.value(), out.i_s2.value()};
}

} // namespace dmfour
