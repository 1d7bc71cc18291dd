#include "recode/model.hpp"

#include <stdexcept>

namespace recode {

std::string to_string(RepeatArm arm) {
    switch (arm) {
        case RepeatArm::none: return "none";
        case RepeatArm::ode: return "ode";
        case RepeatArm::exponential: return "exponential";
        case RepeatArm::gaussian: return "gaussian";
    }
    return "?";
}

std::string to_string(BackboneKind kind) {
    return kind == BackboneKind::mf_dot ? "mf_dot" : "mlp_tower";
}

std::string ModelSpec::arm_name() const {
    switch (arm) {
        case RepeatArm::none: return to_string(backbone.kind);
        case RepeatArm::ode: return to_string(backbone.kind) + "+recode";
        case RepeatArm::exponential: return to_string(backbone.kind) + "+exp_kernel";
        case RepeatArm::gaussian: return to_string(backbone.kind) + "+gauss_kernel";
    }
    return "?";
}

Model Model::build(const ModelSpec& spec, std::int32_t num_users, std::int32_t num_items,
                   std::uint64_t seed) {
    Model m;
    m.spec = spec;
    m.spec.repeat.dim = spec.dim;
    m.num_users = num_users;
    m.num_items = num_items;
    m.backbone = make_backbone(m.store, spec.backbone, num_users, num_items, spec.dim, seed);
    switch (spec.arm) {
        case RepeatArm::none:
            break;
        case RepeatArm::ode:
            m.repeat = make_repeat_module(m.store, m.spec.repeat, seed);
            break;
        case RepeatArm::exponential:
            m.parametric = make_parametric_module(m.store, KernelKind::exponential,
                                                  spec.kernel_init_gap_mean,
                                                  spec.kernel_init_gap_std);
            break;
        case RepeatArm::gaussian:
            m.parametric = make_parametric_module(m.store, KernelKind::gaussian,
                                                  spec.kernel_init_gap_mean,
                                                  spec.kernel_init_gap_std);
            break;
    }
    return m;
}

NodeId Model::fused(Graph& g, std::int32_t user, std::int32_t item,
                    const RepeatGaps& gaps) const {
    const auto [e_u, e_i] = embed(g, backbone, user, item);
    const NodeId sta = static_score(g, backbone, e_u, e_i);
    if (gaps.empty() || spec.arm == RepeatArm::none) return sta;
    NodeId rep = kNoNode;
    if (spec.arm == RepeatArm::ode) {
        rep = repeat_score(g, *repeat, e_u, e_i, gaps);
    } else {
        rep = parametric_score(g, *parametric, gaps);
    }
    return g.add(sta, rep);
}

}  // namespace recode
