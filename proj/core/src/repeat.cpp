#include "recode/repeat.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace recode {

namespace {
constexpr double kSecondsPerDay = 86400.0;
}

void GapConfig::validate() const {
    if (!(time_scale_days > 0.0)) {
        throw std::invalid_argument("GapConfig: time_scale_days must be positive");
    }
    if (max_repeats < 1) throw std::invalid_argument("GapConfig: max_repeats must be >= 1");
}

RepeatGaps extract_gaps(const UserHistory& history, std::int32_t item, std::int64_t t_target,
                        const GapConfig& cfg) {
    cfg.validate();
    RepeatGaps out;
    // events are time-ascending, so walking backwards visits the most
    // recent consumptions first
    for (auto it = history.events.rbegin(); it != history.events.rend(); ++it) {
        if (it->time >= t_target) continue;
        if (it->item != item) continue;
        const double days = static_cast<double>(t_target - it->time) / kSecondsPerDay;
        out.gaps.push_back(days / cfg.time_scale_days);
        if (out.gaps.size() == cfg.max_repeats) break;
    }
    std::reverse(out.gaps.begin(), out.gaps.end());  // ascending = most recent first
    return out;
}

MlpSpec RepeatModuleSpec::encoder_spec() const {
    MlpSpec s;
    s.input_width = 2 * dim;
    s.layers = {{2 * dim, Activation::tanh}, {d_ode, Activation::tanh}};
    return s;
}

MlpSpec RepeatModuleSpec::ode_spec() const {
    MlpSpec s;
    s.input_width = include_time ? d_ode + 1 : d_ode;
    s.layers = {{d_ode, Activation::tanh}, {d_ode, Activation::identity}};
    return s;
}

MlpSpec RepeatModuleSpec::decoder_spec() const {
    MlpSpec s;
    s.input_width = d_ode;
    s.layers = {{d_ode, Activation::tanh}, {1, Activation::identity}};
    return s;
}

RepeatModule make_repeat_module(ParameterStore& store, const RepeatModuleSpec& spec,
                                std::uint64_t seed) {
    if (spec.dim < 1 || spec.d_ode < 1) {
        throw std::invalid_argument("RepeatModuleSpec: dim and d_ode must be positive");
    }
    spec.solve.validate();
    spec.gaps.validate();
    RepeatModule m;
    m.spec = spec;
    m.encoder_spec = spec.encoder_spec();
    m.decoder_spec = spec.decoder_spec();
    m.encoder = make_mlp_params(store, "repeat.encoder", m.encoder_spec, seed);
    m.ode.spec = spec.ode_spec();
    m.ode.include_time = spec.include_time;
    m.ode.params = make_mlp_params(store, "repeat.ode", m.ode.spec, seed);
    m.decoder = make_mlp_params(store, "repeat.decoder", m.decoder_spec, seed);
    return m;
}

NodeId repeat_score(Graph& g, const RepeatModule& m, NodeId e_u, NodeId e_i,
                    const RepeatGaps& gaps) {
    if (gaps.empty()) return g.scalar(0.0);
    const NodeId h0 = mlp_forward(g, m.encoder_spec, m.encoder, g.concat(e_u, e_i));
    const std::vector<NodeId> states = ode_solve(g, m.ode, h0, gaps.gaps, m.spec.solve);
    NodeId total = kNoNode;
    for (const NodeId s : states) {
        const NodeId d = g.sum_all(mlp_forward(g, m.decoder_spec, m.decoder, s));
        total = total == kNoNode ? d : g.add(total, d);
    }
    return total;
}

double parametric_repeat_score(const RepeatGaps& gaps, const ExponentialKernel& k) {
    if (!(k.rate > 0.0)) throw std::invalid_argument("ExponentialKernel: rate must be positive");
    double sum = 0.0;
    for (double g : gaps.gaps) sum += std::exp(-k.rate * g);
    return k.amplitude * sum;
}

double parametric_repeat_score(const RepeatGaps& gaps, const GaussianKernel& k) {
    if (!(k.sigma > 0.0)) throw std::invalid_argument("GaussianKernel: sigma must be positive");
    double sum = 0.0;
    for (double g : gaps.gaps) {
        sum += std::exp(-((g - k.mu) * (g - k.mu) - k.mu * k.mu) / (2.0 * k.sigma * k.sigma));
    }
    return k.amplitude * sum;
}

ParametricModule make_parametric_module(ParameterStore& store, KernelKind kind,
                                        double init_gap_mean, double init_gap_std) {
    if (!(init_gap_mean > 0.0)) init_gap_mean = 1.0;
    if (!(init_gap_std > 0.0)) init_gap_std = init_gap_mean;
    ParametricModule m;
    m.kind = kind;
    m.amplitude = &store.create("parametric.amplitude", Tensor::scalar(0.0));
    if (kind == KernelKind::exponential) {
        m.log_rate =
            &store.create("parametric.log_rate", Tensor::scalar(std::log(1.0 / init_gap_mean)));
    } else {
        m.mu = &store.create("parametric.mu", Tensor::scalar(init_gap_mean));
        m.log_sigma =
            &store.create("parametric.log_sigma", Tensor::scalar(std::log(init_gap_std)));
    }
    return m;
}

NodeId parametric_score(Graph& g, const ParametricModule& m, const RepeatGaps& gaps) {
    if (gaps.empty()) return g.scalar(0.0);
    if (m.kind == KernelKind::exponential) {
        return g.exp_kernel_sum(g.param(*m.amplitude), g.param(*m.log_rate), gaps.gaps);
    }
    return g.gauss_kernel_sum(g.param(*m.amplitude), g.param(*m.mu), g.param(*m.log_sigma),
                              gaps.gaps);
}

}  // namespace recode
