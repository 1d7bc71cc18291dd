#include "recode/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace recode {

void MlpSpec::validate() const {
    if (input_width == 0) throw std::invalid_argument("MlpSpec: input_width must be positive");
    if (layers.empty()) throw std::invalid_argument("MlpSpec: at least one layer required");
    for (const LayerSpec& l : layers) {
        if (l.width == 0) throw std::invalid_argument("MlpSpec: layer widths must be positive");
    }
    if (!(init_gain > 0.0)) throw std::invalid_argument("MlpSpec: init_gain must be positive");
}

MlpParams make_mlp_params(ParameterStore& store, const std::string& prefix, const MlpSpec& spec,
                          std::uint64_t seed) {
    spec.validate();
    MlpParams out;
    std::size_t fan_in = spec.input_width;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const std::size_t fan_out = spec.layers[l].width;
        const std::string wname = prefix + ".w" + std::to_string(l);
        const double s =
            spec.init_gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Tensor w = Tensor::zeros(fan_in, fan_out);
        Rng rng = Rng::stream(seed, wname);
        for (double& v : w.values()) v = rng.uniform(-s, s);
        out.weights.push_back(&store.create(wname, std::move(w)));
        out.biases.push_back(
            &store.create(prefix + ".b" + std::to_string(l), Tensor::zeros(fan_out)));
        fan_in = fan_out;
    }
    return out;
}

NodeId mlp_forward(Graph& g, const MlpSpec& spec, const MlpParams& params, NodeId x) {
    if (params.weights.size() != spec.layers.size()) {
        throw std::invalid_argument("mlp_forward: params do not match spec layer count");
    }
    NodeId cur = x;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        cur = g.affine(cur, g.param(*params.weights[l]), g.param(*params.biases[l]));
        cur = g.activation(cur, spec.layers[l].act);
    }
    return cur;
}

namespace {

// Raw forward; optionally records the smallest |preactivation| seen at any
// relu layer so finite-difference callers can detect kink crossings.
Tensor raw_forward(const MlpSpec& spec, const MlpParams& params, const Tensor& x,
                   double* relu_margin) {
    const std::size_t rows = x.rank() == 2 ? x.dim(0) : 1;
    Tensor cur = x;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const Tensor& w = params.weights[l]->value;
        const Tensor& b = params.biases[l]->value;
        const std::size_t k = w.dim(0);
        const std::size_t m = w.dim(1);
        const std::size_t cur_cols = cur.rank() == 2 ? cur.dim(1) : cur.dim(0);
        if (cur_cols != k) {
            throw std::invalid_argument("mlp_forward: shape mismatch at layer " +
                                        std::to_string(l) + ": input " + cur.shape_str() +
                                        " vs weight " + w.shape_str());
        }
        Tensor next = x.rank() == 2 ? Tensor::zeros(rows, m) : Tensor::zeros(m);
        kernels::affine(cur.data(), rows, k, w.data(), m, b.data(), next.data());
        switch (spec.layers[l].act) {
            case Activation::identity:
                break;
            case Activation::tanh:
                kernels::tanh_inplace(next.data(), next.numel());
                break;
            case Activation::relu:
                if (relu_margin != nullptr) {
                    for (double v : next.values()) {
                        *relu_margin = std::min(*relu_margin, std::abs(v));
                    }
                }
                kernels::relu_inplace(next.data(), next.numel());
                break;
            case Activation::sigmoid:
                kernels::sigmoid_inplace(next.data(), next.numel());
                break;
        }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace

Tensor mlp_forward(const MlpSpec& spec, const MlpParams& params, const Tensor& x) {
    if (params.weights.size() != spec.layers.size()) {
        throw std::invalid_argument("mlp_forward: params do not match spec layer count");
    }
    return raw_forward(spec, params, x, nullptr);
}

double gradcheck_mlp(const MlpSpec& spec, int trials, double epsilon, std::uint64_t seed) {
    spec.validate();
    if (trials < 1) throw std::invalid_argument("gradcheck_mlp: trials must be >= 1");
    // Being this close to a relu kink makes the central difference meaningless.
    const double kink_guard = 100.0 * epsilon;

    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        ParameterStore store;
        const std::uint64_t trial_seed = splitmix64(seed + static_cast<std::uint64_t>(trial));
        MlpParams params = make_mlp_params(store, "net", spec, trial_seed);

        Rng xr = Rng::stream(trial_seed, "gradcheck.x");
        Tensor x0 = Tensor::zeros(2, spec.input_width);
        for (double& v : x0.values()) v = xr.uniform(-1.0, 1.0);
        Parameter& px = store.create("x", std::move(x0));

        Graph g(store);
        const NodeId loss = g.sum_all(mlp_forward(g, spec, params, g.param(px)));
        GradientBuffer grads(store);
        g.backward(loss, grads);

        for (std::size_t pi = 0; pi < store.size(); ++pi) {
            Parameter& p = store.at(pi);
            for (std::size_t c = 0; c < p.value.numel(); ++c) {
                const double orig = p.value[c];
                double margin = std::numeric_limits<double>::infinity();
                p.value[c] = orig + epsilon;
                const double lp = raw_forward(spec, params, px.value, &margin).sum();
                p.value[c] = orig - epsilon;
                const double lm = raw_forward(spec, params, px.value, &margin).sum();
                p.value[c] = orig;
                if (margin < kink_guard) continue;
                const double numeric = (lp - lm) / (2.0 * epsilon);
                const double analytic = grads.at(pi)[c];
                const double denom =
                    std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                worst = std::max(worst, std::abs(analytic - numeric) / denom);
            }
        }
    }
    return worst;
}

}  // namespace recode
