#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recode/graph.hpp"
#include "recode/params.hpp"
#include "recode/rng.hpp"
#include "recode/tensor.hpp"

namespace recode {

struct LayerSpec {
    std::size_t width = 0;
    Activation act = Activation::identity;
};

struct MlpSpec {
    std::size_t input_width = 0;
    std::vector<LayerSpec> layers;  // at least one
    double init_gain = 1.0;         // scales the fan-based init bound

    std::size_t output_width() const { return layers.back().width; }
    void validate() const;
};

// Non-owning views of the layer parameters registered in a ParameterStore.
struct MlpParams {
    std::vector<const Parameter*> weights;
    std::vector<const Parameter*> biases;
};

// Registers weights "<prefix>.w<l>" / biases "<prefix>.b<l>". Weights are
// uniform in [-s, s] with s = gain * sqrt(6 / (fan_in + fan_out)), each from
// an rng stream keyed by the parameter name; biases start at zero.
MlpParams make_mlp_params(ParameterStore& store, const std::string& prefix, const MlpSpec& spec,
                          std::uint64_t seed);

NodeId mlp_forward(Graph& g, const MlpSpec& spec, const MlpParams& params, NodeId x);

// Batched inference path; same kernels as the graph ops, so values agree
// bit-for-bit with a recorded forward.
Tensor mlp_forward(const MlpSpec& spec, const MlpParams& params, const Tensor& x);

// Compares analytic gradients of sum(mlp(x)) against central finite
// differences over every parameter and input coordinate; returns the worst
// relative error. Coordinates whose perturbation lands within the finite-
// difference window of a relu kink are skipped (the difference quotient is
// not a derivative estimate there).
double gradcheck_mlp(const MlpSpec& spec, int trials, double epsilon, std::uint64_t seed);

}  // namespace recode
