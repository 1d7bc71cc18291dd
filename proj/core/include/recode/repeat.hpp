#pragma once

#include <cstdint>
#include <vector>

#include "recode/data.hpp"
#include "recode/graph.hpp"
#include "recode/mlp.hpp"
#include "recode/ode.hpp"

namespace recode {

// Scaled time gaps between a target time and the prior consumptions of one
// item, ascending (most recent consumption first).
struct RepeatGaps {
    std::vector<double> gaps;
    bool empty() const { return gaps.empty(); }
    std::size_t size() const { return gaps.size(); }
};

struct GapConfig {
    double time_scale_days = 30.0;  // days per solver time unit
    std::size_t max_repeats = 20;   // keep only this many most recent consumptions
    void validate() const;
};

// Gaps (t_target - t') / scale for every consumption of `item` strictly
// before t_target, truncated to the most recent max_repeats.
RepeatGaps extract_gaps(const UserHistory& history, std::int32_t item, std::int64_t t_target,
                        const GapConfig& cfg = {});

struct RepeatModuleSpec {
    std::size_t dim = 32;    // embedding width feeding the encoder
    std::size_t d_ode = 32;  // hidden-state width
    SolveConfig solve;
    GapConfig gaps;
    bool include_time = false;

    // encoder [2d -> 2d tanh -> d_ode tanh]
    MlpSpec encoder_spec() const;
    // field [d_ode -> d_ode tanh -> d_ode]
    MlpSpec ode_spec() const;
    // decoder [d_ode -> d_ode tanh -> 1]
    MlpSpec decoder_spec() const;
};

struct RepeatModule {
    RepeatModuleSpec spec;
    MlpSpec encoder_spec;  // materialized from spec at build time
    MlpSpec decoder_spec;
    MlpParams encoder;
    OdeFunc ode;
    MlpParams decoder;
};

RepeatModule make_repeat_module(ParameterStore& store, const RepeatModuleSpec& spec,
                                std::uint64_t seed);

// Encode (e_u || e_i) into an initial state, solve at the gap times, decode
// each state and sum. Empty gaps score exactly zero.
NodeId repeat_score(Graph& g, const RepeatModule& m, NodeId e_u, NodeId e_i,
                    const RepeatGaps& gaps);

// Fixed-form kernels: the closed-form solutions of the decay fields that
// the neural module generalizes. Score is amplitude * sum_k kernel(gap_k).
struct ExponentialKernel {
    double rate = 1.0;
    double amplitude = 1.0;
};

struct GaussianKernel {
    double mu = 1.0;
    double sigma = 1.0;
    double amplitude = 1.0;
};

double parametric_repeat_score(const RepeatGaps& gaps, const ExponentialKernel& k);
double parametric_repeat_score(const RepeatGaps& gaps, const GaussianKernel& k);

// Trainable version of the fixed-form kernels; positivity of rate and sigma
// is kept by learning them in log space.
enum class KernelKind { exponential, gaussian };

struct ParametricModule {
    KernelKind kind = KernelKind::exponential;
    const Parameter* amplitude = nullptr;
    const Parameter* log_rate = nullptr;   // exponential
    const Parameter* mu = nullptr;         // gaussian
    const Parameter* log_sigma = nullptr;  // gaussian
};

// init_gap_mean / init_gap_std are in solver time units and seed the kernel
// shape; amplitude starts at zero so an untrained module scores nothing.
ParametricModule make_parametric_module(ParameterStore& store, KernelKind kind,
                                        double init_gap_mean, double init_gap_std);

NodeId parametric_score(Graph& g, const ParametricModule& m, const RepeatGaps& gaps);

}  // namespace recode
