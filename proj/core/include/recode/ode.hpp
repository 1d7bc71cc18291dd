#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "recode/graph.hpp"
#include "recode/mlp.hpp"

namespace recode {

enum class SolveMethod { euler, rk4 };

struct SolveConfig {
    SolveMethod method = SolveMethod::euler;
    int substeps_per_interval = 5;
    void validate() const;
};

// Learned vector field: a small MLP mapping the state (optionally with the
// current time appended) to its time derivative.
struct OdeFunc {
    MlpSpec spec;
    MlpParams params;
    bool include_time = false;

    std::size_t state_width() const { return spec.output_width(); }
    void validate() const;
};

// Integrates the learned field from t=0 at h0 through the sorted target
// times, recording every step on the graph so backward differentiates
// through the whole trajectory. A time equal to its predecessor yields the
// predecessor's state node unchanged.
std::vector<NodeId> ode_solve(Graph& g, const OdeFunc& f, NodeId h0,
                              std::span<const double> times, const SolveConfig& cfg);

// Plain callable field for oracle and baseline integrations.
using VectorField =
    std::function<void(double t, std::span<const double> h, std::span<double> dhdt)>;

// Same stepping arithmetic as the recorded solve, without a graph.
std::vector<Tensor> integrate(const VectorField& f, const Tensor& h0,
                              std::span<const double> times, const SolveConfig& cfg);

// dh/dt = -rate * h; h(t) = h0 * exp(-rate * t)
struct ExpDecayField {
    double rate = 1.0;
    VectorField field() const;
    double solution(double h0, double t) const;
};

// dh/dt = -((t - mu) / sigma^2) * h; h(t) = h0 * exp(-((t-mu)^2 - mu^2) / (2 sigma^2))
struct GaussianBumpField {
    double mu = 1.0;
    double sigma = 1.0;
    VectorField field() const;
    double solution(double h0, double t) const;
};

struct ConvergenceStudy {
    std::vector<int> substeps;
    std::vector<double> errors;
    // Least-squares slope of log2(error) vs log2(step size); empty when any
    // error vanishes (nothing to fit against).
    std::optional<double> order;
};

ConvergenceStudy convergence_order(const VectorField& f,
                                   const std::function<double(double)>& exact, double h0,
                                   double t_end, SolveMethod method,
                                   std::span<const int> substep_grid);

}  // namespace recode
