#include "recode/ode.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace recode {

void SolveConfig::validate() const {
    if (substeps_per_interval < 1) {
        throw std::invalid_argument("SolveConfig: substeps_per_interval must be >= 1");
    }
}

void OdeFunc::validate() const {
    spec.validate();
    const std::size_t d = spec.output_width();
    const std::size_t expected_in = include_time ? d + 1 : d;
    if (spec.input_width != expected_in) {
        throw std::invalid_argument(
            "OdeFunc: input width must equal state width" +
            std::string(include_time ? " + 1 (time channel)" : ""));
    }
}

namespace {

void check_times(std::span<const double> times) {
    double prev = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < 0.0) {
            throw std::invalid_argument("ode_solve: negative time at index " +
                                        std::to_string(i));
        }
        if (times[i] < prev) {
            throw std::invalid_argument("ode_solve: times not sorted at index " +
                                        std::to_string(i));
        }
        prev = times[i];
    }
}

[[noreturn]] void nan_error(std::size_t time_index, int substep) {
    throw std::runtime_error("ode_solve: non-finite state at time index " +
                             std::to_string(time_index) + ", substep " +
                             std::to_string(substep));
}

}  // namespace

std::vector<NodeId> ode_solve(Graph& g, const OdeFunc& f, NodeId h0,
                              std::span<const double> times, const SolveConfig& cfg) {
    cfg.validate();
    f.validate();
    check_times(times);
    const int n_sub = cfg.substeps_per_interval;

    auto eval_field = [&](NodeId state, double t) {
        NodeId input = state;
        if (f.include_time) input = g.concat(state, g.scalar(t));
        return mlp_forward(g, f.spec, f.params, input);
    };

    std::vector<NodeId> out;
    out.reserve(times.size());
    NodeId state = h0;
    double prev_t = 0.0;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const double t = times[ti];
        if (t == prev_t) {
            out.push_back(state);
            continue;
        }
        const double dt = (t - prev_t) / n_sub;
        for (int s = 0; s < n_sub; ++s) {
            const double ts = prev_t + s * dt;
            if (cfg.method == SolveMethod::euler) {
                state = g.axpy(state, dt, eval_field(state, ts));
            } else {
                const NodeId k1 = eval_field(state, ts);
                const NodeId k2 = eval_field(g.axpy(state, dt / 2.0, k1), ts + dt / 2.0);
                const NodeId k3 = eval_field(g.axpy(state, dt / 2.0, k2), ts + dt / 2.0);
                const NodeId k4 = eval_field(g.axpy(state, dt, k3), ts + dt);
                const NodeId comb = g.add(g.add(k1, g.scale(g.add(k2, k3), 2.0)), k4);
                state = g.axpy(state, dt / 6.0, comb);
            }
            if (!g.value(state).all_finite()) nan_error(ti, s);
        }
        out.push_back(state);
        prev_t = t;
    }
    return out;
}

std::vector<Tensor> integrate(const VectorField& f, const Tensor& h0,
                              std::span<const double> times, const SolveConfig& cfg) {
    cfg.validate();
    check_times(times);
    const int n_sub = cfg.substeps_per_interval;
    const std::size_t d = h0.numel();

    Tensor state = h0;
    Tensor k1 = Tensor::zeros(d), k2 = Tensor::zeros(d), k3 = Tensor::zeros(d),
           k4 = Tensor::zeros(d), tmp = Tensor::zeros(d);

    auto step_euler = [&](double ts, double dt) {
        f(ts, state.values(), k1.values());
        // mirrors Graph::axpy: state + dt * k1
        state.add_scaled(k1, dt);
    };
    auto step_rk4 = [&](double ts, double dt) {
        f(ts, state.values(), k1.values());
        tmp = state;
        tmp.add_scaled(k1, dt / 2.0);
        f(ts + dt / 2.0, tmp.values(), k2.values());
        tmp = state;
        tmp.add_scaled(k2, dt / 2.0);
        f(ts + dt / 2.0, tmp.values(), k3.values());
        tmp = state;
        tmp.add_scaled(k3, dt);
        f(ts + dt, tmp.values(), k4.values());
        // k1 + 2*(k2 + k3) + k4, matching the recorded combination order
        for (std::size_t i = 0; i < d; ++i) {
            tmp[i] = (k1[i] + 2.0 * (k2[i] + k3[i])) + k4[i];
        }
        state.add_scaled(tmp, dt / 6.0);
    };

    std::vector<Tensor> out;
    out.reserve(times.size());
    double prev_t = 0.0;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const double t = times[ti];
        if (t == prev_t) {
            out.push_back(state);
            continue;
        }
        const double dt = (t - prev_t) / n_sub;
        for (int s = 0; s < n_sub; ++s) {
            const double ts = prev_t + s * dt;
            if (cfg.method == SolveMethod::euler) {
                step_euler(ts, dt);
            } else {
                step_rk4(ts, dt);
            }
            if (!state.all_finite()) nan_error(ti, s);
        }
        out.push_back(state);
        prev_t = t;
    }
    return out;
}

VectorField ExpDecayField::field() const {
    const double r = rate;
    return [r](double, std::span<const double> h, std::span<double> dhdt) {
        for (std::size_t i = 0; i < h.size(); ++i) dhdt[i] = -r * h[i];
    };
}

double ExpDecayField::solution(double h0, double t) const { return h0 * std::exp(-rate * t); }

VectorField GaussianBumpField::field() const {
    const double m = mu;
    const double s2 = sigma * sigma;
    return [m, s2](double t, std::span<const double> h, std::span<double> dhdt) {
        const double c = -(t - m) / s2;
        for (std::size_t i = 0; i < h.size(); ++i) dhdt[i] = c * h[i];
    };
}

double GaussianBumpField::solution(double h0, double t) const {
    return h0 * std::exp(-((t - mu) * (t - mu) - mu * mu) / (2.0 * sigma * sigma));
}

ConvergenceStudy convergence_order(const VectorField& f,
                                   const std::function<double(double)>& exact, double h0,
                                   double t_end, SolveMethod method,
                                   std::span<const int> substep_grid) {
    if (substep_grid.size() < 2) {
        throw std::invalid_argument("convergence_order: need at least two substep counts");
    }
    ConvergenceStudy study;
    const double truth = exact(t_end);
    const double times[1] = {t_end};
    for (int n : substep_grid) {
        SolveConfig cfg{method, n};
        const Tensor end = integrate(f, Tensor::scalar(h0), times, cfg).back();
        study.substeps.push_back(n);
        study.errors.push_back(std::abs(end[0] - truth));
    }
    for (double e : study.errors) {
        if (e == 0.0) return study;  // nothing to fit; order not applicable
    }
    // least-squares slope of log2(error) against log2(step)
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(study.errors.size());
    for (std::size_t i = 0; i < study.errors.size(); ++i) {
        const double x = std::log2(t_end / study.substeps[i]);
        const double y = std::log2(study.errors[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    study.order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return study;
}

}  // namespace recode
