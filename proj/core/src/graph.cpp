#include "recode/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace recode {

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Graph::shape_error(const char* op, NodeId a, NodeId b) const {
    std::string msg = std::string("Graph::") + op + ": shape mismatch " +
                      nodes_[a].value.shape_str();
    if (b != kNoNode) msg += " vs " + nodes_[b].value.shape_str();
    throw std::invalid_argument(msg);
}

double Graph::scalar_value(NodeId id) const {
    const Tensor& v = nodes_[id].value;
    if (v.numel() != 1) {
        throw std::invalid_argument("Graph::scalar_value: node is not scalar, shape " +
                                    v.shape_str());
    }
    return v[0];
}

NodeId Graph::constant(Tensor v) {
    Node n;
    n.op = Op::constant;
    n.value = std::move(v);
    return push(std::move(n));
}

NodeId Graph::param(const Parameter& p) {
    auto it = full_leaves_.find(&p);
    if (it != full_leaves_.end()) return it->second;
    Node n;
    n.op = Op::leaf_param;
    n.param = &p;
    n.value = p.value;
    NodeId id = push(std::move(n));
    full_leaves_.emplace(&p, id);
    return id;
}

NodeId Graph::param_row(const Parameter& p, std::size_t row) {
    if (p.value.rank() != 2 || row >= p.value.rows()) {
        throw std::out_of_range("Graph::param_row: row " + std::to_string(row) +
                                " out of range for parameter '" + p.name + "' " +
                                p.value.shape_str());
    }
    auto& rows = row_leaves_[&p];
    auto it = rows.find(row);
    if (it != rows.end()) return it->second;
    Node n;
    n.op = Op::leaf_row;
    n.param = &p;
    n.row = row;
    n.value = Tensor::vector(p.value.row(row));
    NodeId id = push(std::move(n));
    rows.emplace(row, id);
    return id;
}

NodeId Graph::affine(NodeId x, NodeId w, NodeId b) {
    const Tensor& xv = nodes_[x].value;
    const Tensor& wv = nodes_[w].value;
    const Tensor& bv = nodes_[b].value;
    if (wv.rank() != 2 || bv.rank() != 1 || bv.dim(0) != wv.dim(1)) shape_error("affine", w, b);
    const std::size_t k = wv.dim(0);
    const std::size_t m = wv.dim(1);
    const std::size_t rows = xv.rank() == 2 ? xv.dim(0) : 1;
    const std::size_t xcols = xv.rank() == 2 ? xv.dim(1) : xv.dim(0);
    if (xcols != k) shape_error("affine", x, w);

    Node n;
    n.op = Op::affine;
    n.in = {x, w, b};
    n.value = xv.rank() == 2 ? Tensor::zeros(rows, m) : Tensor::zeros(m);
    kernels::affine(xv.data(), rows, k, wv.data(), m, bv.data(), n.value.data());
    return push(std::move(n));
}

NodeId Graph::activation(NodeId x, Activation a) {
    if (a == Activation::identity) return x;
    Node n;
    n.in = {x, kNoNode, kNoNode};
    n.value = nodes_[x].value;
    switch (a) {
        case Activation::tanh:
            n.op = Op::act_tanh;
            kernels::tanh_inplace(n.value.data(), n.value.numel());
            break;
        case Activation::relu:
            n.op = Op::act_relu;
            kernels::relu_inplace(n.value.data(), n.value.numel());
            break;
        case Activation::sigmoid:
            n.op = Op::act_sigmoid;
            kernels::sigmoid_inplace(n.value.data(), n.value.numel());
            break;
        case Activation::identity:
            break;
    }
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    if (!nodes_[a].value.same_shape(nodes_[b].value)) shape_error("add", a, b);
    Node n;
    n.op = Op::add;
    n.in = {a, b, kNoNode};
    n.value = nodes_[a].value;
    n.value.add(nodes_[b].value);
    return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
    if (!nodes_[a].value.same_shape(nodes_[b].value)) shape_error("sub", a, b);
    Node n;
    n.op = Op::sub;
    n.in = {a, b, kNoNode};
    n.value = nodes_[a].value;
    n.value.add_scaled(nodes_[b].value, -1.0);
    return push(std::move(n));
}

NodeId Graph::axpy(NodeId a, double alpha, NodeId b) {
    if (!nodes_[a].value.same_shape(nodes_[b].value)) shape_error("axpy", a, b);
    Node n;
    n.op = Op::axpy;
    n.in = {a, b, kNoNode};
    n.aux = alpha;
    n.value = nodes_[a].value;
    n.value.add_scaled(nodes_[b].value, alpha);
    return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double alpha) {
    Node n;
    n.op = Op::scale;
    n.in = {a, kNoNode, kNoNode};
    n.aux = alpha;
    n.value = nodes_[a].value;
    for (double& v : n.value.values()) v *= alpha;
    return push(std::move(n));
}

NodeId Graph::concat(NodeId a, NodeId b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    if (av.rank() != 1 || bv.rank() != 1) shape_error("concat", a, b);
    Node n;
    n.op = Op::concat;
    n.in = {a, b, kNoNode};
    n.value = Tensor::zeros(av.numel() + bv.numel());
    double* out = n.value.data();
    for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i];
    for (std::size_t i = 0; i < bv.numel(); ++i) out[av.numel() + i] = bv[i];
    return push(std::move(n));
}

NodeId Graph::dot(NodeId a, NodeId b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    if (av.rank() != 1 || bv.rank() != 1 || av.numel() != bv.numel()) shape_error("dot", a, b);
    Node n;
    n.op = Op::dot;
    n.in = {a, b, kNoNode};
    n.value = Tensor::scalar(kernels::dot(av.data(), bv.data(), av.numel()));
    return push(std::move(n));
}

NodeId Graph::sum_all(NodeId x) {
    Node n;
    n.op = Op::sum_all;
    n.in = {x, kNoNode, kNoNode};
    n.value = Tensor::scalar(nodes_[x].value.sum());
    return push(std::move(n));
}

NodeId Graph::bpr_loss(NodeId margin) {
    if (nodes_[margin].value.numel() != 1) shape_error("bpr_loss", margin, kNoNode);
    Node n;
    n.op = Op::bpr_loss;
    n.in = {margin, kNoNode, kNoNode};
    n.value = Tensor::scalar(kernels::softplus(-nodes_[margin].value[0]));
    return push(std::move(n));
}

NodeId Graph::exp_kernel_sum(NodeId amplitude, NodeId log_rate, std::span<const double> gaps) {
    if (nodes_[amplitude].value.numel() != 1 || nodes_[log_rate].value.numel() != 1) {
        shape_error("exp_kernel_sum", amplitude, log_rate);
    }
    const double alpha = nodes_[amplitude].value[0];
    const double rate = std::exp(nodes_[log_rate].value[0]);
    double k = 0.0;
    for (double g : gaps) k += std::exp(-rate * g);
    Node n;
    n.op = Op::exp_kernel;
    n.in = {amplitude, log_rate, kNoNode};
    n.extra.assign(gaps.begin(), gaps.end());
    n.value = Tensor::scalar(alpha * k);
    return push(std::move(n));
}

NodeId Graph::gauss_kernel_sum(NodeId amplitude, NodeId mu, NodeId log_sigma,
                               std::span<const double> gaps) {
    if (nodes_[amplitude].value.numel() != 1 || nodes_[mu].value.numel() != 1 ||
        nodes_[log_sigma].value.numel() != 1) {
        shape_error("gauss_kernel_sum", amplitude, mu);
    }
    const double alpha = nodes_[amplitude].value[0];
    const double m = nodes_[mu].value[0];
    const double sigma = std::exp(nodes_[log_sigma].value[0]);
    double k = 0.0;
    for (double g : gaps) {
        k += std::exp(-((g - m) * (g - m) - m * m) / (2.0 * sigma * sigma));
    }
    Node n;
    n.op = Op::gauss_kernel;
    n.in = {amplitude, mu, log_sigma};
    n.extra.assign(gaps.begin(), gaps.end());
    n.value = Tensor::scalar(alpha * k);
    return push(std::move(n));
}

Tensor& Graph::ensure_grad(NodeId id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) {
        const Tensor& v = n.value;
        n.grad = v.rank() == 2 ? Tensor::zeros(v.dim(0), v.dim(1)) : Tensor::zeros(v.dim(0));
    }
    return n.grad;
}

void Graph::backward(NodeId loss, GradientBuffer& grads) {
    if (nodes_[loss].value.numel() != 1) {
        throw std::invalid_argument("Graph::backward: loss must be scalar, got shape " +
                                    nodes_[loss].value.shape_str());
    }
    for (Node& n : nodes_) n.grad = Tensor{};
    ensure_grad(loss)[0] = 1.0;
    for (NodeId i = loss;; --i) {
        if (!nodes_[i].grad.empty()) backward_node(i, grads);
        if (i == 0) break;
    }
}

void Graph::backward_node(NodeId id, GradientBuffer& grads) {
    Node& n = nodes_[id];
    const Tensor& g = n.grad;
    switch (n.op) {
        case Op::constant:
            break;
        case Op::leaf_param:
            grads.of(*n.param).add(g);
            break;
        case Op::leaf_row: {
            std::span<double> row = grads.of(*n.param).row(n.row);
            const double* gd = g.data();
            for (std::size_t i = 0; i < row.size(); ++i) row[i] += gd[i];
            break;
        }
        case Op::affine: {
            const Tensor& xv = nodes_[n.in[0]].value;
            const Tensor& wv = nodes_[n.in[1]].value;
            const std::size_t k = wv.dim(0);
            const std::size_t m = wv.dim(1);
            const std::size_t rows = xv.rank() == 2 ? xv.dim(0) : 1;
            Tensor& dx = ensure_grad(n.in[0]);
            Tensor& dw = ensure_grad(n.in[1]);
            Tensor& db = ensure_grad(n.in[2]);
            const double* gd = g.data();
            const double* xd = xv.data();
            const double* wd = wv.data();
            double* dxd = dx.data();
            double* dwd = dw.data();
            double* dbd = db.data();
            for (std::size_t i = 0; i < rows; ++i) {
                const double* gi = gd + i * m;
                const double* xi = xd + i * k;
                double* dxi = dxd + i * k;
                for (std::size_t j = 0; j < m; ++j) dbd[j] += gi[j];
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double* wk = wd + kk * m;
                    double* dwk = dwd + kk * m;
                    double acc = 0.0;
                    const double xik = xi[kk];
                    for (std::size_t j = 0; j < m; ++j) {
                        acc += gi[j] * wk[j];
                        dwk[j] += xik * gi[j];
                    }
                    dxi[kk] += acc;
                }
            }
            break;
        }
        case Op::act_tanh: {
            Tensor& dx = ensure_grad(n.in[0]);
            const double* y = n.value.data();
            const double* gd = g.data();
            double* dxd = dx.data();
            for (std::size_t i = 0; i < n.value.numel(); ++i) {
                dxd[i] += gd[i] * (1.0 - y[i] * y[i]);
            }
            break;
        }
        case Op::act_relu: {
            Tensor& dx = ensure_grad(n.in[0]);
            const double* x = nodes_[n.in[0]].value.data();
            const double* gd = g.data();
            double* dxd = dx.data();
            for (std::size_t i = 0; i < n.value.numel(); ++i) {
                if (x[i] > 0.0) dxd[i] += gd[i];
            }
            break;
        }
        case Op::act_sigmoid: {
            Tensor& dx = ensure_grad(n.in[0]);
            const double* y = n.value.data();
            const double* gd = g.data();
            double* dxd = dx.data();
            for (std::size_t i = 0; i < n.value.numel(); ++i) {
                dxd[i] += gd[i] * y[i] * (1.0 - y[i]);
            }
            break;
        }
        case Op::add:
            ensure_grad(n.in[0]).add(g);
            ensure_grad(n.in[1]).add(g);
            break;
        case Op::sub:
            ensure_grad(n.in[0]).add(g);
            ensure_grad(n.in[1]).add_scaled(g, -1.0);
            break;
        case Op::axpy:
            ensure_grad(n.in[0]).add(g);
            ensure_grad(n.in[1]).add_scaled(g, n.aux);
            break;
        case Op::scale:
            ensure_grad(n.in[0]).add_scaled(g, n.aux);
            break;
        case Op::concat: {
            Tensor& da = ensure_grad(n.in[0]);
            Tensor& db = ensure_grad(n.in[1]);
            const double* gd = g.data();
            double* dad = da.data();
            double* dbd = db.data();
            for (std::size_t i = 0; i < da.numel(); ++i) dad[i] += gd[i];
            for (std::size_t i = 0; i < db.numel(); ++i) dbd[i] += gd[da.numel() + i];
            break;
        }
        case Op::dot: {
            const double g0 = g[0];
            ensure_grad(n.in[0]).add_scaled(nodes_[n.in[1]].value, g0);
            ensure_grad(n.in[1]).add_scaled(nodes_[n.in[0]].value, g0);
            break;
        }
        case Op::sum_all: {
            Tensor& dx = ensure_grad(n.in[0]);
            const double g0 = g[0];
            for (double& v : dx.values()) v += g0;
            break;
        }
        case Op::bpr_loss: {
            // d softplus(-m)/dm = sigmoid(m) - 1
            const double m = nodes_[n.in[0]].value[0];
            ensure_grad(n.in[0])[0] += g[0] * (kernels::sigmoid(m) - 1.0);
            break;
        }
        case Op::exp_kernel: {
            const double g0 = g[0];
            const double alpha = nodes_[n.in[0]].value[0];
            const double rate = std::exp(nodes_[n.in[1]].value[0]);
            double k = 0.0;
            double weighted = 0.0;
            for (double gap : n.extra) {
                const double e = std::exp(-rate * gap);
                k += e;
                weighted += gap * e;
            }
            ensure_grad(n.in[0])[0] += g0 * k;
            // d/d log_rate = -alpha * rate * sum gap*exp(-rate*gap)
            ensure_grad(n.in[1])[0] += g0 * (-alpha * rate * weighted);
            break;
        }
        case Op::gauss_kernel: {
            const double g0 = g[0];
            const double alpha = nodes_[n.in[0]].value[0];
            const double m = nodes_[n.in[1]].value[0];
            const double sigma = std::exp(nodes_[n.in[2]].value[0]);
            const double s2 = sigma * sigma;
            double k = 0.0;
            double dmu = 0.0;
            double dls = 0.0;
            for (double gap : n.extra) {
                const double x = (gap - m) * (gap - m) - m * m;
                const double e = std::exp(-x / (2.0 * s2));
                k += e;
                dmu += e * (gap / s2);
                dls += e * (x / s2);
            }
            ensure_grad(n.in[0])[0] += g0 * k;
            ensure_grad(n.in[1])[0] += g0 * alpha * dmu;
            ensure_grad(n.in[2])[0] += g0 * alpha * dls;
            break;
        }
    }
}

}  // namespace recode
