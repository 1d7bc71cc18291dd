#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "recode/params.hpp"
#include "recode/tensor.hpp"

namespace recode {

enum class Activation : std::uint8_t { identity, tanh, relu, sigmoid };

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

// Reverse-mode tape. Operations record their inputs as they execute; nodes
// are created in topological order, so one reverse sweep visits each node
// exactly once. Single-threaded during record and backward.
class Graph {
public:
    explicit Graph(const ParameterStore& store) : store_(&store) {}

    // Leaves -------------------------------------------------------------
    NodeId constant(Tensor v);
    NodeId scalar(double v) { return constant(Tensor::scalar(v)); }
    // Full-tensor view of a parameter; cached so repeated uses share a node
    // and the gradient accumulates once per use.
    NodeId param(const Parameter& p);
    // Row select from a rank-2 parameter; gradients scatter-add into the row.
    NodeId param_row(const Parameter& p, std::size_t row);

    // Operations ----------------------------------------------------------
    // y = x*W + b; x is [n x k] or [k], W is [k x m], b is [m]
    NodeId affine(NodeId x, NodeId w, NodeId b);
    NodeId activation(NodeId x, Activation a);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    // a + alpha * b
    NodeId axpy(NodeId a, double alpha, NodeId b);
    NodeId scale(NodeId a, double alpha);
    NodeId concat(NodeId a, NodeId b);  // rank-1 operands
    NodeId dot(NodeId a, NodeId b);     // rank-1, equal length -> scalar
    NodeId sum_all(NodeId x);           // -> scalar
    // Pairwise ranking loss on a scalar margin m: softplus(-m) = -log sigmoid(m)
    NodeId bpr_loss(NodeId margin);
    // amplitude * sum_k exp(-rate * gap_k), rate = exp(log_rate)
    NodeId exp_kernel_sum(NodeId amplitude, NodeId log_rate, std::span<const double> gaps);
    // amplitude * sum_k exp(-((gap_k-mu)^2 - mu^2) / (2 sigma^2)), sigma = exp(log_sigma)
    NodeId gauss_kernel_sum(NodeId amplitude, NodeId mu, NodeId log_sigma,
                            std::span<const double> gaps);

    // Access --------------------------------------------------------------
    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    double scalar_value(NodeId id) const;
    std::size_t size() const { return nodes_.size(); }
    const ParameterStore& store() const { return *store_; }

    // Accumulates d(loss)/d(parameter) into `grads` for every parameter
    // reachable from `loss`. Unreached parameters keep their current value
    // (zero for a fresh buffer). Safe to call repeatedly on the same graph.
    void backward(NodeId loss, GradientBuffer& grads);

private:
    enum class Op : std::uint8_t {
        constant,
        leaf_param,
        leaf_row,
        affine,
        act_tanh,
        act_relu,
        act_sigmoid,
        add,
        sub,
        axpy,
        scale,
        concat,
        dot,
        sum_all,
        bpr_loss,
        exp_kernel,
        gauss_kernel,
    };

    struct Node {
        Op op;
        std::array<NodeId, 3> in{kNoNode, kNoNode, kNoNode};
        double aux = 0.0;
        const Parameter* param = nullptr;
        std::size_t row = 0;
        std::vector<double> extra;
        Tensor value;
        Tensor grad;
    };

    NodeId push(Node n);
    Node& node(NodeId id) { return nodes_[id]; }
    Tensor& ensure_grad(NodeId id);
    void backward_node(NodeId id, GradientBuffer& grads);
    [[noreturn]] void shape_error(const char* op, NodeId a, NodeId b) const;

    std::vector<Node> nodes_;
    const ParameterStore* store_;
    std::unordered_map<const Parameter*, NodeId> full_leaves_;
    std::unordered_map<const Parameter*, std::unordered_map<std::size_t, NodeId>> row_leaves_;
};

}  // namespace recode
