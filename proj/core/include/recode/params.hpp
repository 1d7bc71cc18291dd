#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "recode/tensor.hpp"

namespace recode {

struct Parameter {
    std::string name;
    std::size_t index = 0;  // position in the owning store
    Tensor value;
};

// Registry of named trainable tensors. Parameter addresses are stable for
// the lifetime of the store.
class ParameterStore {
public:
    ParameterStore() = default;
    ParameterStore(const ParameterStore&) = delete;
    ParameterStore& operator=(const ParameterStore&) = delete;
    ParameterStore(ParameterStore&&) = default;
    ParameterStore& operator=(ParameterStore&&) = default;

    Parameter& create(std::string name, Tensor init);
    Parameter* find(std::string_view name);
    const Parameter* find(std::string_view name) const;

    std::size_t size() const { return params_.size(); }
    Parameter& at(std::size_t i) { return *params_[i]; }
    const Parameter& at(std::size_t i) const { return *params_[i]; }
    std::size_t total_values() const;

    std::vector<Tensor> snapshot_values() const;
    void restore_values(const std::vector<Tensor>& snapshot);

    // Checkpoint file: "RECODE-CKPT-1" header line followed by little-endian
    // binary records (name, shape, f64 values) for every parameter.
    void save(const std::filesystem::path& path) const;
    // Loads into this store; names and shapes must match exactly.
    void load(const std::filesystem::path& path);

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::unordered_map<std::string, Parameter*> by_name_;
};

// Reads a checkpoint without needing a matching store (inspection, tests).
std::map<std::string, Tensor> read_checkpoint(const std::filesystem::path& path);

// Per-parameter gradient accumulators, indexed like the store they were
// built from. Backward passes add into one of these; the optimizer reads it.
class GradientBuffer {
public:
    explicit GradientBuffer(const ParameterStore& store);

    Tensor& of(const Parameter& p) { return grads_[p.index]; }
    const Tensor& of(const Parameter& p) const { return grads_[p.index]; }
    Tensor& at(std::size_t i) { return grads_[i]; }
    const Tensor& at(std::size_t i) const { return grads_[i]; }
    std::size_t size() const { return grads_.size(); }

    void zero();
    // this += other, in fixed index order
    void add(const GradientBuffer& other);

private:
    std::vector<Tensor> grads_;
};

}  // namespace recode
