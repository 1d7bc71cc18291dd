#include "recode/params.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace recode {

namespace {

constexpr std::string_view kCheckpointMagic = "RECODE-CKPT-1";

template <typename T>
void write_raw(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

void write_tensor_record(std::ostream& os, const std::string& name, const Tensor& t) {
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) {
        write_raw<std::uint64_t>(os, static_cast<std::uint64_t>(t.dim(d)));
    }
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

std::pair<std::string, Tensor> read_tensor_record(std::istream& is) {
    const auto name_len = read_raw<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw std::runtime_error("checkpoint: truncated name");
    const auto rank = read_raw<std::uint8_t>(is);
    if (rank != 1 && rank != 2) {
        throw std::runtime_error("checkpoint: unsupported rank for tensor '" + name + "'");
    }
    std::uint64_t d0 = read_raw<std::uint64_t>(is);
    std::uint64_t d1 = rank == 2 ? read_raw<std::uint64_t>(is) : 0;
    Tensor t = rank == 2 ? Tensor::zeros(d0, d1) : Tensor::zeros(d0);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated values for tensor '" + name + "'");
    return {std::move(name), std::move(t)};
}

std::ifstream open_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open '" + path.string() + "'");
    std::string magic;
    std::getline(is, magic);
    if (magic != kCheckpointMagic) {
        throw std::runtime_error("checkpoint: bad header in '" + path.string() +
                                 "' (expected " + std::string(kCheckpointMagic) + ")");
    }
    return is;
}

}  // namespace

Parameter& ParameterStore::create(std::string name, Tensor init) {
    if (by_name_.count(name) != 0) {
        throw std::invalid_argument("ParameterStore: duplicate parameter '" + name + "'");
    }
    auto p = std::make_unique<Parameter>();
    p->name = std::move(name);
    p->index = params_.size();
    p->value = std::move(init);
    Parameter& ref = *p;
    by_name_.emplace(ref.name, &ref);
    params_.push_back(std::move(p));
    return ref;
}

Parameter* ParameterStore::find(std::string_view name) {
    auto it = by_name_.find(std::string(name));
    return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    return it == by_name_.end() ? nullptr : it->second;
}

std::size_t ParameterStore::total_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.numel();
    return n;
}

std::vector<Tensor> ParameterStore::snapshot_values() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->value);
    return out;
}

void ParameterStore::restore_values(const std::vector<Tensor>& snapshot) {
    if (snapshot.size() != params_.size()) {
        throw std::invalid_argument("ParameterStore::restore_values: size mismatch");
    }
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        if (!snapshot[i].same_shape(params_[i]->value)) {
            throw std::invalid_argument("ParameterStore::restore_values: shape mismatch for '" +
                                        params_[i]->name + "'");
        }
        params_[i]->value = snapshot[i];
    }
}

void ParameterStore::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot write '" + path.string() + "'");
    os << kCheckpointMagic << "\n";
    write_raw<std::uint64_t>(os, static_cast<std::uint64_t>(params_.size()));
    for (const auto& p : params_) {
        if (!p->value.all_finite()) {
            throw std::runtime_error("checkpoint: non-finite values in parameter '" + p->name +
                                     "'");
        }
        write_tensor_record(os, p->name, p->value);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for '" + path.string() + "'");
}

void ParameterStore::load(const std::filesystem::path& path) {
    std::ifstream is = open_checkpoint(path);
    const auto count = read_raw<std::uint64_t>(is);
    if (count != params_.size()) {
        throw std::runtime_error("checkpoint: parameter count mismatch in '" + path.string() +
                                 "' (file has " + std::to_string(count) + ", store has " +
                                 std::to_string(params_.size()) + ")");
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        auto [name, t] = read_tensor_record(is);
        Parameter* p = find(name);
        if (p == nullptr) {
            throw std::runtime_error("checkpoint: unknown parameter '" + name + "'");
        }
        if (!t.same_shape(p->value)) {
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "' (file " +
                                     t.shape_str() + ", store " + p->value.shape_str() + ")");
        }
        p->value = std::move(t);
    }
}

std::map<std::string, Tensor> read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is = open_checkpoint(path);
    const auto count = read_raw<std::uint64_t>(is);
    std::map<std::string, Tensor> out;
    for (std::uint64_t i = 0; i < count; ++i) {
        auto [name, t] = read_tensor_record(is);
        out.emplace(std::move(name), std::move(t));
    }
    return out;
}

GradientBuffer::GradientBuffer(const ParameterStore& store) {
    grads_.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        const Tensor& v = store.at(i).value;
        grads_.push_back(v.rank() == 2 ? Tensor::zeros(v.dim(0), v.dim(1))
                                       : Tensor::zeros(v.dim(0)));
    }
}

void GradientBuffer::zero() {
    for (Tensor& g : grads_) g.set_zero();
}

void GradientBuffer::add(const GradientBuffer& other) {
    if (other.grads_.size() != grads_.size()) {
        throw std::invalid_argument("GradientBuffer::add: incompatible buffers");
    }
    for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i].add(other.grads_[i]);
}

}  // namespace recode
