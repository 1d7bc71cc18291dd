#include "recode/backbone.hpp"

#include <cmath>
#include <stdexcept>

namespace recode {

EmbeddingTable make_embeddings(ParameterStore& store, const std::string& prefix,
                               std::int32_t num_users, std::int32_t num_items, std::size_t dim,
                               std::uint64_t seed) {
    if (num_users < 1 || num_items < 1 || dim < 1) {
        throw std::invalid_argument("make_embeddings: positive table sizes required");
    }
    auto init_table = [&](const std::string& name, std::int32_t rows) -> const Parameter* {
        Tensor t = Tensor::zeros(static_cast<std::size_t>(rows), dim);
        const double s = std::sqrt(6.0 / static_cast<double>(rows + static_cast<std::int32_t>(dim)));
        Rng rng = Rng::stream(seed, name);
        for (double& v : t.values()) v = rng.uniform(-s, s);
        return &store.create(name, std::move(t));
    };
    EmbeddingTable emb;
    emb.users = init_table(prefix + ".user_table", num_users);
    emb.items = init_table(prefix + ".item_table", num_items);
    emb.dim = dim;
    return emb;
}

BackboneSpec BackboneSpec::mf() { return BackboneSpec{BackboneKind::mf_dot, {}}; }

BackboneSpec BackboneSpec::tower_default(std::size_t dim) {
    BackboneSpec spec;
    spec.kind = BackboneKind::mlp_tower;
    spec.tower.input_width = 2 * dim;
    spec.tower.layers = {{dim, Activation::relu}, {1, Activation::identity}};
    return spec;
}

void BackboneSpec::validate(std::size_t dim) const {
    if (kind == BackboneKind::mlp_tower) {
        tower.validate();
        if (tower.input_width != 2 * dim) {
            throw std::invalid_argument("BackboneSpec: tower input width must be 2*dim");
        }
        if (tower.output_width() != 1) {
            throw std::invalid_argument("BackboneSpec: tower output width must be 1");
        }
    }
}

Backbone make_backbone(ParameterStore& store, const BackboneSpec& spec, std::int32_t num_users,
                       std::int32_t num_items, std::size_t dim, std::uint64_t seed) {
    spec.validate(dim);
    Backbone b;
    b.spec = spec;
    b.emb = make_embeddings(store, "backbone", num_users, num_items, dim, seed);
    if (spec.kind == BackboneKind::mlp_tower) {
        b.tower_params = make_mlp_params(store, "backbone.tower", spec.tower, seed);
    }
    return b;
}

NodeId embed_user(Graph& g, const Backbone& b, std::int32_t user) {
    if (user < 0 || static_cast<std::size_t>(user) >= b.emb.users->value.rows()) {
        throw std::out_of_range("embed_user: user id " + std::to_string(user) + " out of range");
    }
    return g.param_row(*b.emb.users, static_cast<std::size_t>(user));
}

NodeId embed_item(Graph& g, const Backbone& b, std::int32_t item) {
    if (item < 0 || static_cast<std::size_t>(item) >= b.emb.items->value.rows()) {
        throw std::out_of_range("embed_item: item id " + std::to_string(item) + " out of range");
    }
    return g.param_row(*b.emb.items, static_cast<std::size_t>(item));
}

std::pair<NodeId, NodeId> embed(Graph& g, const Backbone& b, std::int32_t user,
                                std::int32_t item) {
    return {embed_user(g, b, user), embed_item(g, b, item)};
}

NodeId static_score(Graph& g, const Backbone& b, NodeId e_u, NodeId e_i) {
    if (b.spec.kind == BackboneKind::mf_dot) return g.dot(e_u, e_i);
    NodeId out = mlp_forward(g, b.spec.tower, b.tower_params, g.concat(e_u, e_i));
    return g.sum_all(out);  // [1] -> scalar node
}

Tensor static_score_all(const Backbone& b, std::int32_t user) {
    if (user < 0 || static_cast<std::size_t>(user) >= b.emb.users->value.rows()) {
        throw std::out_of_range("static_score_all: user id out of range");
    }
    const Tensor& items = b.emb.items->value;
    const std::size_t m = items.rows();
    const std::size_t d = b.emb.dim;
    std::span<const double> u = b.emb.users->value.row(static_cast<std::size_t>(user));
    Tensor out = Tensor::zeros(m);

    if (b.spec.kind == BackboneKind::mf_dot) {
        for (std::size_t i = 0; i < m; ++i) {
            out[i] = kernels::dot(u.data(), items.row(i).data(), d);
        }
        return out;
    }
    // one row of (e_u || e_i) per item; the batched affine visits each row
    // with the same arithmetic as the per-item path
    Tensor batch = Tensor::zeros(m, 2 * d);
    for (std::size_t i = 0; i < m; ++i) {
        double* row = batch.data() + i * 2 * d;
        for (std::size_t k = 0; k < d; ++k) row[k] = u[k];
        std::span<const double> e_i = items.row(i);
        for (std::size_t k = 0; k < d; ++k) row[d + k] = e_i[k];
    }
    Tensor scores = mlp_forward(b.spec.tower, b.tower_params, batch);
    for (std::size_t i = 0; i < m; ++i) out[i] = scores[i];
    return out;
}

}  // namespace recode
