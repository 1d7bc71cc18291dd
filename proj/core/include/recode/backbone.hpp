#pragma once

#include <cstdint>
#include <utility>

#include "recode/graph.hpp"
#include "recode/mlp.hpp"

namespace recode {

struct EmbeddingTable {
    const Parameter* users = nullptr;
    const Parameter* items = nullptr;
    std::size_t dim = 0;
};

// Registers "<prefix>.user_table" / "<prefix>.item_table", each uniform in
// [-s, s] with s = sqrt(6 / (rows + dim)).
EmbeddingTable make_embeddings(ParameterStore& store, const std::string& prefix,
                               std::int32_t num_users, std::int32_t num_items, std::size_t dim,
                               std::uint64_t seed);

enum class BackboneKind { mf_dot, mlp_tower };

struct BackboneSpec {
    BackboneKind kind = BackboneKind::mf_dot;
    MlpSpec tower;  // used by mlp_tower; maps 2*dim -> 1

    static BackboneSpec mf();
    // [2d -> d relu -> 1]
    static BackboneSpec tower_default(std::size_t dim);
    void validate(std::size_t dim) const;
};

struct Backbone {
    BackboneSpec spec;
    EmbeddingTable emb;
    MlpParams tower_params;  // empty for mf_dot
};

Backbone make_backbone(ParameterStore& store, const BackboneSpec& spec, std::int32_t num_users,
                       std::int32_t num_items, std::size_t dim, std::uint64_t seed);

NodeId embed_user(Graph& g, const Backbone& b, std::int32_t user);
NodeId embed_item(Graph& g, const Backbone& b, std::int32_t item);
std::pair<NodeId, NodeId> embed(Graph& g, const Backbone& b, std::int32_t user,
                                std::int32_t item);

// mf_dot: <e_u, e_i>; mlp_tower: MLP(e_u || e_i). Scalar node.
NodeId static_score(Graph& g, const Backbone& b, NodeId e_u, NodeId e_i);

// Batched scores for every item, matching the per-item graph path exactly.
Tensor static_score_all(const Backbone& b, std::int32_t user);

}  // namespace recode
