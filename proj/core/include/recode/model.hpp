#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "recode/backbone.hpp"
#include "recode/repeat.hpp"

namespace recode {

enum class RepeatArm { none, ode, exponential, gaussian };

std::string to_string(RepeatArm arm);
std::string to_string(BackboneKind kind);

struct ModelSpec {
    BackboneSpec backbone = BackboneSpec::mf();
    std::size_t dim = 32;
    RepeatArm arm = RepeatArm::ode;
    RepeatModuleSpec repeat;  // dim is overwritten from `dim` at build
    // observed repeat-gap statistics in solver units, used to seed the
    // trainable kernels of the parametric arms
    double kernel_init_gap_mean = 1.0;
    double kernel_init_gap_std = 1.0;

    std::string arm_name() const;
};

// The full scorer. Move-only: the backbone and modules hold pointers into
// the owned parameter store.
struct Model {
    ModelSpec spec;
    ParameterStore store;
    Backbone backbone;
    std::optional<RepeatModule> repeat;
    std::optional<ParametricModule> parametric;
    std::int32_t num_users = 0;
    std::int32_t num_items = 0;

    static Model build(const ModelSpec& spec, std::int32_t num_users, std::int32_t num_items,
                       std::uint64_t seed);

    // R = static + repeat-intention; reduces to the bare backbone node when
    // the gap list is empty or no repeat arm is configured.
    NodeId fused(Graph& g, std::int32_t user, std::int32_t item, const RepeatGaps& gaps) const;

    bool has_repeat_arm() const { return spec.arm != RepeatArm::none; }
    const GapConfig& gap_config() const { return spec.repeat.gaps; }
};

}  // namespace recode
