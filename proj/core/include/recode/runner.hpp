#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "recode/data.hpp"
#include "recode/evaluator.hpp"
#include "recode/model.hpp"
#include "recode/trainer.hpp"

namespace recode {

// Flat key=value configuration with section-prefixed keys
// (e.g. train.batch_size=512). '#' starts a comment; keys may not repeat.
class KvConfig {
public:
    static KvConfig parse_file(const std::filesystem::path& path);
    static KvConfig parse_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const;
    std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                            std::vector<std::uint64_t> fallback) const;

    void set(const std::string& key, const std::string& value);
    // keys present in the file but never read by any getter
    std::vector<std::string> unread_keys() const;
    std::string serialize() const;  // sorted keys, one per line

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> read_;
};

struct RunConfig {
    // dataset: a TSV path or a synthetic recipe
    std::optional<std::string> data_path;
    ColumnSpec columns;
    SyntheticConfig synth;

    ModelSpec model;
    TrainConfig train;

    std::vector<int> eval_ks{50, 100};
    int strata_buckets = 0;
    int eval_threads = 0;

    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::filesystem::path out_dir = "out";

    // Parses, validates, and rejects unknown keys.
    static RunConfig from(const KvConfig& kv);
    static RunConfig from_file(const std::filesystem::path& path);

    // Every default materialized; reruns reproduce the run bit-for-bit
    // given the same seeds and thread settings.
    KvConfig resolved() const;
    std::string dataset_name() const;
    std::string arm_name() const { return model.arm_name(); }
    std::filesystem::path arm_dir() const { return out_dir / arm_name(); }
    std::filesystem::path seed_dir(std::uint64_t seed) const;
};

struct LoadedData {
    InteractionLog log;
    SplitDataset split;
    std::string name;
};
LoadedData load_dataset(const RunConfig& cfg);

// (value - base) / base, 0 when the base is not positive.
double relative_improvement(double base, double value);

// Command entry points. Each throws on error; the CLI turns that into a
// nonzero exit and an INCOMPLETE marker next to any partial outputs.
void cmd_synth(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_compare(const RunConfig& cfg);
// Numerics and solver verification suite; returns the number of failures.
int cmd_gradcheck();

// Builds the model for one seed (kernel arms are seeded from observed gap
// statistics) — shared by train/eval/compare.
Model build_model_for(const RunConfig& cfg, const SplitDataset& split, std::uint64_t seed);

}  // namespace recode
