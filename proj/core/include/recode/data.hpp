#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace recode {

struct Interaction {
    std::int32_t user = 0;
    std::int32_t item = 0;
    std::int64_t timestamp = 0;  // seconds
};

struct Event {
    std::int32_t item = 0;
    std::int64_t time = 0;
};

struct UserHistory {
    std::int32_t user = 0;
    std::vector<Event> events;  // ascending by time, stable for ties
};

struct InteractionLog {
    std::vector<Interaction> interactions;
    std::int32_t num_users = 0;
    std::int32_t num_items = 0;
};

struct ColumnSpec {
    int user_col = 0;
    int item_col = 1;
    int time_col = 2;
    bool has_header = false;
};

struct IngestResult {
    InteractionLog log;
    std::vector<std::string> user_ids;  // dense index -> original id
    std::vector<std::string> item_ids;
    std::size_t duplicate_events = 0;  // identical (user, item, timestamp) rows kept
};

// Reads a UTF-8 TSV of interactions, densely re-indexing ids in order of
// first appearance. Rows are kept in file order; nothing is sorted here.
IngestResult ingest_tsv(const std::filesystem::path& path, const ColumnSpec& columns = {});

// Canonical TSV form: user<TAB>item<TAB>timestamp, no header.
void write_tsv(const std::filesystem::path& path, const InteractionLog& log);

std::vector<UserHistory> build_histories(const std::vector<Interaction>& interactions,
                                         std::int32_t num_users);
std::vector<UserHistory> build_histories(const InteractionLog& log);

struct SplitDataset {
    std::vector<UserHistory> histories;
    // per user: training target positions into the event list
    std::vector<std::vector<std::uint32_t>> train_positions;
    std::vector<std::optional<std::uint32_t>> val_position;
    std::vector<std::optional<std::uint32_t>> test_position;

    std::int32_t num_users() const { return static_cast<std::int32_t>(histories.size()); }
    std::size_t num_eval_users() const;
};

// Last event -> test, second-last -> validation, the rest -> train.
// Users with fewer than three events contribute every position to train.
SplitDataset leave_one_out(std::vector<UserHistory> histories);

enum class GapKind { exponential, gaussian, mixture };

struct GapProcess {
    GapKind kind = GapKind::exponential;
    double rate_per_day = 1.0;  // exponential component
    double mu_days = 7.0;       // gaussian component
    double sigma_days = 1.0;
    double weight = 0.5;  // mixture weight on the exponential component
    void validate() const;
};

struct SyntheticConfig {
    std::int32_t num_users = 100;
    std::int32_t num_items = 1000;
    std::int32_t interactions_per_user = 100;
    double repeat_prob = 0.35;
    GapProcess gap;
    double popularity_exponent = 1.0;
    std::uint64_t rng_seed = 1;
    void validate() const;
};

// Sequential per-user simulation. Each event is a repeat with probability
// repeat_prob (once anything has been consumed): a fresh inter-consumption
// gap is drawn from the gap process and the re-consumed item is chosen
// uniformly among previously consumed items old enough that the new
// timestamp still moves forward, so realized same-item gaps follow the
// configured process exactly. Other events pick a not-yet-consumed item
// from a Zipf popularity law a small uniform gap later. Timestamps are
// strictly increasing per user; byte-identical output for equal seeds.
InteractionLog generate_synthetic(const SyntheticConfig& cfg);

// Fraction of events whose item already occurred earlier in the same
// user's (time-ordered) history.
double repeat_ratio(const InteractionLog& log);

// Same notion for one user's history.
double user_repeat_ratio(const UserHistory& history);

}  // namespace recode
