#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "recode/data.hpp"
#include "recode/model.hpp"

namespace recode {

// 1-based rank with pessimistic tie handling: every tied item counts
// against the ground truth.
std::size_t rank_of_truth(std::span<const double> scores, std::size_t truth);

struct UserMetric {
    double recall = 0.0;
    double ndcg = 0.0;
};

// Single-ground-truth cutoff metrics: recall is a hit indicator,
// ndcg = 1 / log2(rank + 1) inside the cutoff.
UserMetric user_metrics(std::size_t rank, std::size_t k);

struct MetricSummary {
    std::string stratum = "overall";
    std::size_t users = 0;
    std::map<int, double> recall;  // K -> mean
    std::map<int, double> ndcg;
};

struct EvalResult {
    MetricSummary overall;
    std::vector<MetricSummary> strata;       // present when stratification is on
    std::vector<std::int32_t> user_ids;      // evaluated users, ascending
    std::vector<std::size_t> ranks;          // rank of the held-out item per user
    std::vector<double> user_repeat_ratios;  // personal repeat ratio per user
};

enum class SplitTarget { validation, test };

struct EvalOptions {
    std::vector<int> ks{50, 100};
    int strata_buckets = 0;  // 0 = no stratification; otherwise quantile buckets
    int threads = 0;         // 0 = auto, capped by RECODE_THREADS
    SplitTarget target = SplitTarget::test;
};

// Full-catalog ranking over every user that has the requested held-out
// target. Static scores are batched; repeat scores are added only for items
// the user consumed before the target time. Deterministic for any thread
// count.
EvalResult evaluate(const Model& model, const SplitDataset& split, const EvalOptions& opts = {});

// Rows: model,dataset,seed,stratum,K,recall,ndcg
void write_metrics_csv(const std::filesystem::path& path, const std::string& model_name,
                       const std::string& dataset, std::uint64_t seed, const EvalResult& result,
                       bool append = false);

void write_metrics_json(const std::filesystem::path& path, const std::string& model_name,
                        const std::string& dataset, std::uint64_t seed, const EvalResult& result);

}  // namespace recode
