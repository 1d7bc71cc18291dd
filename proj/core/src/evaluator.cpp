#include "recode/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "recode/threading.hpp"

namespace recode {

std::size_t rank_of_truth(std::span<const double> scores, std::size_t truth) {
    const double s = scores[truth];
    std::size_t greater = 0;
    std::size_t tied = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > s) {
            ++greater;
        } else if (scores[i] == s && i != truth) {
            ++tied;
        }
    }
    return 1 + greater + tied;
}

UserMetric user_metrics(std::size_t rank, std::size_t k) {
    if (rank == 0) throw std::invalid_argument("user_metrics: ranks are 1-based");
    UserMetric m;
    if (rank <= k) {
        m.recall = 1.0;
        m.ndcg = 1.0 / std::log2(static_cast<double>(rank) + 1.0);
    }
    return m;
}

namespace {

struct UserEval {
    std::int32_t user = 0;
    std::size_t rank = 0;
    double repeat_ratio = 0.0;
};

MetricSummary summarize(const std::vector<UserEval>& evals, std::span<const std::size_t> subset,
                        const std::vector<int>& ks, std::string stratum) {
    MetricSummary s;
    s.stratum = std::move(stratum);
    s.users = subset.size();
    for (int k : ks) {
        double recall = 0.0;
        double ndcg = 0.0;
        for (std::size_t idx : subset) {
            const UserMetric m = user_metrics(evals[idx].rank, static_cast<std::size_t>(k));
            recall += m.recall;
            ndcg += m.ndcg;
        }
        const double n = subset.empty() ? 1.0 : static_cast<double>(subset.size());
        s.recall[k] = recall / n;
        s.ndcg[k] = ndcg / n;
    }
    return s;
}

}  // namespace

EvalResult evaluate(const Model& model, const SplitDataset& split, const EvalOptions& opts) {
    if (opts.ks.empty()) throw std::invalid_argument("evaluate: no cutoffs requested");

    std::vector<std::size_t> eval_users;
    for (std::size_t u = 0; u < split.histories.size(); ++u) {
        const auto& pos = opts.target == SplitTarget::test ? split.test_position[u]
                                                           : split.val_position[u];
        if (pos.has_value()) eval_users.push_back(u);
    }

    std::vector<UserEval> evals(eval_users.size());
    const int threads = resolve_threads(opts.threads);
    const std::size_t n_chunks =
        std::min<std::size_t>(eval_users.size(), static_cast<std::size_t>(threads) * 8 + 1);
    const std::size_t per_chunk = (eval_users.size() + n_chunks - 1) / std::max<std::size_t>(n_chunks, 1);

    parallel_chunks(n_chunks, threads, [&](std::size_t chunk) {
        const std::size_t begin = chunk * per_chunk;
        const std::size_t end = std::min(begin + per_chunk, eval_users.size());
        std::vector<std::int32_t> candidates;
        for (std::size_t slot = begin; slot < end; ++slot) {
            const std::size_t u = eval_users[slot];
            const UserHistory& hist = split.histories[u];
            const std::uint32_t target_pos = opts.target == SplitTarget::test
                                                 ? *split.test_position[u]
                                                 : *split.val_position[u];
            const Event target = hist.events[target_pos];

            Tensor scores = static_score_all(model.backbone, hist.user);
            if (model.has_repeat_arm()) {
                // distinct items consumed strictly before the target time
                candidates.clear();
                std::unordered_set<std::int32_t> seen;
                for (const Event& ev : hist.events) {
                    if (ev.time >= target.time) break;
                    if (seen.insert(ev.item).second) candidates.push_back(ev.item);
                }
                for (std::int32_t item : candidates) {
                    const RepeatGaps gaps =
                        extract_gaps(hist, item, target.time, model.gap_config());
                    if (gaps.empty()) continue;
                    Graph g(model.store);
                    const NodeId rep =
                        model.spec.arm == RepeatArm::ode
                            ? repeat_score(g, *model.repeat, embed_user(g, model.backbone, hist.user),
                                           embed_item(g, model.backbone, item), gaps)
                            : parametric_score(g, *model.parametric, gaps);
                    scores[static_cast<std::size_t>(item)] += g.scalar_value(rep);
                }
            }
            UserEval& out = evals[slot];
            out.user = hist.user;
            out.rank = rank_of_truth(scores.values(), static_cast<std::size_t>(target.item));
            out.repeat_ratio = user_repeat_ratio(hist);
        }
    });

    EvalResult result;
    result.user_ids.reserve(evals.size());
    result.ranks.reserve(evals.size());
    for (const UserEval& e : evals) {
        result.user_ids.push_back(e.user);
        result.ranks.push_back(e.rank);
        result.user_repeat_ratios.push_back(e.repeat_ratio);
    }

    std::vector<std::size_t> all(evals.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    result.overall = summarize(evals, all, opts.ks, "overall");

    if (opts.strata_buckets > 0 && !evals.empty()) {
        const std::size_t buckets = static_cast<std::size_t>(opts.strata_buckets);
        // quantile edges over the evaluated users' personal repeat ratios
        std::vector<double> ratios;
        ratios.reserve(evals.size());
        for (const UserEval& e : evals) ratios.push_back(e.repeat_ratio);
        std::sort(ratios.begin(), ratios.end());
        std::vector<double> edges;  // upper edge per bucket, last = +inf
        for (std::size_t b = 1; b < buckets; ++b) {
            const std::size_t idx = b * ratios.size() / buckets;
            edges.push_back(ratios[std::min(idx, ratios.size() - 1)]);
        }
        std::vector<std::vector<std::size_t>> members(buckets);
        for (std::size_t i = 0; i < evals.size(); ++i) {
            std::size_t b = 0;
            while (b < edges.size() && evals[i].repeat_ratio >= edges[b]) ++b;
            members[b].push_back(i);
        }
        for (std::size_t b = 0; b < buckets; ++b) {
            const double lo = b == 0 ? 0.0 : edges[b - 1];
            const std::string hi =
                b < edges.size() ? std::to_string(edges[b]) : "1";
            std::string label = "repeat_ratio[" + std::to_string(lo) + "," + hi +
                                (b < edges.size() ? ")" : "]");
            result.strata.push_back(summarize(evals, members[b], opts.ks, std::move(label)));
        }
    }
    return result;
}

void write_metrics_csv(const std::filesystem::path& path, const std::string& model_name,
                       const std::string& dataset, std::uint64_t seed, const EvalResult& result,
                       bool append) {
    std::ofstream os(path, append ? std::ios::app : std::ios::out);
    if (!os) throw std::runtime_error("write_metrics_csv: cannot write '" + path.string() + "'");
    if (!append) os << "model,dataset,seed,stratum,K,recall,ndcg\n";
    auto emit = [&](const MetricSummary& s) {
        for (const auto& [k, recall] : s.recall) {
            os << model_name << ',' << dataset << ',' << seed << ',' << s.stratum << ',' << k
               << ',' << recall << ',' << s.ndcg.at(k) << '\n';
        }
    };
    emit(result.overall);
    for (const MetricSummary& s : result.strata) emit(s);
}

void write_metrics_json(const std::filesystem::path& path, const std::string& model_name,
                        const std::string& dataset, std::uint64_t seed,
                        const EvalResult& result) {
    nlohmann::json j;
    j["model"] = model_name;
    j["dataset"] = dataset;
    j["seed"] = seed;
    auto dump = [](const MetricSummary& s) {
        nlohmann::json o;
        o["stratum"] = s.stratum;
        o["users"] = s.users;
        for (const auto& [k, v] : s.recall) o["recall@" + std::to_string(k)] = v;
        for (const auto& [k, v] : s.ndcg) o["ndcg@" + std::to_string(k)] = v;
        return o;
    };
    j["overall"] = dump(result.overall);
    if (!result.strata.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const MetricSummary& s : result.strata) arr.push_back(dump(s));
        j["strata"] = arr;
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_metrics_json: cannot write '" + path.string() + "'");
    os << j.dump(2) << "\n";
}

}  // namespace recode
