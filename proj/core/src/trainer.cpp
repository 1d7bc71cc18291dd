#include "recode/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "recode/evaluator.hpp"
#include "recode/graph.hpp"
#include "recode/threading.hpp"

namespace recode {

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("TrainConfig: learning_rate must be positive");
    }
    if (weight_decay < 0.0) {
        throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
    }
    if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (eval_k < 1) throw std::invalid_argument("TrainConfig: eval_k must be >= 1");
}

Adam::Adam(const ParameterStore& store) {
    m_.reserve(store.size());
    v_.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        const Tensor& val = store.at(i).value;
        Tensor z = val.rank() == 2 ? Tensor::zeros(val.dim(0), val.dim(1))
                                   : Tensor::zeros(val.dim(0));
        m_.push_back(z);
        v_.push_back(std::move(z));
    }
}

void Adam::step(ParameterStore& store, const GradientBuffer& grads, double lr,
                double weight_decay) {
    if (grads.size() != m_.size() || store.size() != m_.size()) {
        throw std::invalid_argument("Adam::step: buffer does not match optimizer state");
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < m_.size(); ++i) {
        Tensor& theta = store.at(i).value;
        const Tensor& grad = grads.at(i);
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        double* td = theta.data();
        const double* gd = grad.data();
        double* md = m.data();
        double* vd = v.data();
        for (std::size_t c = 0; c < theta.numel(); ++c) {
            const double g = gd[c] + weight_decay * td[c];
            md[c] = kBeta1 * md[c] + (1.0 - kBeta1) * g;
            vd[c] = kBeta2 * vd[c] + (1.0 - kBeta2) * g * g;
            const double mhat = md[c] / bc1;
            const double vhat = vd[c] / bc2;
            td[c] -= lr * mhat / (std::sqrt(vhat) + kEps);
        }
    }
}

std::int32_t sample_negative(const std::vector<std::int32_t>& consumed_sorted,
                             std::int32_t num_items, Rng& rng) {
    const auto consumed = static_cast<std::int32_t>(consumed_sorted.size());
    if (consumed >= num_items) {
        throw std::runtime_error("sample_negative: user has consumed the entire catalog");
    }
    for (int attempt = 0; attempt < 64; ++attempt) {
        const auto candidate =
            static_cast<std::int32_t>(rng.uniform_index(static_cast<std::size_t>(num_items)));
        if (!std::binary_search(consumed_sorted.begin(), consumed_sorted.end(), candidate)) {
            return candidate;
        }
    }
    // dense history; index directly into the complement
    auto result = static_cast<std::int32_t>(
        rng.uniform_index(static_cast<std::size_t>(num_items - consumed)));
    for (const std::int32_t c : consumed_sorted) {
        if (c <= result) {
            ++result;
        } else {
            break;
        }
    }
    return result;
}

double bpr_loss(double pos_score, double neg_score) {
    return kernels::softplus(-(pos_score - neg_score));
}

namespace {

struct Target {
    std::uint32_t user = 0;
    std::uint32_t pos = 0;
};

}  // namespace

GapStats compute_gap_stats(const SplitDataset& split, const GapConfig& cfg) {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;
    std::unordered_map<std::int32_t, std::int64_t> last_seen;
    for (std::size_t u = 0; u < split.histories.size(); ++u) {
        const UserHistory& hist = split.histories[u];
        const std::size_t train_count = split.train_positions[u].size();
        last_seen.clear();
        for (std::size_t p = 0; p < hist.events.size(); ++p) {
            const Event& ev = hist.events[p];
            auto it = last_seen.find(ev.item);
            if (it != last_seen.end() && p < train_count && ev.time > it->second) {
                const double days =
                    static_cast<double>(ev.time - it->second) / 86400.0;
                const double g = days / cfg.time_scale_days;
                sum += g;
                sum_sq += g * g;
                ++n;
            }
            last_seen[ev.item] = ev.time;
        }
    }
    GapStats stats;
    stats.count = n;
    if (n > 0) {
        stats.mean = sum / static_cast<double>(n);
        const double var = std::max(0.0, sum_sq / static_cast<double>(n) - stats.mean * stats.mean);
        stats.stddev = std::sqrt(var);
        if (!(stats.mean > 0.0)) stats.mean = 1.0;
        if (!(stats.stddev > 0.0)) stats.stddev = stats.mean;
    }
    return stats;
}

TrainResult train(Model& model, const SplitDataset& split, const TrainConfig& cfg) {
    cfg.validate();
    const bool use_gaps = model.has_repeat_arm();

    // user -> sorted distinct consumed items, over the entire history
    std::vector<std::vector<std::int32_t>> consumed(split.histories.size());
    for (std::size_t u = 0; u < split.histories.size(); ++u) {
        std::unordered_set<std::int32_t> items;
        for (const Event& ev : split.histories[u].events) items.insert(ev.item);
        consumed[u].assign(items.begin(), items.end());
        std::sort(consumed[u].begin(), consumed[u].end());
    }

    std::vector<Target> targets;
    for (std::size_t u = 0; u < split.histories.size(); ++u) {
        for (const std::uint32_t p : split.train_positions[u]) {
            targets.push_back({static_cast<std::uint32_t>(u), p});
        }
    }
    if (targets.empty()) throw std::invalid_argument("train: no training targets");

    Rng shuffle_rng = Rng::stream(cfg.rng_seed, "train.shuffle");
    Rng neg_rng = Rng::stream(cfg.rng_seed, "train.negatives");
    Adam adam(model.store);
    GradientBuffer master(model.store);

    // fixed chunk grid, so gradient summation order does not depend on the
    // worker count
    constexpr std::size_t kChunks = 32;
    std::vector<GradientBuffer> chunk_bufs;
    chunk_bufs.reserve(kChunks);
    for (std::size_t c = 0; c < kChunks; ++c) chunk_bufs.emplace_back(model.store);
    const int threads = resolve_threads(cfg.threads);

    TrainResult result;
    std::vector<Tensor> best_params;
    int epochs_since_best = 0;
    std::vector<std::int32_t> negatives;
    std::vector<double> pair_losses;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto wall_start = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(targets);
        double epoch_loss = 0.0;

        for (std::size_t batch_start = 0; batch_start < targets.size();
             batch_start += cfg.batch_size) {
            const std::size_t batch_len =
                std::min(cfg.batch_size, targets.size() - batch_start);

            negatives.resize(batch_len);
            for (std::size_t i = 0; i < batch_len; ++i) {
                const Target& t = targets[batch_start + i];
                negatives[i] = sample_negative(consumed[t.user], model.num_items, neg_rng);
            }

            pair_losses.assign(batch_len, 0.0);
            const std::size_t n_chunks = std::min(kChunks, batch_len);
            const std::size_t per_chunk = (batch_len + n_chunks - 1) / n_chunks;
            parallel_chunks(n_chunks, threads, [&](std::size_t chunk) {
                GradientBuffer& buf = chunk_bufs[chunk];
                buf.zero();
                const std::size_t begin = chunk * per_chunk;
                const std::size_t end = std::min(begin + per_chunk, batch_len);
                if (begin >= end) return;
                Graph g(model.store);
                NodeId chunk_loss = kNoNode;
                const RepeatGaps no_gaps;
                for (std::size_t i = begin; i < end; ++i) {
                    const Target& t = targets[batch_start + i];
                    const UserHistory& hist = split.histories[t.user];
                    const Event ev = hist.events[t.pos];
                    RepeatGaps gaps;
                    if (use_gaps) {
                        gaps = extract_gaps(hist, ev.item, ev.time, model.gap_config());
                        if (cfg.audit_gaps) {
                            for (const double gp : gaps.gaps) {
                                if (!(gp > 0.0)) {
                                    throw std::logic_error(
                                        "train: non-positive gap extracted; future events "
                                        "leaked into features");
                                }
                            }
                        }
                    }
                    const NodeId pos = model.fused(g, hist.user, ev.item, gaps);
                    const NodeId neg = model.fused(g, hist.user, negatives[i], no_gaps);
                    const NodeId l = g.bpr_loss(g.sub(pos, neg));
                    pair_losses[i] = g.scalar_value(l);
                    chunk_loss = chunk_loss == kNoNode ? l : g.add(chunk_loss, l);
                }
                g.backward(chunk_loss, buf);
            });

            double batch_loss = 0.0;
            for (const double l : pair_losses) batch_loss += l;
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch offset " +
                                         std::to_string(batch_start));
            }
            epoch_loss += batch_loss;

            master.zero();
            for (std::size_t c = 0; c < n_chunks; ++c) master.add(chunk_bufs[c]);
            adam.step(model.store, master, cfg.learning_rate, cfg.weight_decay);
        }

        EvalOptions vopts;
        vopts.ks = {cfg.eval_k};
        vopts.target = SplitTarget::validation;
        vopts.threads = cfg.threads;
        const EvalResult val = evaluate(model, split, vopts);
        const double val_recall = val.overall.recall.at(cfg.eval_k);
        const double val_ndcg = val.overall.ndcg.at(cfg.eval_k);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                          wall_start)
                                .count();
        result.log.push_back({epoch, epoch_loss, val_recall, val_ndcg, wall});

        if (result.best_epoch < 0 || val_ndcg > result.best_val_ndcg) {
            result.best_epoch = epoch;
            result.best_val_ndcg = val_ndcg;
            best_params = model.store.snapshot_values();
            epochs_since_best = 0;
        } else if (++epochs_since_best >= cfg.patience) {
            break;
        }
    }

    if (!best_params.empty()) model.store.restore_values(best_params);
    return result;
}

void write_train_log_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log,
                         int eval_k) {
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("write_train_log_csv: cannot write '" + path.string() + "'");
    }
    os.precision(10);
    os << "epoch,train_loss,val_recall@" << eval_k << ",val_ndcg@" << eval_k << ",wall_time\n";
    for (const EpochLog& row : log) {
        os << row.epoch << ',' << row.train_loss << ',' << row.val_recall << ','
           << row.val_ndcg << ',' << row.wall_seconds << '\n';
    }
}

}  // namespace recode
