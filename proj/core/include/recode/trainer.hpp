#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "recode/data.hpp"
#include "recode/model.hpp"
#include "recode/params.hpp"
#include "recode/rng.hpp"

namespace recode {

struct TrainConfig {
    std::size_t batch_size = 512;
    double learning_rate = 1e-3;
    double weight_decay = 1e-6;  // plain L2 added to the gradient
    int max_epochs = 100;
    int patience = 10;  // epochs without validation NDCG@k improvement
    int eval_k = 50;
    std::uint64_t rng_seed = 1;
    int threads = 0;
    // cross-checks that every extracted gap is strictly positive, i.e. no
    // event at or after the target timestamp ever leaks into the features
    bool audit_gaps = true;
    void validate() const;
};

// Standard Adam with bias correction; beta1 0.9, beta2 0.999, eps 1e-8.
// Weight decay enters as an L2 gradient term (not decoupled).
class Adam {
public:
    explicit Adam(const ParameterStore& store);
    void step(ParameterStore& store, const GradientBuffer& grads, double lr,
              double weight_decay);
    long steps_taken() const { return step_; }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

private:
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    long step_ = 0;
};

// Uniform over the items absent from `consumed_sorted` (the user's entire
// history). Throws when the user has consumed the whole catalog.
std::int32_t sample_negative(const std::vector<std::int32_t>& consumed_sorted,
                             std::int32_t num_items, Rng& rng);

// -log sigmoid(pos - neg), stable for any margin.
double bpr_loss(double pos_score, double neg_score);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_recall = 0.0;
    double val_ndcg = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = -1;
    double best_val_ndcg = 0.0;
};

// BPR over shuffled training targets, one fresh uniform negative per
// positive per epoch, early stopping on validation NDCG@eval_k. The model
// is left holding the best-validation parameters.
TrainResult train(Model& model, const SplitDataset& split, const TrainConfig& cfg);

// CSV: epoch,train_loss,val_recall@k,val_ndcg@k,wall_time
void write_train_log_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log,
                         int eval_k);

// Mean/stddev of the observed repeat gaps over training targets, in solver
// time units; seeds the parametric kernels.
struct GapStats {
    double mean = 1.0;
    double stddev = 1.0;
    std::size_t count = 0;
};
GapStats compute_gap_stats(const SplitDataset& split, const GapConfig& cfg);

}  // namespace recode
