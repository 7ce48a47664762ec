#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "stt/model.hpp"
#include "stt/objective.hpp"
#include "stt/tensor.hpp"

namespace stt {

struct TrainConfig {
    std::size_t epochs = 64;
    std::size_t batch_size = 8;
    double lr = 2e-6;
    double weight_decay = 0.2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    unsigned long long seed = 0;
    LossWeights loss;

    void validate() const;
};

struct EpochStats {
    double total_loss = 0.0;
    double contrastive_loss = 0.0;
    double ce_loss = 0.0;
    double train_acc = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

struct AdamState {
    std::vector<double> m, v;
};

// One decoupled-weight-decay Adam update:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   param <- param - lr * mhat/(sqrt(vhat)+eps) - lr * wd * param
void adamw_step(Tensor& param, const std::vector<double>& grad, AdamState& state,
                std::size_t step, const TrainConfig& cfg);

struct TrainExample {
    ModelInput input;
    int label = 0;
    std::string subject_id;
    std::string scan_id;
};

// Deterministic shuffle keyed by (seed, epoch), then fixed-size batches.
// A short final batch is kept only if it has >= 2 scans and both classes;
// otherwise it is merged into the previous batch.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<int>& labels,
                                                   std::size_t batch_size,
                                                   unsigned long long seed, std::size_t epoch);

struct FitResult {
    ModelParams params;
    TrainHistory history;
};

FitResult fit(const std::vector<TrainExample>& train_set, const TrainConfig& cfg,
              const ModelConfig& model_cfg, std::size_t n_rois, std::size_t n_windows);

// Continues training on already-initialized params (fit's inner loop).
TrainHistory fit_params(ModelParams& params, const std::vector<TrainExample>& train_set,
                        TrainConfig cfg);

}  // namespace stt
