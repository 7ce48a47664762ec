#include "stt/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "stt/errors.hpp"

namespace stt {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("train config: batch_size must be >= 2");
    if (lr < 0.0) throw ConfigError("train config: lr must be >= 0");
    if (weight_decay < 0.0) throw ConfigError("train config: weight_decay must be >= 0");
    loss.validate();
}

void adamw_step(Tensor& param, const std::vector<double>& grad, AdamState& state,
                std::size_t step, const TrainConfig& cfg) {
    const std::size_t n = param.size();
    if (grad.size() != n) throw ShapeError("adamw_step: grad size mismatch");
    if (state.m.empty()) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    auto& p = param.mutable_values();
    for (std::size_t i = 0; i < n; ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        p[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.adam_eps)) + cfg.lr * cfg.weight_decay * p[i];
    }
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<int>& labels,
                                                   std::size_t batch_size,
                                                   unsigned long long seed, std::size_t epoch) {
    const std::size_t n = labels.size();
    if (n == 0) throw ContractError("make_batches: empty training set");
    bool has0 = false, has1 = false;
    for (int l : labels) (l == 0 ? has0 : has1) = true;
    if (!has0 || !has1)
        throw ContractError("make_batches: training set contains a single class");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq seq{static_cast<unsigned long long>(seed),
                      static_cast<unsigned long long>(epoch) + 0x9E3779B97F4A7C15ULL};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < n; i += batch_size) {
        const std::size_t end = std::min(i + batch_size, n);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    auto& last = batches.back();
    if (last.size() < batch_size) {
        bool l0 = false, l1 = false;
        for (std::size_t idx : last) (labels[idx] == 0 ? l0 : l1) = true;
        const bool keep = last.size() >= 2 && l0 && l1;
        if (!keep && batches.size() > 1) {
            auto& prev = batches[batches.size() - 2];
            prev.insert(prev.end(), last.begin(), last.end());
            batches.pop_back();
        } else if (!keep && last.size() < 2) {
            throw ContractError("make_batches: training set smaller than 2 scans");
        }
    }
    return batches;
}

FitResult fit(const std::vector<TrainExample>& train_set, const TrainConfig& cfg,
              const ModelConfig& model_cfg, std::size_t n_rois, std::size_t n_windows) {
    cfg.validate();
    FitResult result;
    result.params = init_params(cfg.seed, model_cfg, n_rois, n_windows);
    result.history = fit_params(result.params, train_set, cfg);
    return result;
}

TrainHistory fit_params(ModelParams& params, const std::vector<TrainExample>& train_set,
                        TrainConfig cfg) {
    cfg.validate();
    if (cfg.loss.learnable && !cfg.loss.alpha_raw.defined()) cfg.loss.init_learnable();

    std::vector<int> labels;
    labels.reserve(train_set.size());
    for (const auto& ex : train_set) labels.push_back(ex.label);

    auto named = params.named();
    std::unordered_map<std::string, AdamState> states;
    if (cfg.loss.learnable) {
        named.emplace_back("loss.alpha_raw", cfg.loss.alpha_raw);
        named.emplace_back("loss.beta_raw", cfg.loss.beta_raw);
    }

    TrainHistory history;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto batches = make_batches(labels, cfg.batch_size, cfg.seed, epoch);
        EpochStats stats;
        std::size_t correct = 0;
        double loss_sum = 0.0, contrast_sum = 0.0, ce_sum = 0.0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& batch = batches[bi];
            try {
                Graph g;
                std::vector<Tensor> embs, logits;
                std::vector<int> batch_labels;
                for (std::size_t idx : batch) {
                    ModelOutput out = model_forward(g, train_set[idx].input, params);
                    embs.push_back(out.embedding);
                    logits.push_back(out.logit);
                    batch_labels.push_back(train_set[idx].label);
                }
                Tensor logit_col = g.concat_rows(logits);
                Tensor ce = cross_entropy(g, logit_col, batch_labels);
                Tensor total;
                if (has_positive_pair(batch_labels)) {
                    Tensor contrast =
                        contrastive_loss(g, g.concat_rows(embs), batch_labels, cfg.loss.tau);
                    total = total_loss(g, contrast, ce, cfg.loss);
                    contrast_sum += contrast.item() * static_cast<double>(batch.size());
                } else {
                    // no same-label pair: the contrastive term is undefined
                    total = cfg.loss.learnable
                                ? g.mul(g.softplus(cfg.loss.beta_raw), ce)
                                : g.scale(ce, cfg.loss.beta);
                }
                total.check_finite("total loss");
                g.backward(total);

                ++step;
                for (auto& [name, tensor] : named) {
                    Tensor t = tensor;
                    adamw_step(t, t.grad(), states[name], step, cfg);
                    t.zero_grad();
                }

                loss_sum += total.item() * static_cast<double>(batch.size());
                ce_sum += ce.item() * static_cast<double>(batch.size());
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    const int pred = logit_col.at(i, 0) > 0.0 ? 1 : 0;
                    if (pred == batch_labels[i]) ++correct;
                }
            } catch (const NumericalError& e) {
                throw NumericalError("fit: epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(bi) + ": " + e.what());
            }
        }
        const double n = static_cast<double>(train_set.size());
        stats.total_loss = loss_sum / n;
        stats.contrastive_loss = contrast_sum / n;
        stats.ce_loss = ce_sum / n;
        stats.train_acc = static_cast<double>(correct) / n;
        history.push_back(stats);
    }
    return history;
}

}  // namespace stt
