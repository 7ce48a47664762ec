#include "stt/objective.hpp"

#include <cmath>

#include "stt/errors.hpp"

namespace stt {

void LossWeights::validate() const {
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("loss weights must be >= 0");
    if (tau <= 0.0) throw ConfigError("temperature tau must be positive");
}

void LossWeights::init_learnable() {
    validate();
    // inverse softplus: raw = log(e^w - 1)
    auto inv = [](double w) { return std::log(std::expm1(w)); };
    alpha_raw = Tensor::from_values(1, 1, {inv(alpha)}, true);
    beta_raw = Tensor::from_values(1, 1, {inv(beta)}, true);
    learnable = true;
}

double cosine_sim(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) throw ShapeError("cosine_sim: dimension mismatch");
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) throw ContractError("cosine_sim: zero-norm vector");
    return uv / (std::sqrt(uu) * std::sqrt(vv));
}

std::vector<int> pair_mask(const std::vector<int>& labels) {
    const std::size_t b = labels.size();
    if (b < 2) throw ContractError("pair_mask: batch must have >= 2 elements");
    std::vector<int> mask(b * b, 0);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j)
            if (i != j && labels[i] == labels[j]) mask[i * b + j] = 1;
    return mask;
}

bool has_positive_pair(const std::vector<int>& labels) {
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = i + 1; j < labels.size(); ++j)
            if (labels[i] == labels[j]) return true;
    return false;
}

Tensor contrastive_loss(Graph& g, const Tensor& embeddings, const std::vector<int>& labels,
                        double tau, std::size_t* skipped_anchors) {
    const std::size_t b = embeddings.rows();
    if (b < 2) throw ContractError("contrastive_loss: batch must have >= 2 embeddings");
    if (labels.size() != b) throw ShapeError("contrastive_loss: label count mismatch");
    if (tau <= 0.0) throw ConfigError("contrastive_loss: tau must be positive");

    const std::vector<int> mask = pair_mask(labels);
    std::vector<double> n_pos(b, 0.0);
    double pairs = 0.0;
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) {
            n_pos[i] += mask[i * b + j];
            pairs += mask[i * b + j];
        }
    if (pairs == 0.0)
        throw ContractError("contrastive_loss: degenerate batch, no anchor has a positive");
    if (skipped_anchors) {
        std::size_t skipped = 0;
        for (std::size_t i = 0; i < b; ++i)
            if (n_pos[i] == 0.0) ++skipped;
        *skipped_anchors = skipped;
    }

    Tensor unit = g.l2_normalize_rows(embeddings);
    Tensor sims = g.scale(g.matmul(unit, g.transpose(unit)), 1.0 / tau);  // B x B

    // exclude k == i from each denominator
    Tensor diag_penalty = Tensor::zeros(b, b);
    for (std::size_t i = 0; i < b; ++i) diag_penalty.set(i, i, -1e9);
    Tensor denom = g.matmul(g.exp(g.add(sims, diag_penalty)), Tensor::constant(b, 1, 1.0));
    Tensor log_denom = g.log(denom);  // B x 1

    // mean over pairs of [log denom_i - sims_ip]
    Tensor anchor_weight = Tensor::zeros(b, 1);
    for (std::size_t i = 0; i < b; ++i) anchor_weight.set(i, 0, n_pos[i] / pairs);
    Tensor pos_weight = Tensor::zeros(b, b);
    for (std::size_t i = 0; i < b * b; ++i)
        pos_weight.mutable_values()[i] = static_cast<double>(mask[i]) / pairs;

    return g.sub(g.sum_all(g.mul(log_denom, anchor_weight)), g.sum_all(g.mul(sims, pos_weight)));
}

Tensor cross_entropy(Graph& g, const Tensor& logits, const std::vector<int>& labels) {
    return g.bce_with_logits(logits, labels);
}

Tensor total_loss(Graph& g, const Tensor& contrastive, const Tensor& ce, LossWeights& weights) {
    weights.validate();
    if (weights.learnable) {
        if (!weights.alpha_raw.defined()) weights.init_learnable();
        Tensor alpha = g.softplus(weights.alpha_raw);
        Tensor beta = g.softplus(weights.beta_raw);
        return g.add(g.mul(alpha, contrastive), g.mul(beta, ce));
    }
    return g.add(g.scale(contrastive, weights.alpha), g.scale(ce, weights.beta));
}

}  // namespace stt
