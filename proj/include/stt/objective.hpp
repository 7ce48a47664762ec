#pragma once

#include <cstddef>
#include <vector>

#include "stt/tensor.hpp"

namespace stt {

// Joint-loss weighting. In learnable mode alpha/beta are softplus of free
// parameters so they stay positive and receive gradients.
struct LossWeights {
    double alpha = 1.0;
    double beta = 1.0;
    bool learnable = false;
    double tau = 0.5;

    Tensor alpha_raw;  // 1x1 free parameters, used only when learnable
    Tensor beta_raw;

    void validate() const;
    void init_learnable();  // sets raws so softplus(raw) equals alpha/beta
};

// Plain (non-graph) cosine similarity; errors on zero-norm input.
double cosine_sim(const std::vector<double>& u, const std::vector<double>& v);

// mask[i*B+j] = 1 iff i != j and labels[i] == labels[j].
std::vector<int> pair_mask(const std::vector<int>& labels);

// NT-Xent-style supervised contrastive loss over a BxD embedding matrix:
// mean over (anchor, positive) pairs of
//   -log( exp(d(V_i,V_p)/tau) / sum_{k != i} exp(d(V_i,V_k)/tau) ).
// Anchors without a positive are skipped; their count is written to
// *skipped_anchors when given. Errors if no anchor has a positive.
Tensor contrastive_loss(Graph& g, const Tensor& embeddings, const std::vector<int>& labels,
                        double tau, std::size_t* skipped_anchors = nullptr);

// True iff the batch has at least one same-label pair.
bool has_positive_pair(const std::vector<int>& labels);

// Mean binary cross-entropy over Bx1 logits (stable logit form).
Tensor cross_entropy(Graph& g, const Tensor& logits, const std::vector<int>& labels);

// alpha * contrastive + beta * cross-entropy per the weighting mode.
Tensor total_loss(Graph& g, const Tensor& contrastive, const Tensor& ce, LossWeights& weights);

}  // namespace stt
