#include "stt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "stt/errors.hpp"
#include "stt/model.hpp"
#include "stt/objective.hpp"

namespace stt {

double guarded_rel_err(double analytic, double reference) {
    const double scale = std::max({std::abs(analytic), std::abs(reference), 1e-4});
    return std::abs(analytic - reference) / scale;
}

double max_grad_rel_err(const std::vector<Tensor>& params,
                        const std::function<Tensor(Graph&)>& build, double h,
                        double corrupt_by) {
    for (const auto& p : params) const_cast<Tensor&>(p).zero_grad();
    {
        Graph g;
        Tensor loss = build(g);
        g.backward(loss);
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.push_back(p.grad());
    if (corrupt_by != 0.0 && !analytic.empty() && !analytic[0].empty())
        analytic[0][0] += corrupt_by;

    auto eval = [&]() {
        Graph g;
        return build(g).item();
    };
    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& values = const_cast<Tensor&>(params[pi]).mutable_values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double orig = values[i];
            values[i] = orig + h;
            const double fp = eval();
            values[i] = orig - h;
            const double fm = eval();
            values[i] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            worst = std::max(worst, guarded_rel_err(analytic[pi][i], fd));
        }
        const_cast<Tensor&>(params[pi]).zero_grad();
    }
    return worst;
}

bool GradCheckReport::all_pass() const {
    for (const auto& g : groups)
        if (!g.pass) return false;
    return !groups.empty();
}

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, bool requires_grad) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Tensor t = Tensor::zeros(r, c, requires_grad);
    for (auto& v : t.mutable_values()) v = dist(rng);
    return t;
}

}  // namespace

GradCheckReport run_gradcheck(unsigned long long seed, double tolerance, bool corrupt) {
    std::mt19937_64 rng(seed);
    GradCheckReport report;
    report.tolerance = tolerance;
    auto add = [&](const std::string& name, const std::vector<Tensor>& params,
                   const std::function<Tensor(Graph&)>& build) {
        const double corrupt_by = corrupt && report.groups.empty() ? 1e-2 : 0.0;
        const double err = max_grad_rel_err(params, build, 1e-5, corrupt_by);
        report.groups.push_back({name, err, err < tolerance});
    };
    // a scalar probe that is nonlinear in every coordinate
    auto probe = [](Graph& g, const Tensor& x) { return g.sum_all(g.tanh(x)); };

    {
        Tensor a = random_tensor(rng, 3, 4, true), b = random_tensor(rng, 4, 5, true);
        add("matmul", {a, b}, [&](Graph& g) { return probe(g, g.matmul(a, b)); });
    }
    {
        Tensor x = random_tensor(rng, 3, 5, true);
        add("softmax_rows", {x},
            [&](Graph& g) { return probe(g, g.softmax_rows(x, 1.7)); });
    }
    {
        Tensor x = random_tensor(rng, 4, 6, true);
        Tensor gamma = random_tensor(rng, 1, 6, true), beta = random_tensor(rng, 1, 6, true);
        add("layer_norm", {x, gamma, beta},
            [&](Graph& g) { return probe(g, g.layer_norm(x, gamma, beta)); });
    }
    {
        Tensor x = random_tensor(rng, 7, 3, true);
        Tensor k = random_tensor(rng, 2 * 3, 4, true), bias = random_tensor(rng, 1, 4, true);
        add("conv1d", {x, k, bias},
            [&](Graph& g) { return probe(g, g.conv1d(x, k, 2, 2, bias)); });
    }
    {
        Tensor x = random_tensor(rng, 4, 3, true);
        add("l2_normalize_rows", {x},
            [&](Graph& g) { return probe(g, g.l2_normalize_rows(x)); });
    }

    ModelConfig cfg;
    cfg.variant = Variant::Full;
    const std::size_t n_rois = 6, n_windows = 8;
    ModelParams params = init_params(seed + 1, cfg, n_rois, n_windows);
    {
        const StreamParams& s = *params.temporal;
        Tensor x = random_tensor(rng, 5, cfg.d_model, true);
        add("mhsa", {x, s.w_q, s.w_k, s.w_v, s.w_o},
            [&](Graph& g) { return probe(g, mhsa_forward(g, x, s, cfg)); });
    }
    {
        Tensor h = random_tensor(rng, 5, cfg.conv_channels, true);
        add("global_attention_pool",
            {h, params.fusion.attn_w, params.fusion.attn_v},
            [&](Graph& g) { return probe(g, global_attention_pool(g, h, params.fusion)); });
    }
    {
        Tensor emb = random_tensor(rng, 5, 4, true);
        const std::vector<int> labels = {0, 1, 0, 1, 1};
        add("contrastive_loss", {emb},
            [&](Graph& g) { return contrastive_loss(g, emb, labels, 0.5); });
    }
    {
        Tensor logits = random_tensor(rng, 6, 1, true);
        const std::vector<int> labels = {0, 1, 1, 0, 1, 0};
        add("cross_entropy", {logits},
            [&](Graph& g) { return cross_entropy(g, logits, labels); });
    }
    {
        // assembled model, joint objective, every parameter
        const std::size_t batch = 4;
        const std::vector<int> labels = {0, 0, 1, 1};
        std::vector<FeatureMatrices> feats(batch);
        for (auto& f : feats) {
            f.temporal = random_tensor(rng, n_windows, n_rois, false);
            f.spatial = random_tensor(rng, n_rois, n_windows, false);
        }
        LossWeights weights;
        weights.alpha = 0.5;
        weights.beta = 1.0;
        weights.init_learnable();
        std::vector<Tensor> all;
        for (const auto& [name, t] : params.named()) all.push_back(t);
        all.push_back(weights.alpha_raw);
        all.push_back(weights.beta_raw);
        add("model_joint_loss", all, [&](Graph& g) {
            std::vector<Tensor> embs, logits;
            for (const auto& f : feats) {
                ModelOutput out = model_forward(g, ModelInput::features(f), params);
                embs.push_back(out.embedding);
                logits.push_back(out.logit);
            }
            Tensor contrast = contrastive_loss(g, g.concat_rows(embs), labels, weights.tau);
            Tensor ce = cross_entropy(g, g.concat_rows(logits), labels);
            return total_loss(g, contrast, ce, weights);
        });
    }
    return report;
}

}  // namespace stt
