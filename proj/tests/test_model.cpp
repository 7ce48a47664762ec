#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "stt/errors.hpp"
#include "stt/model.hpp"

using namespace stt;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c,
                     bool requires_grad = false) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Tensor t = Tensor::zeros(r, c, requires_grad);
    for (auto& v : t.mutable_values()) v = dist(rng);
    return t;
}

FeatureMatrices random_features(std::mt19937_64& rng, std::size_t windows, std::size_t rois) {
    FeatureMatrices f;
    f.temporal = random_tensor(rng, windows, rois);
    f.spatial = Tensor::zeros(rois, windows);
    for (std::size_t t = 0; t < windows; ++t)
        for (std::size_t j = 0; j < rois; ++j) f.spatial.set(j, t, f.temporal.at(t, j));
    return f;
}

// straight-line re-implementations used as composition oracles ------------

std::vector<double> oracle_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t r, std::size_t k, std::size_t c) {
    std::vector<double> out(r * c, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            for (std::size_t p = 0; p < k; ++p) out[i * c + j] += a[i * k + p] * b[p * c + j];
    return out;
}

std::vector<double> oracle_softmax_rows(std::vector<double> x, std::size_t r, std::size_t c,
                                        double scale) {
    for (std::size_t i = 0; i < r; ++i) {
        double mx = -1e300;
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, x[i * c + j] / scale);
        double sum = 0;
        for (std::size_t j = 0; j < c; ++j) {
            x[i * c + j] = std::exp(x[i * c + j] / scale - mx);
            sum += x[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) x[i * c + j] /= sum;
    }
    return x;
}

std::vector<double> oracle_layer_norm(const std::vector<double>& x, const std::vector<double>& gm,
                                      const std::vector<double>& bt, std::size_t r, std::size_t c,
                                      double eps = 1e-5) {
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        double mu = 0, var = 0;
        for (std::size_t j = 0; j < c; ++j) mu += x[i * c + j];
        mu /= static_cast<double>(c);
        for (std::size_t j = 0; j < c; ++j)
            var += (x[i * c + j] - mu) * (x[i * c + j] - mu);
        var /= static_cast<double>(c);
        for (std::size_t j = 0; j < c; ++j)
            out[i * c + j] = gm[j] * (x[i * c + j] - mu) / std::sqrt(var + eps) + bt[j];
    }
    return out;
}

std::vector<double> oracle_mhsa(const std::vector<double>& x, const StreamParams& p,
                                const ModelConfig& cfg, std::size_t tokens) {
    const std::size_t d = cfg.d_model, dk = cfg.d_k();
    auto q = oracle_matmul(x, p.w_q.values(), tokens, d, d);
    auto k = oracle_matmul(x, p.w_k.values(), tokens, d, d);
    auto v = oracle_matmul(x, p.w_v.values(), tokens, d, d);
    std::vector<double> concat(tokens * d);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        std::vector<double> scores(tokens * tokens, 0.0);
        for (std::size_t i = 0; i < tokens; ++i)
            for (std::size_t j = 0; j < tokens; ++j)
                for (std::size_t u = 0; u < dk; ++u)
                    scores[i * tokens + j] += q[i * d + h * dk + u] * k[j * d + h * dk + u];
        auto attn = oracle_softmax_rows(scores, tokens, tokens, std::sqrt(double(dk)));
        for (std::size_t i = 0; i < tokens; ++i)
            for (std::size_t u = 0; u < dk; ++u) {
                double s = 0;
                for (std::size_t j = 0; j < tokens; ++j)
                    s += attn[i * tokens + j] * v[j * d + h * dk + u];
                concat[i * d + h * dk + u] = s;
            }
    }
    return oracle_matmul(concat, p.w_o.values(), tokens, d, d);
}

std::vector<double> oracle_transformer_layer(const std::vector<double>& m_in,
                                             const StreamParams& p, const ModelConfig& cfg,
                                             std::size_t tokens, std::size_t feat_dim) {
    const std::size_t d = cfg.d_model;
    auto x0 = oracle_matmul(m_in, p.w_in.values(), tokens, feat_dim, d);
    auto att = oracle_mhsa(x0, p, cfg, tokens);
    for (std::size_t i = 0; i < x0.size(); ++i) att[i] += x0[i];
    auto x1 = oracle_layer_norm(att, p.ln1_gamma.values(), p.ln1_beta.values(), tokens, d);
    auto h = oracle_matmul(x1, p.ffn_w1.values(), tokens, d, cfg.ffn_hidden);
    for (std::size_t i = 0; i < tokens; ++i)
        for (std::size_t j = 0; j < cfg.ffn_hidden; ++j) {
            h[i * cfg.ffn_hidden + j] += p.ffn_b1.values()[j];
            h[i * cfg.ffn_hidden + j] = std::max(0.0, h[i * cfg.ffn_hidden + j]);
        }
    auto f = oracle_matmul(h, p.ffn_w2.values(), tokens, cfg.ffn_hidden, d);
    for (std::size_t i = 0; i < tokens; ++i)
        for (std::size_t j = 0; j < d; ++j) f[i * d + j] += p.ffn_b2.values()[j] + x1[i * d + j];
    return oracle_layer_norm(f, p.ln2_gamma.values(), p.ln2_beta.values(), tokens, d);
}

std::vector<double> oracle_stream(const std::vector<double>& feats, const StreamParams& p,
                                  const ModelConfig& cfg, std::size_t tokens,
                                  std::size_t feat_dim, std::size_t& tokens_out) {
    auto enc = oracle_transformer_layer(feats, p, cfg, tokens, feat_dim);
    const std::size_t d = cfg.d_model, k = cfg.conv_kernel, cc = cfg.conv_channels;
    tokens_out = (tokens - k) / cfg.conv_stride + 1;
    std::vector<double> out(tokens_out * cc, 0.0);
    for (std::size_t t = 0; t < tokens_out; ++t)
        for (std::size_t o = 0; o < cc; ++o) {
            double s = p.conv_bias.values()[o];
            for (std::size_t u = 0; u < k; ++u)
                for (std::size_t j = 0; j < d; ++j)
                    s += enc[(t * cfg.conv_stride + u) * d + j] *
                         p.conv_kernels.values()[(u * d + j) * cc + o];
            out[t * cc + o] = std::max(0.0, s);
        }
    return out;
}

std::pair<double, std::vector<double>> oracle_tail(const std::vector<double>& tokens,
                                                   std::size_t n_tokens,
                                                   const ModelParams& params) {
    const std::size_t c = params.config.conv_channels, e = params.config.embed_dim;
    std::vector<double> scores(n_tokens, 0.0);
    for (std::size_t t = 0; t < n_tokens; ++t) {
        for (std::size_t j = 0; j < c; ++j) {
            double s = 0;
            for (std::size_t u = 0; u < c; ++u)
                s += tokens[t * c + u] * params.fusion.attn_w.values()[u * c + j];
            scores[t] += std::tanh(s) * params.fusion.attn_v.values()[j];
        }
    }
    auto w = oracle_softmax_rows(scores, 1, n_tokens, 1.0);
    std::vector<double> pooled(c, 0.0);
    for (std::size_t t = 0; t < n_tokens; ++t)
        for (std::size_t j = 0; j < c; ++j) pooled[j] += w[t] * tokens[t * c + j];
    std::vector<double> emb(e);
    for (std::size_t j = 0; j < e; ++j) {
        double s = params.fusion.proj_b.values()[j];
        for (std::size_t u = 0; u < c; ++u) s += pooled[u] * params.fusion.proj_w.values()[u * e + j];
        emb[j] = std::tanh(s);
    }
    double logit = params.head.b.values()[0];
    for (std::size_t j = 0; j < e; ++j) logit += emb[j] * params.head.w.values()[j * 1];
    return {logit, emb};
}

}  // namespace

TEST_CASE("model config validation") {
    ModelConfig cfg;
    cfg.heads = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ModelConfig{};
    cfg.embed_dim = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("mhsa single token attends to itself") {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.heads = 2;
    std::mt19937_64 rng(1);
    ModelParams p = init_params(2, cfg, 4, 4);
    StreamParams& s = *p.temporal;
    Graph g;
    Tensor x = random_tensor(rng, 1, 8);
    Tensor out = mhsa_forward(g, x, s, cfg);
    // softmax over a single score is [1], so output = (x V) W^O
    Tensor expect = g.matmul(g.matmul(x, s.w_v), s.w_o);
    for (std::size_t i = 0; i < 8; ++i)
        CHECK(out.values()[i] == doctest::Approx(expect.values()[i]).epsilon(1e-12));
}

TEST_CASE("mhsa with zero queries degenerates to uniform attention") {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.heads = 2;
    std::mt19937_64 rng(2);
    ModelParams p = init_params(3, cfg, 4, 4);
    StreamParams& s = *p.temporal;
    std::fill(s.w_q.mutable_values().begin(), s.w_q.mutable_values().end(), 0.0);
    Graph g;
    const std::size_t tokens = 5;
    Tensor x = random_tensor(rng, tokens, 8);
    Tensor out = mhsa_forward(g, x, s, cfg);
    // every row equals (column means of V) W^O
    Tensor v = g.matmul(x, s.w_v);
    Tensor mean = Tensor::zeros(1, 8);
    for (std::size_t j = 0; j < 8; ++j) {
        double m = 0;
        for (std::size_t t = 0; t < tokens; ++t) m += v.at(t, j);
        mean.set(0, j, m / tokens);
    }
    Tensor expect = g.matmul(mean, s.w_o);
    for (std::size_t t = 0; t < tokens; ++t)
        for (std::size_t j = 0; j < 8; ++j)
            CHECK(out.at(t, j) == doctest::Approx(expect.at(0, j)).epsilon(1e-10));
}

TEST_CASE("mhsa two tokens one head matches straight-line evaluation") {
    ModelConfig cfg;
    cfg.d_model = 2;
    cfg.heads = 1;
    ModelParams p = init_params(4, cfg, 2, 2);
    StreamParams& s = *p.temporal;
    s.w_q = Tensor::from_rows({{0.3, -0.1}, {0.5, 0.2}}, true);
    s.w_k = Tensor::from_rows({{-0.4, 0.6}, {0.1, 0.7}}, true);
    s.w_v = Tensor::from_rows({{0.9, -0.2}, {0.3, 0.8}}, true);
    s.w_o = Tensor::from_rows({{1.1, 0.4}, {-0.6, 0.5}}, true);
    Graph g;
    Tensor x = Tensor::from_rows({{1.0, 2.0}, {-0.5, 0.25}});
    Tensor out = mhsa_forward(g, x, s, cfg);
    auto expect = oracle_mhsa(x.values(), s, cfg, 2);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(out.values()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("ffn hand cases") {
    ModelConfig cfg;
    cfg.d_model = 1;
    cfg.heads = 1;
    cfg.ffn_hidden = 1;
    ModelParams p = init_params(5, cfg, 1, 1);
    StreamParams& s = *p.temporal;
    s.ffn_w1 = Tensor::from_rows({{2.0}}, true);
    s.ffn_b1 = Tensor::from_rows({{-1.0}}, true);
    s.ffn_w2 = Tensor::from_rows({{3.0}}, true);
    s.ffn_b2 = Tensor::from_rows({{0.5}}, true);
    Graph g;
    CHECK(ffn_forward(g, Tensor::from_rows({{1.0}}), s).item() ==
          doctest::Approx(3.5).epsilon(1e-15));  // ReLU(2-1)*3 + 0.5
    // all-negative pre-activation leaves only b2
    CHECK(ffn_forward(g, Tensor::from_rows({{0.2}}), s).item() ==
          doctest::Approx(0.5).epsilon(1e-15));
    // zero input, zero biases
    s.ffn_b1 = Tensor::zeros(1, 1, true);
    s.ffn_b2 = Tensor::zeros(1, 1, true);
    CHECK(ffn_forward(g, Tensor::from_rows({{0.0}}), s).item() == 0.0);
}

TEST_CASE("transformer_layer residual identity path and composition oracle") {
    ModelConfig cfg;
    std::mt19937_64 rng(6);
    ModelParams p = init_params(7, cfg, 6, 8);
    StreamParams& s = *p.temporal;

    SUBCASE("zeroed branches reduce to LN(LN(x0))") {
        std::fill(s.w_o.mutable_values().begin(), s.w_o.mutable_values().end(), 0.0);
        std::fill(s.ffn_w2.mutable_values().begin(), s.ffn_w2.mutable_values().end(), 0.0);
        std::fill(s.ffn_b2.mutable_values().begin(), s.ffn_b2.mutable_values().end(), 0.0);
        Graph g;
        Tensor m_in = random_tensor(rng, 5, 6);
        Tensor out = transformer_layer(g, m_in, s, cfg);
        Tensor x0 = g.matmul(m_in, s.w_in);
        Tensor expect =
            g.layer_norm(g.layer_norm(x0, s.ln1_gamma, s.ln1_beta), s.ln2_gamma, s.ln2_beta);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out.values()[i] == doctest::Approx(expect.values()[i]).epsilon(1e-12));
    }

    SUBCASE("random instance equals the straight-line oracle") {
        Graph g;
        Tensor m_in = random_tensor(rng, 5, 6);
        Tensor out = transformer_layer(g, m_in, s, cfg);
        auto expect = oracle_transformer_layer(m_in.values(), s, cfg, 5, 6);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out.values()[i] == doctest::Approx(expect[i]).epsilon(1e-10));
    }
}

TEST_CASE("stream_forward composition and token bookkeeping") {
    ModelConfig cfg;
    std::mt19937_64 rng(8);
    ModelParams p = init_params(9, cfg, 6, 8);

    SUBCASE("k=1 stride=1 preserves tokens") {
        ModelConfig c1 = cfg;
        c1.conv_kernel = 1;
        c1.conv_stride = 1;
        ModelParams p1 = init_params(9, c1, 6, 8);
        Graph g;
        Tensor out = stream_forward(g, random_tensor(rng, 8, 6), *p1.temporal, c1);
        CHECK(out.rows() == 8);
        CHECK(out.cols() == c1.conv_channels);
    }

    SUBCASE("random instance equals composed oracle") {
        Graph g;
        Tensor feats = random_tensor(rng, 8, 6);
        Tensor out = stream_forward(g, feats, *p.temporal, cfg);
        std::size_t tokens_out = 0;
        auto expect = oracle_stream(feats.values(), *p.temporal, cfg, 8, 6, tokens_out);
        REQUIRE(out.rows() == tokens_out);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out.values()[i] == doctest::Approx(expect[i]).epsilon(1e-10));
    }

    SUBCASE("too few tokens for the kernel") {
        Graph g;
        CHECK_THROWS_AS(stream_forward(g, random_tensor(rng, 2, 6), *p.temporal, cfg),
                        ShapeError);
    }
}

TEST_CASE("global attention pool: singleton, identical rows, hand case") {
    ModelConfig cfg;
    cfg.conv_channels = 3;
    std::mt19937_64 rng(10);
    ModelParams p = init_params(11, cfg, 4, 6);
    Graph g;

    Tensor one = random_tensor(rng, 1, 3);
    Tensor pooled = global_attention_pool(g, one, p.fusion);
    for (std::size_t j = 0; j < 3; ++j) CHECK(pooled.at(0, j) == one.at(0, j));

    Tensor same = Tensor::zeros(4, 3);
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t j = 0; j < 3; ++j) same.set(t, j, one.at(0, j));
    Tensor pooled_same = global_attention_pool(g, same, p.fusion);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(pooled_same.at(0, j) == doctest::Approx(one.at(0, j)).epsilon(1e-12));

    Tensor two = random_tensor(rng, 2, 3);
    Tensor pooled_two = global_attention_pool(g, two, p.fusion);
    // direct evaluation of the tanh-scored weighting
    double s[2];
    for (int t = 0; t < 2; ++t) {
        s[t] = 0;
        for (std::size_t j = 0; j < 3; ++j) {
            double a = 0;
            for (std::size_t u = 0; u < 3; ++u)
                a += two.at(t, u) * p.fusion.attn_w.values()[u * 3 + j];
            s[t] += std::tanh(a) * p.fusion.attn_v.values()[j];
        }
    }
    const double w0 = std::exp(s[0]) / (std::exp(s[0]) + std::exp(s[1]));
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(pooled_two.at(0, j) ==
              doctest::Approx(w0 * two.at(0, j) + (1 - w0) * two.at(1, j)).epsilon(1e-12));
}

TEST_CASE("model_forward full composition oracle and variant guards") {
    ModelConfig cfg;
    std::mt19937_64 rng(12);
    const std::size_t rois = 4, windows = 5;
    ModelParams p = init_params(13, cfg, rois, windows);
    FeatureMatrices f = random_features(rng, windows, rois);

    Graph g;
    ModelOutput out = model_forward(g, ModelInput::features(f), p);
    std::size_t t_tokens = 0, s_tokens = 0;
    auto t_stream = oracle_stream(f.temporal.values(), *p.temporal, cfg, windows, rois, t_tokens);
    auto s_stream = oracle_stream(f.spatial.values(), *p.spatial, cfg, rois, windows, s_tokens);
    t_stream.insert(t_stream.end(), s_stream.begin(), s_stream.end());
    auto [logit, emb] = oracle_tail(t_stream, t_tokens + s_tokens, p);
    CHECK(out.logit.item() == doctest::Approx(logit).epsilon(1e-10));
    for (std::size_t j = 0; j < cfg.embed_dim; ++j)
        CHECK(out.embedding.at(0, j) == doctest::Approx(emb[j]).epsilon(1e-10));

    // zero head weight: logit equals the bias everywhere
    std::fill(p.head.w.mutable_values().begin(), p.head.w.mutable_values().end(), 0.0);
    p.head.b.set(0, 0, 0.37);
    Graph g2;
    CHECK(model_forward(g2, ModelInput::features(f), p).logit.item() ==
          doctest::Approx(0.37).epsilon(1e-15));

    // variant/input mismatches
    ModelConfig os = cfg;
    os.variant = Variant::OsFc;
    ModelParams posc = init_params(13, os, rois, windows);
    Graph g3;
    CHECK_THROWS_AS(model_forward(g3, ModelInput::features(f), posc), ContractError);
    CHECK_THROWS_AS(model_forward(g3, ModelInput::static_fc(Tensor::identity(rois)), p),
                    ContractError);
}

TEST_CASE("full variant with zeroed spatial conv feeds zero rows to the pool") {
    ModelConfig cfg;
    std::mt19937_64 rng(14);
    const std::size_t rois = 6, windows = 8;
    ModelParams p = init_params(15, cfg, rois, windows);
    auto& sp = *p.spatial;
    std::fill(sp.conv_kernels.mutable_values().begin(), sp.conv_kernels.mutable_values().end(),
              0.0);
    std::fill(sp.conv_bias.mutable_values().begin(), sp.conv_bias.mutable_values().end(), 0.0);
    FeatureMatrices f = random_features(rng, windows, rois);
    Graph g;
    Tensor s_out = stream_forward(g, f.spatial, sp, cfg);
    for (double v : s_out.values()) CHECK(v == 0.0);
}

TEST_CASE("os-fc variant runs on a static FC and matches its tail oracle") {
    ModelConfig cfg;
    cfg.variant = Variant::OsFc;
    std::mt19937_64 rng(16);
    const std::size_t rois = 6;
    ModelParams p = init_params(17, cfg, rois, 8);
    Tensor fc = Tensor::identity(rois);
    for (std::size_t i = 0; i < rois; ++i)
        for (std::size_t j = i + 1; j < rois; ++j) {
            std::uniform_real_distribution<double> d(-0.8, 0.8);
            const double v = d(rng);
            fc.set(i, j, v);
            fc.set(j, i, v);
        }
    Graph g;
    ModelOutput out = model_forward(g, ModelInput::static_fc(fc), p);
    CHECK(std::isfinite(out.logit.item()));
    CHECK(out.embedding.cols() == cfg.embed_dim);
}

TEST_CASE("init_params determinism, seed sensitivity, fan-in scale") {
    ModelConfig cfg;
    ModelParams a = init_params(99, cfg, 12, 66);
    ModelParams b = init_params(99, cfg, 12, 66);
    ModelParams c = init_params(100, cfg, 12, 66);
    const auto an = a.named(), bn = b.named(), cn = c.named();
    bool any_diff = false;
    for (std::size_t i = 0; i < an.size(); ++i) {
        CHECK(an[i].second.values() == bn[i].second.values());
        if (an[i].second.values() != cn[i].second.values()) any_diff = true;
    }
    CHECK(any_diff);

    // empirical stddev of a big Xavier tensor ~ a/sqrt(3)
    ModelConfig wide;
    wide.d_model = 40;
    wide.heads = 4;
    ModelParams w = init_params(7, wide, 25, 66);
    const auto& v = w.temporal->w_in.values();  // 25x40 = 1000 draws
    double mean = 0, var = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    const double a_bound = std::sqrt(6.0 / (25.0 + 40.0));
    CHECK(std::sqrt(var) == doctest::Approx(a_bound / std::sqrt(3.0)).epsilon(0.10));
}

TEST_CASE("attention weight rows sum to one inside the model") {
    // exercised indirectly: softmax invariant holds for every softmax in the
    // forward pass; verified here on mhsa scores with random weights
    ModelConfig cfg;
    std::mt19937_64 rng(18);
    ModelParams p = init_params(19, cfg, 6, 8);
    Graph g;
    Tensor x = random_tensor(rng, 7, cfg.d_model);
    Tensor q = g.matmul(x, p.temporal->w_q);
    Tensor k = g.matmul(x, p.temporal->w_k);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        Tensor qh = g.slice_cols(q, h * cfg.d_k(), cfg.d_k());
        Tensor kh = g.slice_cols(k, h * cfg.d_k(), cfg.d_k());
        Tensor attn = g.softmax_rows(g.matmul(qh, g.transpose(kh)),
                                     std::sqrt(static_cast<double>(cfg.d_k())));
        for (std::size_t i = 0; i < attn.rows(); ++i) {
            double sum = 0;
            for (std::size_t j = 0; j < attn.cols(); ++j) sum += attn.at(i, j);
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("permuting window order changes the logit") {
    ModelConfig cfg;
    std::mt19937_64 rng(20);
    const std::size_t rois = 6, windows = 8;
    ModelParams p = init_params(21, cfg, rois, windows);
    FeatureMatrices f = random_features(rng, windows, rois);
    FeatureMatrices perm;
    std::vector<std::size_t> order(windows);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    perm.temporal = Tensor::zeros(windows, rois);
    perm.spatial = Tensor::zeros(rois, windows);
    for (std::size_t t = 0; t < windows; ++t)
        for (std::size_t j = 0; j < rois; ++j) {
            perm.temporal.set(t, j, f.temporal.at(order[t], j));
            perm.spatial.set(j, t, f.temporal.at(order[t], j));
        }
    Graph g1, g2;
    const double l1 = model_forward(g1, ModelInput::features(f), p).logit.item();
    const double l2 = model_forward(g2, ModelInput::features(perm), p).logit.item();
    CHECK(std::abs(l1 - l2) > 0.0);
}
