#include "stt/model.hpp"

#include <cmath>
#include <random>

#include "stt/errors.hpp"

namespace stt {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::SOnly: return "s-only";
        case Variant::TOnly: return "t-only";
        case Variant::OsFc: return "os-fc";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    if (name == "full") return Variant::Full;
    if (name == "s-only" || name == "s_only") return Variant::SOnly;
    if (name == "t-only" || name == "t_only") return Variant::TOnly;
    if (name == "os-fc" || name == "os_fc") return Variant::OsFc;
    throw ConfigError("unknown variant '" + name + "'");
}

void ModelConfig::validate() const {
    if (d_model == 0 || heads == 0 || ffn_hidden == 0 || conv_kernel == 0 || conv_stride == 0 ||
        conv_channels == 0 || embed_dim == 0)
        throw ConfigError("model config: all dimensions must be >= 1");
    if (d_model % heads != 0)
        throw ConfigError("model config: d_model " + std::to_string(d_model) +
                          " not divisible by heads " + std::to_string(heads));
}

ModelInput ModelInput::features(FeatureMatrices f) {
    ModelInput in;
    in.features_ = std::move(f);
    return in;
}

ModelInput ModelInput::static_fc(Tensor fc) {
    ModelInput in;
    in.fc_ = std::move(fc);
    return in;
}

const FeatureMatrices& ModelInput::feats() const {
    if (!features_) throw ContractError("model input: windowed features requested but absent");
    return *features_;
}

const Tensor& ModelInput::fc() const {
    if (!fc_) throw ContractError("model input: static FC requested but absent");
    return *fc_;
}

namespace {

void push_stream(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                 const StreamParams& s) {
    out.emplace_back(prefix + ".w_in", s.w_in);
    out.emplace_back(prefix + ".w_q", s.w_q);
    out.emplace_back(prefix + ".w_k", s.w_k);
    out.emplace_back(prefix + ".w_v", s.w_v);
    out.emplace_back(prefix + ".w_o", s.w_o);
    out.emplace_back(prefix + ".ln1_gamma", s.ln1_gamma);
    out.emplace_back(prefix + ".ln1_beta", s.ln1_beta);
    out.emplace_back(prefix + ".ln2_gamma", s.ln2_gamma);
    out.emplace_back(prefix + ".ln2_beta", s.ln2_beta);
    out.emplace_back(prefix + ".ffn_w1", s.ffn_w1);
    out.emplace_back(prefix + ".ffn_b1", s.ffn_b1);
    out.emplace_back(prefix + ".ffn_w2", s.ffn_w2);
    out.emplace_back(prefix + ".ffn_b2", s.ffn_b2);
    out.emplace_back(prefix + ".conv_kernels", s.conv_kernels);
    out.emplace_back(prefix + ".conv_bias", s.conv_bias);
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    if (temporal) push_stream(out, "temporal", *temporal);
    if (spatial) push_stream(out, "spatial", *spatial);
    if (conv_only) {
        out.emplace_back("conv_only.kernels", conv_only->kernels);
        out.emplace_back("conv_only.bias", conv_only->bias);
    }
    out.emplace_back("fusion.attn_w", fusion.attn_w);
    out.emplace_back("fusion.attn_v", fusion.attn_v);
    out.emplace_back("fusion.proj_w", fusion.proj_w);
    out.emplace_back("fusion.proj_b", fusion.proj_b);
    out.emplace_back("head.w", head.w);
    out.emplace_back("head.b", head.b);
    return out;
}

Tensor mhsa_forward(Graph& g, const Tensor& x, const StreamParams& p, const ModelConfig& cfg) {
    const std::size_t dk = cfg.d_k();
    Tensor q = g.matmul(x, p.w_q);
    Tensor k = g.matmul(x, p.w_k);
    Tensor v = g.matmul(x, p.w_v);
    std::vector<Tensor> heads;
    heads.reserve(cfg.heads);
    const double scale = std::sqrt(static_cast<double>(dk));
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        Tensor qh = g.slice_cols(q, h * dk, dk);
        Tensor kh = g.slice_cols(k, h * dk, dk);
        Tensor vh = g.slice_cols(v, h * dk, dk);
        Tensor attn = g.softmax_rows(g.matmul(qh, g.transpose(kh)), scale);
        heads.push_back(g.matmul(attn, vh));
    }
    return g.matmul(g.concat_cols(heads), p.w_o);
}

Tensor ffn_forward(Graph& g, const Tensor& x, const StreamParams& p) {
    Tensor hidden = g.relu(g.add_row(g.matmul(x, p.ffn_w1), p.ffn_b1));
    return g.add_row(g.matmul(hidden, p.ffn_w2), p.ffn_b2);
}

Tensor transformer_layer(Graph& g, const Tensor& m_in, const StreamParams& p,
                         const ModelConfig& cfg) {
    Tensor x0 = g.matmul(m_in, p.w_in);
    Tensor x1 = g.layer_norm(g.add(x0, mhsa_forward(g, x0, p, cfg)), p.ln1_gamma, p.ln1_beta);
    return g.layer_norm(g.add(x1, ffn_forward(g, x1, p)), p.ln2_gamma, p.ln2_beta);
}

Tensor stream_forward(Graph& g, const Tensor& features, const StreamParams& p,
                      const ModelConfig& cfg) {
    if (features.rows() < cfg.conv_kernel)
        throw ShapeError("stream_forward: " + std::to_string(features.rows()) +
                         " tokens < conv kernel " + std::to_string(cfg.conv_kernel));
    Tensor enc = transformer_layer(g, features, p, cfg);
    return g.relu(g.conv1d(enc, p.conv_kernels, cfg.conv_kernel, cfg.conv_stride, p.conv_bias));
}

Tensor global_attention_pool(Graph& g, const Tensor& h, const FusionParams& p) {
    Tensor scores = g.matmul(g.tanh(g.matmul(h, p.attn_w)), p.attn_v);  // tokens x 1
    Tensor weights = g.softmax_rows(g.transpose(scores), 1.0);          // 1 x tokens
    return g.matmul(weights, h);
}

namespace {

ModelOutput fused_tail(Graph& g, const Tensor& tokens, const ModelParams& params) {
    Tensor pooled = global_attention_pool(g, tokens, params.fusion);
    Tensor embedding =
        g.tanh(g.add(g.matmul(pooled, params.fusion.proj_w), params.fusion.proj_b));
    Tensor logit = g.add(g.matmul(embedding, params.head.w), params.head.b);
    return {logit, embedding};
}

}  // namespace

ModelOutput model_forward(Graph& g, const ModelInput& input, const ModelParams& params) {
    const ModelConfig& cfg = params.config;
    switch (cfg.variant) {
        case Variant::Full: {
            const FeatureMatrices& f = input.feats();
            Tensor t_out = stream_forward(g, f.temporal, *params.temporal, cfg);
            Tensor s_out = stream_forward(g, f.spatial, *params.spatial, cfg);
            return fused_tail(g, g.concat_rows({t_out, s_out}), params);
        }
        case Variant::TOnly:
            return fused_tail(g, stream_forward(g, input.feats().temporal, *params.temporal, cfg),
                              params);
        case Variant::SOnly:
            return fused_tail(g, stream_forward(g, input.feats().spatial, *params.spatial, cfg),
                              params);
        case Variant::OsFc: {
            if (input.has_features())
                throw ContractError("os-fc variant must not receive windowed features");
            const Tensor& fc = input.fc();
            Tensor h = g.relu(g.conv1d(fc, params.conv_only->kernels, cfg.conv_kernel,
                                       cfg.conv_stride, params.conv_only->bias));
            return fused_tail(g, h, params);
        }
    }
    throw ContractError("model_forward: bad variant");
}

namespace {

Tensor xavier(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-a, a);
    Tensor t = Tensor::zeros(rows, cols, true);
    auto& v = t.mutable_values();
    for (auto& x : v) x = dist(rng);
    return t;
}

Tensor zeros_param(std::size_t rows, std::size_t cols) { return Tensor::zeros(rows, cols, true); }

Tensor ones_param(std::size_t rows, std::size_t cols) {
    Tensor t = Tensor::zeros(rows, cols, true);
    std::fill(t.mutable_values().begin(), t.mutable_values().end(), 1.0);
    return t;
}

StreamParams init_stream(std::mt19937_64& rng, std::size_t feature_dim, const ModelConfig& cfg) {
    StreamParams s;
    s.w_in = xavier(rng, feature_dim, cfg.d_model);
    s.w_q = xavier(rng, cfg.d_model, cfg.d_model);
    s.w_k = xavier(rng, cfg.d_model, cfg.d_model);
    s.w_v = xavier(rng, cfg.d_model, cfg.d_model);
    s.w_o = xavier(rng, cfg.d_model, cfg.d_model);
    s.ln1_gamma = ones_param(1, cfg.d_model);
    s.ln1_beta = zeros_param(1, cfg.d_model);
    s.ln2_gamma = ones_param(1, cfg.d_model);
    s.ln2_beta = zeros_param(1, cfg.d_model);
    s.ffn_w1 = xavier(rng, cfg.d_model, cfg.ffn_hidden);
    s.ffn_b1 = zeros_param(1, cfg.ffn_hidden);
    s.ffn_w2 = xavier(rng, cfg.ffn_hidden, cfg.d_model);
    s.ffn_b2 = zeros_param(1, cfg.d_model);
    s.conv_kernels = xavier(rng, cfg.conv_kernel * cfg.d_model, cfg.conv_channels);
    s.conv_bias = zeros_param(1, cfg.conv_channels);
    return s;
}

}  // namespace

ModelParams init_params(unsigned long long seed, const ModelConfig& cfg, std::size_t n_rois,
                        std::size_t n_windows) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    ModelParams p;
    p.config = cfg;
    switch (cfg.variant) {
        case Variant::Full:
            p.temporal = init_stream(rng, n_rois, cfg);
            p.spatial = init_stream(rng, n_windows, cfg);
            break;
        case Variant::TOnly:
            p.temporal = init_stream(rng, n_rois, cfg);
            break;
        case Variant::SOnly:
            p.spatial = init_stream(rng, n_windows, cfg);
            break;
        case Variant::OsFc:
            p.conv_only = ConvStreamParams{xavier(rng, cfg.conv_kernel * n_rois, cfg.conv_channels),
                                           zeros_param(1, cfg.conv_channels)};
            break;
    }
    p.fusion.attn_w = xavier(rng, cfg.conv_channels, cfg.conv_channels);
    p.fusion.attn_v = xavier(rng, cfg.conv_channels, 1);
    p.fusion.proj_w = xavier(rng, cfg.conv_channels, cfg.embed_dim);
    p.fusion.proj_b = zeros_param(1, cfg.embed_dim);
    p.head.w = xavier(rng, cfg.embed_dim, 1);
    p.head.b = zeros_param(1, 1);
    return p;
}

}  // namespace stt
