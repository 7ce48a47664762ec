#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stt/dfc.hpp"
#include "stt/tensor.hpp"

namespace stt {

enum class Variant { Full, SOnly, TOnly, OsFc };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
    std::size_t d_model = 32;
    std::size_t heads = 4;
    std::size_t ffn_hidden = 64;
    std::size_t conv_kernel = 3;
    std::size_t conv_stride = 2;
    std::size_t conv_channels = 16;
    std::size_t embed_dim = 16;
    Variant variant = Variant::Full;

    std::size_t d_k() const { return d_model / heads; }
    void validate() const;
};

// One transformer+conv stream: input projection, multi-head attention,
// FFN, two layer norms, and the token-axis convolution.
struct StreamParams {
    Tensor w_in;
    Tensor w_q, w_k, w_v, w_o;
    Tensor ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
    Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Tensor conv_kernels;  // (k * d_model) x conv_channels
    Tensor conv_bias;     // 1 x conv_channels
};

// os-FC baseline: convolution straight over the static FC rows.
struct ConvStreamParams {
    Tensor kernels;  // (k * N) x conv_channels
    Tensor bias;
};

struct FusionParams {
    Tensor attn_w;  // c x c
    Tensor attn_v;  // c x 1
    Tensor proj_w;  // c x embed_dim
    Tensor proj_b;  // 1 x embed_dim
};

struct HeadParams {
    Tensor w;  // embed_dim x 1
    Tensor b;  // 1 x 1
};

struct ModelParams {
    ModelConfig config;
    std::optional<StreamParams> temporal;
    std::optional<StreamParams> spatial;
    std::optional<ConvStreamParams> conv_only;
    FusionParams fusion;
    HeadParams head;

    // All learnable tensors in a fixed order, for the optimizer,
    // serialization, and gradient checks.
    std::vector<std::pair<std::string, Tensor>> named() const;
};

// Variant-guarded input: the os-FC baseline can only be handed a static FC
// matrix, the transformer variants only windowed features.
struct ModelInput {
    static ModelInput features(FeatureMatrices f);
    static ModelInput static_fc(Tensor fc);

    const FeatureMatrices& feats() const;
    const Tensor& fc() const;
    bool has_features() const { return features_.has_value(); }

  private:
    std::optional<FeatureMatrices> features_;
    std::optional<Tensor> fc_;
};

struct ModelOutput {
    Tensor logit;      // 1x1
    Tensor embedding;  // 1 x embed_dim, tanh-bounded; the contrastive vector
};

Tensor mhsa_forward(Graph& g, const Tensor& x, const StreamParams& p, const ModelConfig& cfg);
Tensor ffn_forward(Graph& g, const Tensor& x, const StreamParams& p);
Tensor transformer_layer(Graph& g, const Tensor& m_in, const StreamParams& p,
                         const ModelConfig& cfg);
Tensor stream_forward(Graph& g, const Tensor& features, const StreamParams& p,
                      const ModelConfig& cfg);
Tensor global_attention_pool(Graph& g, const Tensor& h, const FusionParams& p);
ModelOutput model_forward(Graph& g, const ModelInput& input, const ModelParams& params);

// Xavier-uniform weights, zero biases, unit layer-norm gains; deterministic
// in the seed. n_rois/n_windows fix the per-stream input dimensions.
ModelParams init_params(unsigned long long seed, const ModelConfig& cfg, std::size_t n_rois,
                        std::size_t n_windows);

}  // namespace stt
