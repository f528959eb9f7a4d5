#pragma once

#include <optional>
#include <random>
#include <vector>

#include "tsf/tensor.hpp"

namespace tsf {

enum class NormStyle { post, pre };
enum class Activation { gelu, relu };

/// Parameters of one encoder layer: per-head Q/K/V projections, the output
/// projection, a two-layer FFN, and two layer-norm affine pairs.
struct EncoderLayerParams {
    std::vector<Tensor> wq, wk, wv;  // h entries of [d x d_h]
    Tensor wo;                       // [h*d_h x d]
    Tensor ffn_w1, ffn_b1;           // d -> d_ff
    Tensor ffn_w2, ffn_b2;           // d_ff -> d
    Tensor ln1_gain, ln1_bias;
    Tensor ln2_gain, ln2_bias;

    int heads = 0;
    int head_dim = 0;

    static EncoderLayerParams init(int dim, int heads, int ffn_dim, std::mt19937_64& rng);
};

/// Per-layer attention matrices captured for diagnostics. Rows of every head
/// matrix and of the head mean are probability distributions.
struct AttentionRecord {
    int layer = 0;
    std::vector<Matrix> per_head;  // h matrices [C x C]
    Matrix head_mean;              // [C x C]
};

/// Training-time stochastic bits; pass {} for inference.
struct DropoutState {
    double rate = 0.0;
    std::mt19937_64* rng = nullptr;

    bool active() const { return rate > 0.0 && rng != nullptr; }
};

// head_k = softmax(Q K^T / sqrt(d_h)) V, heads concatenated then projected.
// Captured matrices are the softmax outputs, before any dropout.
Tensor multi_head_attention(const Tensor& z, const EncoderLayerParams& params,
                            const DropoutState& dropout_state,
                            AttentionRecord* capture = nullptr);

Tensor feed_forward(const Tensor& z, const EncoderLayerParams& params,
                    Activation activation, const DropoutState& dropout_state);

Tensor encoder_layer(const Tensor& z, const EncoderLayerParams& params,
                     NormStyle norm_style, Activation activation,
                     const DropoutState& dropout_state,
                     AttentionRecord* capture = nullptr);

// N sequential layers; when capture is non-null it receives the record of the
// last layer.
Tensor encoder_forward(const Tensor& z0, const std::vector<EncoderLayerParams>& layers,
                       NormStyle norm_style, Activation activation,
                       const DropoutState& dropout_state,
                       AttentionRecord* capture = nullptr);

}  // namespace tsf
