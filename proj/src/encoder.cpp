#include "tsf/encoder.hpp"

#include <cmath>

namespace tsf {

namespace {

Matrix normal_init(Index rows, Index cols, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

Tensor apply_activation(const Tensor& t, Activation activation) {
    return activation == Activation::gelu ? gelu(t) : relu(t);
}

}  // namespace

EncoderLayerParams EncoderLayerParams::init(int dim, int heads, int ffn_dim,
                                            std::mt19937_64& rng) {
    if (dim <= 0 || heads <= 0 || ffn_dim <= 0)
        throw ConfigError("encoder layer: dim, heads, ffn_dim must be positive");
    if (dim % heads != 0)
        throw ConfigError("encoder layer: dim " + std::to_string(dim) +
                          " not divisible by heads " + std::to_string(heads));
    if (ffn_dim < dim)
        throw ConfigError("encoder layer: ffn_dim " + std::to_string(ffn_dim) +
                          " must be >= dim " + std::to_string(dim));
    constexpr double kInitStd = 0.02;
    const int head_dim = dim / heads;

    EncoderLayerParams p;
    p.heads = heads;
    p.head_dim = head_dim;
    for (int k = 0; k < heads; ++k) {
        p.wq.emplace_back(normal_init(dim, head_dim, rng, kInitStd), true);
        p.wk.emplace_back(normal_init(dim, head_dim, rng, kInitStd), true);
        p.wv.emplace_back(normal_init(dim, head_dim, rng, kInitStd), true);
    }
    p.wo = Tensor(normal_init(static_cast<Index>(heads) * head_dim, dim, rng, kInitStd), true);
    p.ffn_w1 = Tensor(normal_init(dim, ffn_dim, rng, kInitStd), true);
    p.ffn_b1 = Tensor(Matrix::Zero(1, ffn_dim), true);
    p.ffn_w2 = Tensor(normal_init(ffn_dim, dim, rng, kInitStd), true);
    p.ffn_b2 = Tensor(Matrix::Zero(1, dim), true);
    p.ln1_gain = Tensor(Matrix::Ones(1, dim), true);
    p.ln1_bias = Tensor(Matrix::Zero(1, dim), true);
    p.ln2_gain = Tensor(Matrix::Ones(1, dim), true);
    p.ln2_bias = Tensor(Matrix::Zero(1, dim), true);
    return p;
}

Tensor multi_head_attention(const Tensor& z, const EncoderLayerParams& params,
                            const DropoutState& dropout_state,
                            AttentionRecord* capture) {
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(params.head_dim));
    if (capture) {
        capture->per_head.clear();
        capture->head_mean = Matrix::Zero(z.rows(), z.rows());
    }

    std::vector<Tensor> heads;
    heads.reserve(params.wq.size());
    for (std::size_t k = 0; k < params.wq.size(); ++k) {
        Tensor q = matmul(z, params.wq[k]);
        Tensor key = matmul(z, params.wk[k]);
        Tensor v = matmul(z, params.wv[k]);
        Tensor scores = scale(matmul(q, transpose(key)), inv_sqrt_dh);
        Tensor attn = softmax_rows(scores);
        if (capture) {
            capture->per_head.push_back(attn.value());
            capture->head_mean += attn.value();
        }
        if (dropout_state.active())
            attn = dropout(attn, dropout_state.rate, *dropout_state.rng);
        heads.push_back(matmul(attn, v));
    }
    if (capture) capture->head_mean /= static_cast<double>(params.wq.size());
    return matmul(concat_cols(heads), params.wo);
}

Tensor feed_forward(const Tensor& z, const EncoderLayerParams& params,
                    Activation activation, const DropoutState& dropout_state) {
    Tensor hidden = apply_activation(add_rowvec(matmul(z, params.ffn_w1), params.ffn_b1),
                                     activation);
    if (dropout_state.active())
        hidden = dropout(hidden, dropout_state.rate, *dropout_state.rng);
    return add_rowvec(matmul(hidden, params.ffn_w2), params.ffn_b2);
}

Tensor encoder_layer(const Tensor& z, const EncoderLayerParams& params,
                     NormStyle norm_style, Activation activation,
                     const DropoutState& dropout_state, AttentionRecord* capture) {
    if (norm_style == NormStyle::post) {
        Tensor attended = multi_head_attention(z, params, dropout_state, capture);
        Tensor z_mid = layer_norm(add(attended, z), params.ln1_gain, params.ln1_bias);
        Tensor fed = feed_forward(z_mid, params, activation, dropout_state);
        return layer_norm(add(fed, z_mid), params.ln2_gain, params.ln2_bias);
    }
    Tensor normed = layer_norm(z, params.ln1_gain, params.ln1_bias);
    Tensor z_mid = add(multi_head_attention(normed, params, dropout_state, capture), z);
    Tensor normed2 = layer_norm(z_mid, params.ln2_gain, params.ln2_bias);
    return add(feed_forward(normed2, params, activation, dropout_state), z_mid);
}

Tensor encoder_forward(const Tensor& z0, const std::vector<EncoderLayerParams>& layers,
                       NormStyle norm_style, Activation activation,
                       const DropoutState& dropout_state, AttentionRecord* capture) {
    if (layers.empty()) throw ContractError("encoder_forward: need at least one layer");
    Tensor z = z0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const bool last = l + 1 == layers.size();
        AttentionRecord* rec = (capture && last) ? capture : nullptr;
        if (rec) rec->layer = static_cast<int>(l + 1);
        z = encoder_layer(z, layers[l], norm_style, activation, dropout_state, rec);
    }
    return z;
}

}  // namespace tsf
