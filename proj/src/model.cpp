#include "tsf/model.hpp"

#include <cmath>

namespace tsf {

void ModelConfig::validate() const {
    auto positive = [](int v, const char* key) {
        if (v <= 0) throw ConfigError(std::string(key) + " must be positive, got " +
                                      std::to_string(v));
    };
    positive(lookback, "lookback");
    positive(horizon, "horizon");
    positive(channels, "channels");
    positive(period, "period");
    positive(dim, "dim");
    positive(layers, "layers");
    positive(heads, "heads");
    positive(ffn_dim, "ffn_dim");
    if (dim % heads != 0)
        throw ConfigError("dim must be divisible by heads (dim=" + std::to_string(dim) +
                          ", heads=" + std::to_string(heads) + ")");
    if (dropout < 0.0 || dropout >= 1.0)
        throw ConfigError("dropout must be in [0, 1), got " + std::to_string(dropout));
}

std::string ModelConfig::ablation_tag() const {
    const bool c = !ablate_channel, p = !ablate_phase, j = !ablate_joint;
    if (!c && !p && !j) return "token-only";
    if (c && p && j) return "full";
    if (c && !p && !j) return "token+channel";
    std::string tag = "token";
    if (c) tag += "+channel";
    if (p) tag += "+phase";
    if (j) tag += "+joint";
    return tag;
}

InstanceStats InstanceStats::from_lookback(const Matrix& x) {
    InstanceStats s;
    s.mean = x.colwise().mean();
    s.std = ((x.rowwise() - s.mean.row(0)).array().square().colwise().mean())
                .sqrt()
                .matrix()
                .cwiseMax(kStdFloor);
    return s;
}

HeadParams HeadParams::init(HeadKind kind, int dim, int ffn_dim, int horizon,
                            std::mt19937_64& rng) {
    constexpr double kInitStd = 0.02;
    std::normal_distribution<double> dist(0.0, kInitStd);
    auto normal = [&](Index r, Index c) {
        Matrix m(r, c);
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < c; ++j) m(i, j) = dist(rng);
        return m;
    };
    HeadParams p;
    p.kind = kind;
    if (kind == HeadKind::mlp) {
        p.w1 = Tensor(normal(dim, ffn_dim), true);
        p.b1 = Tensor(Matrix::Zero(1, ffn_dim), true);
        p.w2 = Tensor(normal(ffn_dim, horizon), true);
        p.b2 = Tensor(Matrix::Zero(1, horizon), true);
    } else {
        p.w1 = Tensor(normal(dim, horizon), true);
        p.b1 = Tensor(Matrix::Zero(1, horizon), true);
    }
    return p;
}

Tensor head_projection(const Tensor& z, const HeadParams& params, Activation activation) {
    if (params.kind == HeadKind::linear)
        return add_rowvec(matmul(z, params.w1), params.b1);
    Tensor hidden = add_rowvec(matmul(z, params.w1), params.b1);
    hidden = activation == Activation::gelu ? gelu(hidden) : relu(hidden);
    return add_rowvec(matmul(hidden, params.w2), params.b2);
}

Forecaster::Forecaster(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    tables_ = EmbeddingTables::init(cfg_.lookback, cfg_.channels, cfg_.period, cfg_.dim, rng);
    params_.emplace_back("embed.token_w", tables_.token_weight);
    params_.emplace_back("embed.token_b", tables_.token_bias);
    params_.emplace_back("embed.channel", tables_.channel_table);
    params_.emplace_back("embed.phase", tables_.phase_table);
    params_.emplace_back("embed.joint", tables_.joint_table);

    if (cfg_.backbone == Backbone::transformer) {
        for (int l = 0; l < cfg_.layers; ++l) {
            layers_.push_back(EncoderLayerParams::init(cfg_.dim, cfg_.heads, cfg_.ffn_dim, rng));
            const std::string prefix = "enc" + std::to_string(l) + ".";
            EncoderLayerParams& p = layers_.back();
            for (int k = 0; k < cfg_.heads; ++k) {
                const std::string suffix = std::to_string(k);
                params_.emplace_back(prefix + "wq" + suffix, p.wq[static_cast<std::size_t>(k)]);
                params_.emplace_back(prefix + "wk" + suffix, p.wk[static_cast<std::size_t>(k)]);
                params_.emplace_back(prefix + "wv" + suffix, p.wv[static_cast<std::size_t>(k)]);
            }
            params_.emplace_back(prefix + "wo", p.wo);
            params_.emplace_back(prefix + "ffn_w1", p.ffn_w1);
            params_.emplace_back(prefix + "ffn_b1", p.ffn_b1);
            params_.emplace_back(prefix + "ffn_w2", p.ffn_w2);
            params_.emplace_back(prefix + "ffn_b2", p.ffn_b2);
            params_.emplace_back(prefix + "ln1_gain", p.ln1_gain);
            params_.emplace_back(prefix + "ln1_bias", p.ln1_bias);
            params_.emplace_back(prefix + "ln2_gain", p.ln2_gain);
            params_.emplace_back(prefix + "ln2_bias", p.ln2_bias);
        }
    }

    head_ = HeadParams::init(cfg_.head, cfg_.dim, cfg_.ffn_dim, cfg_.horizon, rng);
    params_.emplace_back("head.w1", head_.w1);
    params_.emplace_back("head.b1", head_.b1);
    if (cfg_.head == HeadKind::mlp) {
        params_.emplace_back("head.w2", head_.w2);
        params_.emplace_back("head.b2", head_.b2);
    }
}

void Forecaster::zero_grad() {
    for (auto& [name, tensor] : params_) tensor.zero_grad();
}

Forecaster::Output Forecaster::forward(const Tensor& x, long t_last,
                                       const DropoutState& dropout_state,
                                       bool capture_attention) const {
    if (x.rows() != cfg_.lookback || x.cols() != cfg_.channels)
        throw DimensionError("forward: expected input " + std::to_string(cfg_.lookback) +
                             "x" + std::to_string(cfg_.channels) + ", got " +
                             std::to_string(x.rows()) + "x" + std::to_string(x.cols()));

    // (1) normalization sandwich, statistics from the lookback only
    InstanceStats stats;
    Tensor net_input = x;
    if (cfg_.revin) {
        stats = InstanceStats::from_lookback(x.value());
        Matrix normed = x.value();
        normed.rowwise() -= stats.mean.row(0);
        normed.array().rowwise() /= stats.std.row(0).array();
        net_input = Tensor(std::move(normed));
    }
    // (2) mean-input ablation: the normalized mean, i.e. zeros
    if (cfg_.mean_input)
        net_input = Tensor(Matrix::Zero(x.rows(), x.cols()));

    // (3) fused token representation, honoring ablation masks
    Tensor z = variate_tokenize(net_input, tables_.token_weight, tables_.token_bias);
    if (!cfg_.ablate_channel) z = add(z, embed_channels(tables_.channel_table));
    if (!cfg_.ablate_phase)
        z = add(z, embed_phase(tables_.phase_table, t_last, cfg_.period, cfg_.channels));
    if (!cfg_.ablate_joint)
        z = add(z, embed_joint(tables_.joint_table, t_last, cfg_.period, cfg_.channels));

    // (4) backbone
    Output out;
    if (cfg_.backbone == Backbone::transformer) {
        AttentionRecord record;
        z = encoder_forward(z, layers_, cfg_.norm_style, kActivation, dropout_state,
                            capture_attention ? &record : nullptr);
        if (capture_attention) out.attention = std::move(record);
    }

    // (5) projection head, then transpose to [H x C]
    Tensor pre = transpose(head_projection(z, head_, kActivation));

    // (6) invert the sandwich
    out.pre_denorm = pre;
    if (cfg_.revin) {
        out.prediction = add_rowvec(mul_rowvec(pre, Tensor(stats.std)), Tensor(stats.mean));
    } else {
        out.prediction = pre;
    }
    return out;
}

}  // namespace tsf
