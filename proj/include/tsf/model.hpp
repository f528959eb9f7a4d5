#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsf/embeddings.hpp"
#include "tsf/encoder.hpp"

namespace tsf {

enum class Backbone { transformer, mlp_only };
enum class HeadKind { mlp, linear };

/// Every architectural switch in one place. validate() names the offending
/// field on failure.
struct ModelConfig {
    int lookback = 96;
    int horizon = 96;
    int channels = 1;
    int period = 24;
    int dim = 256;
    int layers = 2;
    int heads = 8;
    int ffn_dim = 512;
    NormStyle norm_style = NormStyle::post;
    bool revin = true;
    bool ablate_channel = false;
    bool ablate_phase = false;
    bool ablate_joint = false;
    Backbone backbone = Backbone::transformer;
    HeadKind head = HeadKind::mlp;
    bool mean_input = false;
    double dropout = 0.1;
    std::uint64_t seed = 1;

    void validate() const;

    // "token-only", "token+channel", "full", or the enabled subset.
    std::string ablation_tag() const;
};

/// Per-window, per-channel lookback statistics for the normalization
/// sandwich. Computed before the forward pass, reapplied after the head.
struct InstanceStats {
    Matrix mean;  // 1 x C
    Matrix std;   // 1 x C, floored at 1e-8

    static constexpr double kStdFloor = 1e-8;
    static InstanceStats from_lookback(const Matrix& x);
};

// Per-token projection d -> H (one hidden layer for HeadKind::mlp), output
// [C x H].
struct HeadParams {
    HeadKind kind = HeadKind::mlp;
    Tensor w1, b1;  // mlp: d -> d_ff; linear: d -> H
    Tensor w2, b2;  // mlp only: d_ff -> H

    static HeadParams init(HeadKind kind, int dim, int ffn_dim, int horizon,
                           std::mt19937_64& rng);
};

Tensor head_projection(const Tensor& z, const HeadParams& params, Activation activation);

/// The full model: normalization sandwich, embedding fusion, encoder (or a
/// pass-through when the backbone is ablated), projection head,
/// denormalization.
class Forecaster {
public:
    explicit Forecaster(const ModelConfig& cfg);

    struct Output {
        Tensor prediction;  // [H x C], after denormalization
        Tensor pre_denorm;  // [H x C], before the sandwich is inverted
        std::optional<AttentionRecord> attention;
    };

    Output forward(const Tensor& x, long t_last,
                   const DropoutState& dropout_state = {},
                   bool capture_attention = false) const;

    const ModelConfig& config() const { return cfg_; }
    EmbeddingTables& tables() { return tables_; }
    const EmbeddingTables& tables() const { return tables_; }

    // Stable, creation-ordered registry; checkpoints and the optimizer
    // iterate it in this order.
    const std::vector<std::pair<std::string, Tensor>>& parameters() const {
        return params_;
    }
    void zero_grad();

    static constexpr Activation kActivation = Activation::gelu;

private:
    ModelConfig cfg_;
    EmbeddingTables tables_;
    std::vector<EncoderLayerParams> layers_;
    HeadParams head_;
    std::vector<std::pair<std::string, Tensor>> params_;
};

}  // namespace tsf
