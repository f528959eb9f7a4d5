#pragma once

#include <random>

#include "tsf/tensor.hpp"

namespace tsf {

/// The four learnable blocks that build the fused token representation:
/// the variate-token projection (W, b), the per-channel table, the per-phase
/// table, and the joint channel-phase table.
///
/// The joint table is stored flat as [C*P x d]; the vector for channel i at
/// phase p lives at row i*P + p, so lookups reuse gather_rows and its
/// scatter-add gradient.
struct EmbeddingTables {
    Tensor token_weight;   // W  [L x d]
    Tensor token_bias;     // b  [1 x d]
    Tensor channel_table;  // [C x d]
    Tensor phase_table;    // [P x d]
    Tensor joint_table;    // [C*P x d]

    int channels = 0;
    int period = 0;

    // All blocks i.i.d. normal(0, 0.02), registered as trainable.
    static EmbeddingTables init(int lookback, int channels, int period, int dim,
                                std::mt19937_64& rng);
};

// E_x = x^T W + b, one token row per channel.
Tensor variate_tokenize(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Row i is table[i]; independent of time, so the contribution is identical
// for every window.
Tensor embed_channels(const Tensor& channel_table);

// The single row table[t_last mod period] replicated across all channels.
Tensor embed_phase(const Tensor& phase_table, long t_last, int period, int channels);

// Row i is joint[i*period + (t_last mod period)].
Tensor embed_joint(const Tensor& joint_table, long t_last, int period, int channels);

// Z0 = E_x + E_c + E_p + E_cp (element-wise).
Tensor fuse(const Tensor& e_x, const Tensor& e_c, const Tensor& e_p, const Tensor& e_cp);

inline int phase_of(long t_last, int period) {
    return static_cast<int>(((t_last % period) + period) % period);
}

}  // namespace tsf
