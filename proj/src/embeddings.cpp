#include "tsf/embeddings.hpp"

#include <numeric>

namespace tsf {

namespace {

Matrix normal_init(Index rows, Index cols, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

}  // namespace

EmbeddingTables EmbeddingTables::init(int lookback, int channels, int period, int dim,
                                      std::mt19937_64& rng) {
    if (lookback <= 0 || channels <= 0 || period <= 0 || dim <= 0)
        throw ConfigError("embedding tables: all dimensions must be positive");
    constexpr double kInitStd = 0.02;
    EmbeddingTables t;
    t.token_weight = Tensor(normal_init(lookback, dim, rng, kInitStd), true);
    t.token_bias = Tensor(normal_init(1, dim, rng, kInitStd), true);
    t.channel_table = Tensor(normal_init(channels, dim, rng, kInitStd), true);
    t.phase_table = Tensor(normal_init(period, dim, rng, kInitStd), true);
    t.joint_table = Tensor(normal_init(static_cast<Index>(channels) * period, dim, rng, kInitStd), true);
    t.channels = channels;
    t.period = period;
    return t;
}

Tensor variate_tokenize(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rows() != weight.rows())
        throw DimensionError("variate_tokenize: lookback mismatch, x has " +
                             std::to_string(x.rows()) + " rows but W has " +
                             std::to_string(weight.rows()));
    return add_rowvec(matmul(transpose(x), weight), bias);
}

Tensor embed_channels(const Tensor& channel_table) {
    std::vector<int> all(static_cast<std::size_t>(channel_table.rows()));
    std::iota(all.begin(), all.end(), 0);
    return gather_rows(channel_table, all);
}

Tensor embed_phase(const Tensor& phase_table, long t_last, int period, int channels) {
    if (phase_table.rows() != period)
        throw DimensionError("embed_phase: table has " + std::to_string(phase_table.rows()) +
                             " rows, period is " + std::to_string(period));
    const int phase = phase_of(t_last, period);
    // one row replicated C times; backward accumulates all C rows into it
    std::vector<int> idx(static_cast<std::size_t>(channels), phase);
    return gather_rows(phase_table, idx);
}

Tensor embed_joint(const Tensor& joint_table, long t_last, int period, int channels) {
    if (joint_table.rows() != static_cast<Index>(channels) * period)
        throw DimensionError("embed_joint: table has " + std::to_string(joint_table.rows()) +
                             " rows, expected channels*period = " +
                             std::to_string(static_cast<long>(channels) * period));
    const int phase = phase_of(t_last, period);
    std::vector<int> idx(static_cast<std::size_t>(channels));
    for (int i = 0; i < channels; ++i) idx[static_cast<std::size_t>(i)] = i * period + phase;
    return gather_rows(joint_table, idx);
}

Tensor fuse(const Tensor& e_x, const Tensor& e_c, const Tensor& e_p, const Tensor& e_cp) {
    return add(add(add(e_x, e_c), e_p), e_cp);
}

}  // namespace tsf
