#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tsf/data.hpp"
#include "tsf/model.hpp"

namespace tsf {

/// One Pearson correlation matrix per complete day. Entries involving a
/// zero-variance channel are NaN and excluded from downstream statistics.
struct DailyCorrelations {
    int day_len = 0;
    std::vector<Matrix> days;  // [C x C] each, NaN marks invalid pairs
};

// Trailing partial day is dropped. day_len must fit at least twice.
DailyCorrelations daily_correlations(const TimeSeriesDataset& ds, int day_len);

/// Across-day mean, population std and CoV = sigma/mu of the pairwise daily
/// correlations. Pairs whose |mu| < 1e-12 get an infinite CoV and a flag;
/// pairs with fewer than 2 valid days are NaN throughout.
struct CovReport {
    Matrix mean;    // C x C
    Matrix stddev;  // C x C
    Matrix cov;     // C x C, +inf where flagged
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> valid_days;
    std::vector<std::pair<int, int>> infinite_pairs;

    bool all_pairs_invalid() const;
    std::string to_json() const;
    // mean.csv, stddev.csv, cov.csv under dir
    void write_csvs(const std::string& dir) const;
};

CovReport cov_matrix(const DailyCorrelations& daily);

// -sum p log2 p with 0*log(0) := 0.
double row_entropy_bits(const Eigen::Ref<const Eigen::RowVectorXd>& p);

/// Mean base-2 row entropy of the head-averaged last-layer attention,
/// averaged over the supplied phase-0 windows.
struct EntropyReport {
    std::vector<double> row_entropy;  // per-row H_i, averaged over windows
    double h_avg = 0.0;
    double h_max = 0.0;  // log2(C)
    int window_count = 0;
    std::string config_tag;

    std::string to_json() const;
};

EntropyReport attention_entropy(const Forecaster& model,
                                const std::vector<WindowSample>& phase0_windows);

// Filters to phase == 0 (the convention used by the entropy analysis).
std::vector<WindowSample> filter_phase0(const std::vector<WindowSample>& windows);

// channel_embedding.csv, phase_embedding.csv and one joint_embedding_ch<i>.csv
// per channel, full precision, "# name=... shape=RxC" header comment.
void export_embeddings(const EmbeddingTables& tables, const std::string& dir);

}  // namespace tsf
