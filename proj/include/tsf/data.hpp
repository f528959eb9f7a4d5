#pragma once

#include <string>
#include <vector>

#include "tsf/tensor.hpp"

namespace tsf {

enum class Split { train, valid, test };

struct SplitBounds {
    Index train_end = 0;  // first row of the validation span
    Index valid_end = 0;  // first row of the test span
};

/// Raw multivariate series with absolute step indices. Rows are time steps,
/// columns are channels. Immutable after construction except for the
/// normalization applied through Normalizer::apply_in_place.
struct TimeSeriesDataset {
    std::string name;
    Tensor values;        // [T x C]
    long start_index = 0; // absolute step index of row 0
    int period_daily = 24;
    int period_weekly = 168;  // 7 * period_daily
    SplitBounds split_bounds;

    Index steps() const { return values.rows(); }
    Index channels() const { return values.cols(); }
};

struct CsvOptions {
    bool timestamp_column = true;  // column 1 is a timestamp string
    std::string name;              // defaults to the file stem
};

// Header row required; comma-separated; LF or CRLF. Parse failures carry the
// offending data row number.
TimeSeriesDataset load_csv(const std::string& path, const CsvOptions& opts = {});

struct SplitRatios {
    double train = 0.7;
    double valid = 0.1;
    double test = 0.2;
};

// Contiguous chronological spans. Each span must be able to hold a full
// lookback+horizon window. Stores the bounds on the dataset and returns them.
SplitBounds chronological_split(TimeSeriesDataset& ds, const SplitRatios& ratios,
                                Index lookback, Index horizon);

/// Per-channel z-score statistics, fitted on the training span only.
struct Normalizer {
    Matrix mean;  // 1 x C
    Matrix std;   // 1 x C, floored at 1e-8

    static constexpr double kStdFloor = 1e-8;

    static Normalizer fit(const TimeSeriesDataset& ds, bool train_only = true);
    Matrix apply(const Matrix& x) const;
    Matrix invert(const Matrix& x) const;
    void apply_in_place(TimeSeriesDataset& ds) const;
};

/// One training/evaluation instance. x rows immediately precede y rows.
struct WindowSample {
    Tensor x;     // [L x C]
    Tensor y;     // [H x C]
    long t_last;  // absolute index of the last observed step
    int phase;    // t_last mod P
};

// Every valid (x, y) pair in the split at the given stride. Lookbacks may
// reach back into the preceding span; targets never cross the split's right
// edge. A split too short for any window yields an empty sequence.
std::vector<WindowSample> make_windows(const TimeSeriesDataset& ds, Split split,
                                       Index lookback, Index horizon, int period,
                                       Index stride = 1);

}  // namespace tsf
