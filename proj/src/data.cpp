#include "tsf/data.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string_view>

namespace tsf {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

double parse_cell(std::string_view cell, long row, std::size_t col) {
    // trim surrounding spaces
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value))
        throw ParseError("parse error at row " + std::to_string(row) + ", column " +
                         std::to_string(col + 1) + ": cannot read numeric value from '" +
                         std::string(cell) + "'");
    return value;
}

}  // namespace

TimeSeriesDataset load_csv(const std::string& path, const CsvOptions& opts) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t header_cols = split_fields(line).size();
    const std::size_t skip = opts.timestamp_column ? 1 : 0;
    if (header_cols <= skip)
        throw ParseError("header of " + path + " declares no data channels");
    const std::size_t channels = header_cols - skip;

    std::vector<double> buffer;
    long row = 0;  // 1-based data row counter (header excluded)
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        const auto fields = split_fields(line);
        if (fields.size() != header_cols)
            throw ParseError("parse error at row " + std::to_string(row) + ": expected " +
                             std::to_string(header_cols) + " fields, found " +
                             std::to_string(fields.size()));
        for (std::size_t c = skip; c < fields.size(); ++c)
            buffer.push_back(parse_cell(fields[c], row, c));
    }
    if (row == 0) throw ParseError("no data rows in file: " + path);

    Matrix values = Eigen::Map<const Matrix>(buffer.data(), row,
                                             static_cast<Index>(channels));
    TimeSeriesDataset ds;
    ds.name = opts.name.empty() ? std::filesystem::path(path).stem().string() : opts.name;
    ds.values = Tensor(std::move(values));
    return ds;
}

SplitBounds chronological_split(TimeSeriesDataset& ds, const SplitRatios& ratios,
                                Index lookback, Index horizon) {
    if (ratios.train <= 0.0 || ratios.valid <= 0.0 || ratios.test <= 0.0)
        throw ConfigError("split ratios must all be positive");
    if (std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1, got " +
                          std::to_string(ratios.train + ratios.valid + ratios.test));

    const Index total = ds.steps();
    const Index train_end = static_cast<Index>(std::floor(total * ratios.train));
    const Index valid_end =
        static_cast<Index>(std::floor(total * (ratios.train + ratios.valid)));

    const Index min_span = lookback + horizon;
    const Index spans[3] = {train_end, valid_end - train_end, total - valid_end};
    const char* names[3] = {"train", "valid", "test"};
    for (int s = 0; s < 3; ++s)
        if (spans[s] < min_span)
            throw ConfigError(std::string(names[s]) + " split has " +
                              std::to_string(spans[s]) + " rows, shorter than lookback+horizon=" +
                              std::to_string(min_span));

    ds.split_bounds = {train_end, valid_end};
    return ds.split_bounds;
}

Normalizer Normalizer::fit(const TimeSeriesDataset& ds, bool train_only) {
    const Index rows = train_only ? ds.split_bounds.train_end : ds.steps();
    if (rows <= 0) throw ContractError("normalizer: empty fitting span");
    const auto block = ds.values.value().topRows(rows);
    Normalizer n;
    n.mean = block.colwise().mean();
    n.std = ((block.rowwise() - n.mean.row(0)).array().square().colwise().mean())
                .sqrt()
                .matrix();
    n.std = n.std.cwiseMax(kStdFloor);
    return n;
}

Matrix Normalizer::apply(const Matrix& x) const {
    Matrix out = x;
    out.rowwise() -= mean.row(0);
    out.array().rowwise() /= std.row(0).array();
    return out;
}

Matrix Normalizer::invert(const Matrix& x) const {
    Matrix out = x;
    out.array().rowwise() *= std.row(0).array();
    out.rowwise() += mean.row(0);
    return out;
}

void Normalizer::apply_in_place(TimeSeriesDataset& ds) const {
    ds.values.value() = apply(ds.values.value());
}

std::vector<WindowSample> make_windows(const TimeSeriesDataset& ds, Split split,
                                       Index lookback, Index horizon, int period,
                                       Index stride) {
    if (lookback <= 0 || horizon <= 0 || period <= 0 || stride <= 0)
        throw ConfigError("make_windows: lookback, horizon, period, stride must be positive");

    Index begin = 0, end = 0;
    switch (split) {
        case Split::train: begin = 0; end = ds.split_bounds.train_end; break;
        case Split::valid: begin = ds.split_bounds.train_end; end = ds.split_bounds.valid_end; break;
        case Split::test:  begin = ds.split_bounds.valid_end; end = ds.steps(); break;
    }

    std::vector<WindowSample> windows;
    const Index first = std::max<Index>(0, begin - lookback);
    const Index last = end - lookback - horizon;  // inclusive; target ends at the right edge
    if (last < first) return windows;

    windows.reserve(static_cast<std::size_t>((last - first) / stride + 1));
    const Matrix& v = ds.values.value();
    for (Index s = first; s <= last; s += stride) {
        WindowSample w;
        w.x = Tensor(v.middleRows(s, lookback));
        w.y = Tensor(v.middleRows(s + lookback, horizon));
        w.t_last = ds.start_index + s + lookback - 1;
        w.phase = static_cast<int>(((w.t_last % period) + period) % period);
        windows.push_back(std::move(w));
    }
    return windows;
}

}  // namespace tsf
