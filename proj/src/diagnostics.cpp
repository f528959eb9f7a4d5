#include "tsf/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace tsf {

using nlohmann::json;

DailyCorrelations daily_correlations(const TimeSeriesDataset& ds, int day_len) {
    if (day_len < 2) throw ContractError("daily_correlations: day_len must be >= 2");
    const Index total_days = ds.steps() / day_len;
    if (total_days < 2)
        throw ContractError("daily_correlations: dataset holds " +
                            std::to_string(total_days) +
                            " complete days of length " + std::to_string(day_len) +
                            ", need at least 2");

    const Index c = ds.channels();
    DailyCorrelations out;
    out.day_len = day_len;
    out.days.reserve(static_cast<std::size_t>(total_days));
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (Index n = 0; n < total_days; ++n) {
        Matrix block = ds.values.value().middleRows(n * day_len, day_len);
        block.rowwise() -= block.colwise().mean().eval();
        const Matrix gram = block.transpose() * block;

        Matrix r(c, c);
        for (Index i = 0; i < c; ++i) {
            for (Index j = 0; j < c; ++j) {
                if (gram(i, i) <= 0.0 || gram(j, j) <= 0.0) {
                    r(i, j) = nan;  // zero-variance channel this day
                } else if (i == j) {
                    r(i, j) = 1.0;
                } else {
                    r(i, j) = gram(i, j) / std::sqrt(gram(i, i) * gram(j, j));
                }
            }
        }
        out.days.push_back(std::move(r));
    }
    return out;
}

CovReport cov_matrix(const DailyCorrelations& daily) {
    if (daily.days.size() < 2)
        throw ContractError("cov_matrix: need at least 2 days, got " +
                            std::to_string(daily.days.size()));
    const Index c = daily.days.front().rows();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();

    CovReport report;
    report.mean = Matrix::Constant(c, c, nan);
    report.stddev = Matrix::Constant(c, c, nan);
    report.cov = Matrix::Constant(c, c, nan);
    report.valid_days.setZero(c, c);

    for (Index i = 0; i < c; ++i) {
        for (Index j = 0; j < c; ++j) {
            double sum = 0.0;
            int count = 0;
            for (const Matrix& day : daily.days) {
                if (std::isfinite(day(i, j))) {
                    sum += day(i, j);
                    ++count;
                }
            }
            report.valid_days(i, j) = count;
            if (count < 2) continue;  // pair not reportable

            const double mu = sum / count;
            double sq = 0.0;
            for (const Matrix& day : daily.days)
                if (std::isfinite(day(i, j))) sq += (day(i, j) - mu) * (day(i, j) - mu);
            const double sigma = std::sqrt(sq / count);  // population std

            report.mean(i, j) = mu;
            report.stddev(i, j) = sigma;
            if (std::abs(mu) < 1e-12) {
                report.cov(i, j) = inf;
                report.infinite_pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
            } else {
                report.cov(i, j) = sigma / mu;
            }
        }
    }
    return report;
}

bool CovReport::all_pairs_invalid() const {
    for (Index i = 0; i < mean.rows(); ++i)
        for (Index j = 0; j < mean.cols(); ++j)
            if (std::isfinite(mean(i, j))) return false;
    return true;
}

namespace {

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            if (std::isnan(v))
                row.push_back(nullptr);
            else if (std::isinf(v))
                row.push_back(v > 0 ? "inf" : "-inf");
            else
                row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_matrix_csv(const Matrix& m, const std::string& path, const std::string& name) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << "# name=" << name << " shape=" << m.rows() << "x" << m.cols() << "\n";
    char buf[48];
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            if (std::isnan(v)) {
                out << "nan";
            } else if (std::isinf(v)) {
                out << (v > 0 ? "inf" : "-inf");
            } else {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                out << buf;
            }
            if (j + 1 < m.cols()) out << ",";
        }
        out << "\n";
    }
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace

std::string CovReport::to_json() const {
    json j;
    j["mean"] = matrix_to_json(mean);
    j["stddev"] = matrix_to_json(stddev);
    j["cov"] = matrix_to_json(cov);
    json counts = json::array();
    for (Index i = 0; i < valid_days.rows(); ++i) {
        json row = json::array();
        for (Index jj = 0; jj < valid_days.cols(); ++jj) row.push_back(valid_days(i, jj));
        counts.push_back(std::move(row));
    }
    j["valid_days"] = counts;
    j["infinite_pairs"] = json::array();
    for (const auto& [a, b] : infinite_pairs) j["infinite_pairs"].push_back({a, b});
    return j.dump(2);
}

void CovReport::write_csvs(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    write_matrix_csv(mean, dir + "/mean.csv", "correlation_mean");
    write_matrix_csv(stddev, dir + "/stddev.csv", "correlation_stddev");
    write_matrix_csv(cov, dir + "/cov.csv", "correlation_cov");
}

double row_entropy_bits(const Eigen::Ref<const Eigen::RowVectorXd>& p) {
    double h = 0.0;
    for (Index j = 0; j < p.size(); ++j)
        if (p(j) > 0.0) h -= p(j) * std::log2(p(j));
    return h;
}

EntropyReport attention_entropy(const Forecaster& model,
                                const std::vector<WindowSample>& phase0_windows) {
    if (model.config().backbone != Backbone::transformer)
        throw ContractError("attention_entropy: model has no attention backbone");
    if (phase0_windows.empty())
        throw ContractError("attention_entropy: no window at phase 0 in the split (period " +
                            std::to_string(model.config().period) + ")");

    const int c = model.config().channels;
    EntropyReport report;
    report.config_tag = model.config().ablation_tag();
    report.h_max = std::log2(static_cast<double>(c));
    report.row_entropy.assign(static_cast<std::size_t>(c), 0.0);

    double total = 0.0;
    for (const WindowSample& w : phase0_windows) {
        const auto out = model.forward(w.x, w.t_last, {}, /*capture_attention=*/true);
        const Matrix& mean_attn = out.attention->head_mean;
        double window_avg = 0.0;
        for (Index i = 0; i < mean_attn.rows(); ++i) {
            const double h = row_entropy_bits(mean_attn.row(i));
            report.row_entropy[static_cast<std::size_t>(i)] += h;
            window_avg += h;
        }
        total += window_avg / static_cast<double>(c);
    }
    const double n = static_cast<double>(phase0_windows.size());
    for (double& h : report.row_entropy) h /= n;
    report.h_avg = total / n;
    report.window_count = static_cast<int>(phase0_windows.size());
    return report;
}

std::vector<WindowSample> filter_phase0(const std::vector<WindowSample>& windows) {
    std::vector<WindowSample> out;
    for (const WindowSample& w : windows)
        if (w.phase == 0) out.push_back(w);
    return out;
}

std::string EntropyReport::to_json() const {
    json j;
    j["h_avg"] = h_avg;
    j["h_max"] = h_max;
    j["window_count"] = window_count;
    j["config_tag"] = config_tag;
    j["row_entropy"] = row_entropy;
    return j.dump(2);
}

void export_embeddings(const EmbeddingTables& tables, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_matrix_csv(tables.channel_table.value(), dir + "/channel_embedding.csv",
                     "channel_embedding");
    write_matrix_csv(tables.phase_table.value(), dir + "/phase_embedding.csv",
                     "phase_embedding");
    for (int i = 0; i < tables.channels; ++i) {
        const Matrix slice =
            tables.joint_table.value().middleRows(static_cast<Index>(i) * tables.period,
                                                  tables.period);
        write_matrix_csv(slice, dir + "/joint_embedding_ch" + std::to_string(i) + ".csv",
                         "joint_embedding_ch" + std::to_string(i));
    }
}

}  // namespace tsf
