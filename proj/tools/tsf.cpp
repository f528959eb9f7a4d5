// Command-line entry point: train / eval / diagnose / export-embeddings.
// Exit codes: 0 success, 2 validation error, 3 numerical divergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsf/config.hpp"
#include "tsf/diagnostics.hpp"
#include "tsf/trainer.hpp"

namespace fs = std::filesystem;
using namespace tsf;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_override;
    long seed_override = -1;
    bool no_timestamp_column = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "run configuration file")->required();
    cmd->add_option("--out", flags.out_override, "output directory (overrides config)");
    cmd->add_option("--seed", flags.seed_override, "seed (overrides config)");
    cmd->add_flag("--no-timestamp-column", flags.no_timestamp_column,
                  "dataset CSV has no leading timestamp column");
}

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig cfg = RunConfig::from_file(flags.config_path);
    if (!flags.out_override.empty()) cfg.out_dir = flags.out_override;
    if (flags.seed_override >= 0)
        cfg.model.seed = static_cast<std::uint64_t>(flags.seed_override);
    if (flags.no_timestamp_column) cfg.no_timestamp_column = true;
    cfg.validate();
    return cfg;
}

void echo_resolved_config(const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    std::ofstream out(cfg.out_dir + "/resolved_config.txt", std::ios::trunc);
    if (!out) throw IoError("cannot write " + cfg.out_dir + "/resolved_config.txt");
    out << cfg.to_text();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!text.empty() && text.back() != '\n') out << "\n";
}

int cmd_train(const CommonFlags& flags) {
    RunConfig cfg = resolve_config(flags);
    TimeSeriesDataset ds = load_prepared_dataset(cfg);
    echo_resolved_config(cfg);

    const auto& m = cfg.model;
    auto train_w = make_windows(ds, Split::train, m.lookback, m.horizon, m.period);
    auto valid_w = make_windows(ds, Split::valid, m.lookback, m.horizon, m.period);
    auto test_w = make_windows(ds, Split::test, m.lookback, m.horizon, m.period);
    std::cout << "dataset " << ds.name << ": " << ds.steps() << " steps, "
              << ds.channels() << " channels; windows " << train_w.size() << "/"
              << valid_w.size() << "/" << test_w.size() << "\n";

    Forecaster model(cfg.model);
    const std::string stem = cfg.out_dir + "/checkpoint";
    TrainReport report = train(model, train_w, valid_w, test_w, cfg.trainer, stem, &std::cout);
    write_text(cfg.out_dir + "/train_report.json", report.to_json());
    std::cout << "best epoch " << report.best_epoch << ", test_mse " << report.test_mse
              << ", test_mae " << report.test_mae << "\n";
    std::cout << "checkpoint: " << stem << ".bin\n";
    return 0;
}

std::string checkpoint_for_horizon(const std::string& pattern, int horizon,
                                   bool multi_horizon) {
    const std::string token = "{H}";
    const auto pos = pattern.find(token);
    if (pos == std::string::npos) {
        if (multi_horizon)
            throw ConfigError(
                "--checkpoint must contain '{H}' when --horizons lists several values");
        return pattern;
    }
    std::string resolved = pattern;
    resolved.replace(pos, token.size(), std::to_string(horizon));
    return resolved;
}

void dump_forecasts(const Forecaster& model, const std::vector<WindowSample>& windows,
                    int batch_size, const std::string& dir) {
    fs::create_directories(dir);
    std::size_t batch = 0;
    for (std::size_t start = 0; start < windows.size();
         start += static_cast<std::size_t>(batch_size), ++batch) {
        const std::size_t stop =
            std::min(windows.size(), start + static_cast<std::size_t>(batch_size));
        std::ofstream out(dir + "/forecast_batch" + std::to_string(batch) + ".csv",
                          std::ios::trunc);
        if (!out) throw IoError("cannot write forecast dump in " + dir);
        char buf[48];
        for (std::size_t k = start; k < stop; ++k) {
            const WindowSample& w = windows[k];
            const Matrix pred = model.forward(w.x, w.t_last).prediction.value();
            out << "# window " << k << " t_last " << w.t_last << "\n";
            for (Index i = 0; i < pred.rows(); ++i) {
                for (Index j = 0; j < pred.cols(); ++j) {
                    std::snprintf(buf, sizeof(buf), "%.17g", pred(i, j));
                    out << buf << (j + 1 < pred.cols() ? "," : "");
                }
                out << "\n";
            }
        }
    }
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint,
             const std::string& horizons_arg, bool dump) {
    RunConfig base = resolve_config(flags);

    std::vector<int> horizons;
    if (horizons_arg.empty()) {
        horizons.push_back(base.model.horizon);
    } else {
        std::istringstream parts(horizons_arg);
        std::string item;
        while (std::getline(parts, item, ',')) {
            try {
                horizons.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw ConfigError("--horizons: cannot parse '" + item + "'");
            }
        }
        if (horizons.empty()) throw ConfigError("--horizons: empty list");
    }

    fs::create_directories(base.out_dir);
    std::ostringstream rows;
    rows << "horizon,mse,mae\n";
    double mse_sum = 0.0, mae_sum = 0.0;
    for (const int h : horizons) {
        RunConfig cfg = base;
        cfg.model.horizon = h;
        TimeSeriesDataset ds = load_prepared_dataset(cfg);
        auto test_w = make_windows(ds, Split::test, cfg.model.lookback, h, cfg.model.period);
        Forecaster model(cfg.model);
        load_checkpoint(model, checkpoint_for_horizon(checkpoint, h, horizons.size() > 1));
        const auto [mse, mae] = evaluate(model, test_w);
        rows << h << "," << mse << "," << mae << "\n";
        std::cout << "horizon " << h << ": mse " << mse << ", mae " << mae << "\n";
        mse_sum += mse;
        mae_sum += mae;
        if (dump) dump_forecasts(model, test_w, cfg.trainer.batch_size,
                                 base.out_dir + "/forecasts_h" + std::to_string(h));
    }
    if (horizons.size() > 1) {
        const double n = static_cast<double>(horizons.size());
        rows << "avg," << mse_sum / n << "," << mae_sum / n << "\n";
        std::cout << "average over " << horizons.size() << " horizons: mse " << mse_sum / n
                  << ", mae " << mae_sum / n << "\n";
    }
    write_text(base.out_dir + "/eval_report.csv", rows.str());
    return 0;
}

int cmd_diagnose(const CommonFlags& flags, const std::string& mode,
                 const std::string& checkpoint) {
    RunConfig cfg = resolve_config(flags);
    fs::create_directories(cfg.out_dir);

    if (mode == "cov") {
        // correlations are taken on the raw, un-normalized series
        CsvOptions opts;
        opts.timestamp_column = !cfg.no_timestamp_column;
        opts.name = cfg.dataset_name;
        TimeSeriesDataset ds = load_csv(cfg.dataset_path, opts);
        const DailyCorrelations daily = daily_correlations(ds, cfg.day_len);
        const CovReport report = cov_matrix(daily);
        write_text(cfg.out_dir + "/cov_report.json", report.to_json());
        report.write_csvs(cfg.out_dir);
        if (report.all_pairs_invalid())
            std::cerr << "warning: every channel pair is invalid (zero variance "
                         "within days); reports contain no finite entries\n";
        std::cout << "cov report written to " << cfg.out_dir << " (" << daily.days.size()
                  << " days of length " << cfg.day_len << ")\n";
        return 0;
    }
    if (mode == "entropy") {
        if (checkpoint.empty())
            throw ConfigError("--checkpoint is required for --mode entropy");
        TimeSeriesDataset ds = load_prepared_dataset(cfg);
        auto test_w = make_windows(ds, Split::test, cfg.model.lookback, cfg.model.horizon,
                                   cfg.model.period);
        auto phase0 = filter_phase0(test_w);
        Forecaster model(cfg.model);
        load_checkpoint(model, checkpoint);
        const EntropyReport report = attention_entropy(model, phase0);
        write_text(cfg.out_dir + "/entropy_report.json", report.to_json());
        std::cout << "entropy (" << report.config_tag << "): h_avg " << report.h_avg
                  << " of max " << report.h_max << " over " << report.window_count
                  << " phase-0 windows\n";
        return 0;
    }
    throw ConfigError("--mode must be cov or entropy, got '" + mode + "'");
}

int cmd_export_embeddings(const CommonFlags& flags, const std::string& checkpoint) {
    RunConfig cfg = resolve_config(flags);
    TimeSeriesDataset ds = load_prepared_dataset(cfg);
    (void)ds;  // only needed to fix the channel count
    Forecaster model(cfg.model);
    load_checkpoint(model, checkpoint);
    export_embeddings(model.tables(), cfg.out_dir);
    std::cout << "embedding tables written to " << cfg.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multivariate time-series forecasting engine"};
    app.require_subcommand(1);

    CommonFlags train_flags, eval_flags, diag_flags, export_flags;
    std::string eval_checkpoint, eval_horizons, diag_mode = "cov", diag_checkpoint,
                export_checkpoint;
    bool eval_dump = false;

    CLI::App* train_cmd = app.add_subcommand("train", "fit a model and write a checkpoint");
    add_common(train_cmd, train_flags);

    CLI::App* eval_cmd = app.add_subcommand("eval", "test metrics from a checkpoint");
    add_common(eval_cmd, eval_flags);
    eval_cmd->add_option("--checkpoint", eval_checkpoint,
                         "checkpoint stem; use '{H}' with --horizons")->required();
    eval_cmd->add_option("--horizons", eval_horizons,
                         "comma list, e.g. 96,192,336,720; emits per-horizon and mean rows");
    eval_cmd->add_flag("--dump-forecasts", eval_dump, "write forecast CSVs per window batch");

    CLI::App* diag_cmd = app.add_subcommand("diagnose", "correlation CoV or attention entropy");
    add_common(diag_cmd, diag_flags);
    diag_cmd->add_option("--mode", diag_mode, "cov | entropy")->required();
    diag_cmd->add_option("--checkpoint", diag_checkpoint, "checkpoint stem (entropy)");

    CLI::App* export_cmd =
        app.add_subcommand("export-embeddings", "dump embedding tables as CSV");
    add_common(export_cmd, export_flags);
    export_cmd->add_option("--checkpoint", export_checkpoint, "checkpoint stem")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_flags);
        if (eval_cmd->parsed())
            return cmd_eval(eval_flags, eval_checkpoint, eval_horizons, eval_dump);
        if (diag_cmd->parsed()) return cmd_diagnose(diag_flags, diag_mode, diag_checkpoint);
        if (export_cmd->parsed())
            return cmd_export_embeddings(export_flags, export_checkpoint);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (!e.last_good_checkpoint.empty())
            std::cerr << "last good checkpoint: " << e.last_good_checkpoint << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
