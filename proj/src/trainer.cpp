#include "tsf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

#include <json.hpp>

namespace tsf {

using nlohmann::json;

void TrainConfig::validate() const {
    if (lr < 0.0) throw ConfigError("lr must be >= 0, got " + std::to_string(lr));
    if (beta1 < 0.0 || beta1 >= 1.0) throw ConfigError("beta1 must be in [0, 1)");
    if (beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("beta2 must be in [0, 1)");
    if (epsilon <= 0.0) throw ConfigError("epsilon must be positive");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (max_epochs <= 0) throw ConfigError("max_epochs must be positive");
    if (patience <= 0) throw ConfigError("patience must be positive");
}

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      lr_(cfg.lr),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      epsilon_(cfg.epsilon) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& [name, t] : params_) {
        m_.push_back(Matrix::Zero(t.rows(), t.cols()));
        v_.push_back(Matrix::Zero(t.rows(), t.cols()));
    }
}

double Adam::clip_gradients(double max_norm) {
    double sq = 0.0;
    for (auto& [name, t] : params_)
        if (t.has_grad()) sq += t.grad().squaredNorm();
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& [name, t] : params_)
            if (t.has_grad()) t.grad_ref() *= s;
    }
    return norm;
}

void Adam::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& t = params_[i].second;
        // parameters that never entered the graph keep zero moments
        const Matrix grad = t.has_grad()
                                ? t.grad()
                                : Matrix::Zero(t.rows(), t.cols());
        if (!grad.allFinite())
            throw DivergenceError("non-finite gradient in parameter '" +
                                  params_[i].first + "'");
        Matrix& m = m_[i];
        Matrix& v = v_[i];
        m = beta1_ * m + (1.0 - beta1_) * grad;
        v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
        const Matrix m_hat = m / bc1;
        const Matrix v_hat = v / bc2;
        t.value().array() -=
            lr_ * m_hat.array() / (v_hat.array().sqrt() + epsilon_);
    }
}

void Adam::zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
}

Tensor l1_loss(const Tensor& prediction, const Tensor& target) {
    return mean_all(abs(sub(prediction, target)));
}

std::pair<double, double> evaluate(const Forecaster& model,
                                   const std::vector<WindowSample>& windows) {
    if (windows.empty()) throw ContractError("evaluate: empty window set");
    double sq = 0.0, ab = 0.0;
    std::size_t count = 0;
    for (const WindowSample& w : windows) {
        const Tensor pred = model.forward(w.x, w.t_last).prediction;
        const Matrix err = pred.value() - w.y.value();
        sq += err.squaredNorm();
        ab += err.cwiseAbs().sum();
        count += static_cast<std::size_t>(err.size());
    }
    const double n = static_cast<double>(count);
    return {sq / n, ab / n};
}

namespace {

std::vector<Matrix> snapshot(const Forecaster& model) {
    std::vector<Matrix> values;
    values.reserve(model.parameters().size());
    for (const auto& [name, t] : model.parameters()) values.push_back(t.value());
    return values;
}

void restore(Forecaster& model, const std::vector<Matrix>& values) {
    std::size_t i = 0;
    for (const auto& [name, t] : model.parameters())
        const_cast<Tensor&>(t).value() = values[i++];
}

}  // namespace

TrainReport train(Forecaster& model, const std::vector<WindowSample>& train_windows,
                  const std::vector<WindowSample>& valid_windows,
                  const std::vector<WindowSample>& test_windows,
                  const TrainConfig& cfg, const std::string& checkpoint_stem,
                  std::ostream* log) {
    cfg.validate();
    if (train_windows.empty()) throw ContractError("train: no training windows");
    if (valid_windows.empty()) throw ContractError("train: no validation windows");

    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(model.config().seed);
    Adam optimizer(model.parameters(), cfg);

    TrainReport report;
    report.train_windows = train_windows.size();
    report.valid_windows = valid_windows.size();
    report.test_windows = test_windows.size();
    report.best_valid_mse = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Matrix> best = snapshot(model);

    auto write_best = [&] {
        if (!checkpoint_stem.empty()) save_checkpoint(model, checkpoint_stem);
    };

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;

        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            model.zero_grad();
            double batch_loss_value = 0.0;
            {
                GradientTape tape;
                DropoutState dropout_state{model.config().dropout, &rng};
                Tensor batch_loss = Tensor::scalar(0.0);
                for (std::size_t k = start; k < stop; ++k) {
                    const WindowSample& w = train_windows[order[k]];
                    Tensor pred = model.forward(w.x, w.t_last, dropout_state).prediction;
                    batch_loss = add(batch_loss, l1_loss(pred, w.y));
                }
                batch_loss = scale(batch_loss, 1.0 / static_cast<double>(stop - start));
                batch_loss_value = batch_loss.item();
                if (!std::isfinite(batch_loss_value))
                    throw DivergenceError(
                        "training loss became non-finite at epoch " + std::to_string(epoch),
                        checkpoint_stem.empty() ? "" : checkpoint_stem + ".bin");
                tape.backward(batch_loss);
            }
            optimizer.clip_gradients(cfg.clip_norm);
            try {
                optimizer.step();
            } catch (const DivergenceError& e) {
                throw DivergenceError(std::string(e.what()) + " at epoch " +
                                          std::to_string(epoch),
                                      checkpoint_stem.empty() ? "" : checkpoint_stem + ".bin");
            }
            epoch_loss += batch_loss_value;
            ++batches;
        }

        const auto [valid_mse, valid_mae] = evaluate(model, valid_windows);
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_l1 = epoch_loss / static_cast<double>(batches);
        stats.valid_mse = valid_mse;
        stats.valid_mae = valid_mae;
        report.epochs.push_back(stats);
        if (log)
            *log << "epoch " << epoch << ", train_l1 " << stats.train_l1 << ", valid_mse "
                 << valid_mse << ", valid_mae " << valid_mae << "\n";

        if (valid_mse < report.best_valid_mse) {
            report.best_valid_mse = valid_mse;
            report.best_epoch = epoch;
            best = snapshot(model);
            write_best();
        } else if (epoch - report.best_epoch >= cfg.patience) {
            break;  // early stop: no improvement within the patience window
        }
    }

    restore(model, best);
    if (!test_windows.empty()) {
        const auto [mse, mae] = evaluate(model, test_windows);
        report.test_mse = mse;
        report.test_mae = mae;
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

std::string model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["lookback"] = cfg.lookback;
    j["horizon"] = cfg.horizon;
    j["channels"] = cfg.channels;
    j["period"] = cfg.period;
    j["dim"] = cfg.dim;
    j["layers"] = cfg.layers;
    j["heads"] = cfg.heads;
    j["ffn_dim"] = cfg.ffn_dim;
    j["norm_style"] = cfg.norm_style == NormStyle::post ? "post" : "pre";
    j["revin"] = cfg.revin;
    j["ablate_channel"] = cfg.ablate_channel;
    j["ablate_phase"] = cfg.ablate_phase;
    j["ablate_joint"] = cfg.ablate_joint;
    j["backbone"] = cfg.backbone == Backbone::transformer ? "transformer" : "mlp_only";
    j["head"] = cfg.head == HeadKind::mlp ? "mlp" : "linear";
    j["mean_input"] = cfg.mean_input;
    j["dropout"] = cfg.dropout;
    j["seed"] = cfg.seed;
    return j.dump(2);
}

std::string TrainReport::to_json() const {
    json j;
    j["best_epoch"] = best_epoch;
    j["best_valid_mse"] = best_valid_mse;
    j["test_mse"] = test_mse;
    j["test_mae"] = test_mae;
    j["wall_seconds"] = wall_seconds;
    j["train_windows"] = train_windows;
    j["valid_windows"] = valid_windows;
    j["test_windows"] = test_windows;
    j["epochs"] = json::array();
    for (const EpochStats& e : epochs) {
        j["epochs"].push_back({{"epoch", e.epoch},
                               {"train_l1", e.train_l1},
                               {"valid_mse", e.valid_mse},
                               {"valid_mae", e.valid_mae}});
    }
    return j.dump(2);
}

void save_checkpoint(const Forecaster& model, const std::string& stem) {
    json manifest;
    manifest["format"] = "tsf-checkpoint-v1";
    manifest["model"] = json::parse(model_config_to_json(model.config()));
    manifest["params"] = json::array();

    std::ofstream bin(stem + ".bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw IoError("cannot write checkpoint: " + stem + ".bin");
    for (const auto& [name, t] : model.parameters()) {
        manifest["params"].push_back(
            {{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
        bin.write(reinterpret_cast<const char*>(t.value().data()),
                  static_cast<std::streamsize>(sizeof(double) *
                                               static_cast<std::size_t>(t.size())));
    }
    bin.close();
    if (!bin) throw IoError("failed writing checkpoint: " + stem + ".bin");

    std::ofstream meta(stem + ".json", std::ios::trunc);
    if (!meta) throw IoError("cannot write checkpoint manifest: " + stem + ".json");
    meta << manifest.dump(2) << "\n";
}

void load_checkpoint(Forecaster& model, const std::string& stem) {
    std::ifstream meta(stem + ".json");
    if (!meta) throw IoError("cannot open checkpoint manifest: " + stem + ".json");
    json manifest;
    try {
        meta >> manifest;
    } catch (const json::exception& e) {
        throw ParseError("checkpoint manifest " + stem + ".json: " + e.what());
    }
    if (manifest.value("format", "") != "tsf-checkpoint-v1")
        throw ConfigError("checkpoint manifest " + stem + ".json: unknown format");

    const auto& params = model.parameters();
    const json& entries = manifest.at("params");
    if (entries.size() != params.size())
        throw ConfigError("checkpoint manifest mismatch: " + std::to_string(entries.size()) +
                          " params in manifest, model has " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& [name, t] = params[i];
        const json& e = entries[i];
        if (e.at("name") != name || e.at("rows") != t.rows() || e.at("cols") != t.cols())
            throw ConfigError("checkpoint manifest mismatch at '" + name + "': manifest has " +
                              e.at("name").get<std::string>() + " " +
                              std::to_string(e.at("rows").get<long>()) + "x" +
                              std::to_string(e.at("cols").get<long>()));
    }

    std::ifstream bin(stem + ".bin", std::ios::binary);
    if (!bin) throw IoError("cannot open checkpoint: " + stem + ".bin");
    for (const auto& [name, t] : params) {
        Tensor& mutable_t = const_cast<Tensor&>(t);
        bin.read(reinterpret_cast<char*>(mutable_t.value().data()),
                 static_cast<std::streamsize>(sizeof(double) *
                                              static_cast<std::size_t>(t.size())));
        if (!bin)
            throw ParseError("checkpoint " + stem + ".bin truncated while reading '" +
                             name + "'");
    }
    char extra;
    if (bin.read(&extra, 1))
        throw ParseError("checkpoint " + stem + ".bin has trailing bytes");
}

}  // namespace tsf
