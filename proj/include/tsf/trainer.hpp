#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "tsf/data.hpp"
#include "tsf/model.hpp"

namespace tsf {

struct TrainConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 32;
    int max_epochs = 30;
    int patience = 5;
    double clip_norm = 5.0;  // global L2 clip; <= 0 disables

    void validate() const;
};

/// Bias-corrected Adam over a fixed parameter registry. Moment buffers mirror
/// the parameter shapes; step() consumes the gradients currently stored on
/// the parameters.
class Adam {
public:
    Adam(std::vector<std::pair<std::string, Tensor>> params, const TrainConfig& cfg);

    // Applies one update. Throws DivergenceError on non-finite gradients.
    void step();
    // Scales all gradients so their global L2 norm is at most max_norm.
    // Returns the pre-clip norm.
    double clip_gradients(double max_norm);
    void zero_grad();
    long step_count() const { return step_; }

private:
    std::vector<std::pair<std::string, Tensor>> params_;
    std::vector<Matrix> m_, v_;
    double lr_, beta1_, beta2_, epsilon_;
    long step_ = 0;
};

// Mean absolute deviation over all elements. Subgradient at 0 is 0.
Tensor l1_loss(const Tensor& prediction, const Tensor& target);

// (MSE, MAE) over every window and element, dropout off. Metrics live in the
// same (z-scored) space as the windows themselves.
std::pair<double, double> evaluate(const Forecaster& model,
                                   const std::vector<WindowSample>& windows);

struct EpochStats {
    int epoch = 0;
    double train_l1 = 0.0;
    double valid_mse = 0.0;
    double valid_mae = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_valid_mse = 0.0;
    double test_mse = 0.0;
    double test_mae = 0.0;
    double wall_seconds = 0.0;
    std::size_t train_windows = 0, valid_windows = 0, test_windows = 0;

    std::string to_json() const;  // pretty-printed
};

// Epochs over shuffled training windows, validation each epoch, early stop
// on patience, test metrics from the best snapshot (which is restored into
// the model). When checkpoint_stem is non-empty the best snapshot is written
// to <stem>.bin/<stem>.json as it improves. A per-epoch metrics line
// "epoch, train_l1, valid_mse, valid_mae" goes to log when provided.
TrainReport train(Forecaster& model, const std::vector<WindowSample>& train_windows,
                  const std::vector<WindowSample>& valid_windows,
                  const std::vector<WindowSample>& test_windows,
                  const TrainConfig& cfg, const std::string& checkpoint_stem = "",
                  std::ostream* log = nullptr);

// Checkpoint = raw row-major 64-bit floats in registry order plus a JSON
// shape manifest. load verifies the manifest against the model.
void save_checkpoint(const Forecaster& model, const std::string& stem);
void load_checkpoint(Forecaster& model, const std::string& stem);

std::string model_config_to_json(const ModelConfig& cfg);

}  // namespace tsf
