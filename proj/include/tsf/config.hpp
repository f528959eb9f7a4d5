#pragma once

#include <string>

#include "tsf/data.hpp"
#include "tsf/model.hpp"
#include "tsf/trainer.hpp"

namespace tsf {

/// Split/period/day-length conventions keyed off the dataset name; used only
/// to fill keys the config file leaves out.
struct DatasetDefaults {
    SplitRatios split{0.7, 0.1, 0.2};
    int period = 24;
    int day_len = 24;
};

DatasetDefaults infer_dataset_defaults(const std::string& name);

/// Everything one run needs: model + trainer hyperparameters, dataset
/// binding, split ratios, output directory. Parsed from a flat key-value
/// file ('key = value', '#' comments); every parse or validation error
/// names the offending key.
struct RunConfig {
    ModelConfig model;      // channels is inferred from the dataset at load time
    TrainConfig trainer;
    std::string dataset_path;
    std::string dataset_name;  // defaults to the file stem
    bool no_timestamp_column = false;
    SplitRatios split;
    int day_len = 24;
    std::string out_dir = "out";

    static RunConfig from_file(const std::string& path);
    static RunConfig from_text(const std::string& text, const std::string& source = "<inline>");

    // Canonical resolved form: reparsing it reproduces the identical config.
    std::string to_text() const;

    void validate() const;
};

// Loads, splits and z-scores (train-fit) the dataset named by the config;
// sets cfg.model.channels from the data. The normalizer used is returned via
// out param when non-null.
TimeSeriesDataset load_prepared_dataset(RunConfig& cfg, Normalizer* fitted = nullptr);

}  // namespace tsf
