#include "tsf/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace tsf {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct KvReader {
    std::map<std::string, std::string> entries;
    std::string source;

    bool has(const std::string& key) const { return entries.count(key) != 0; }

    std::string take_string(const std::string& key, const std::string& fallback) {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        std::string v = it->second;
        entries.erase(it);
        return v;
    }

    long take_int(const std::string& key, long fallback) {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        const std::string v = it->second;
        entries.erase(it);
        long out = 0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || ptr != v.data() + v.size())
            throw ConfigError("key '" + key + "': cannot parse integer from '" + v + "'");
        return out;
    }

    double take_double(const std::string& key, double fallback) {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        const std::string v = it->second;
        entries.erase(it);
        double out = 0.0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || ptr != v.data() + v.size())
            throw ConfigError("key '" + key + "': cannot parse number from '" + v + "'");
        return out;
    }

    bool take_bool(const std::string& key, bool fallback) {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        const std::string v = lower(it->second);
        entries.erase(it);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
    }
};

KvReader parse_kv(const std::string& text, const std::string& source) {
    KvReader reader;
    reader.source = source;
    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
        if (reader.entries.count(key))
            throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key '" +
                              key + "'");
        reader.entries[key] = value;
    }
    return reader;
}

}  // namespace

DatasetDefaults infer_dataset_defaults(const std::string& name) {
    const std::string n = lower(name);
    DatasetDefaults d;
    auto contains = [&](const char* tag) { return n.find(tag) != std::string::npos; };
    if (contains("etth")) {
        d = {{0.6, 0.2, 0.2}, 24, 24};
    } else if (contains("ettm")) {
        d = {{0.6, 0.2, 0.2}, 96, 96};
    } else if (contains("pems")) {
        d = {{0.6, 0.2, 0.2}, 288, 288};
    } else if (contains("ecl") || contains("electricity")) {
        d = {{0.7, 0.1, 0.2}, 168, 24};  // weekly period on an hourly grid
    } else if (contains("traffic")) {
        d = {{0.7, 0.1, 0.2}, 168, 24};
    } else if (contains("solar")) {
        d = {{0.7, 0.1, 0.2}, 144, 144};
    } else if (contains("weather")) {
        d = {{0.7, 0.1, 0.2}, 144, 144};
    }
    return d;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_text(buffer.str(), path);
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& source) {
    KvReader kv = parse_kv(text, source);
    RunConfig cfg;

    cfg.dataset_path = kv.take_string("dataset", "");
    cfg.dataset_name = kv.take_string("dataset_name", "");
    if (cfg.dataset_name.empty() && !cfg.dataset_path.empty())
        cfg.dataset_name = std::filesystem::path(cfg.dataset_path).stem().string();
    const DatasetDefaults defaults = infer_dataset_defaults(cfg.dataset_name);

    cfg.no_timestamp_column = kv.take_bool("no_timestamp_column", false);
    cfg.split.train = kv.take_double("split_train", defaults.split.train);
    cfg.split.valid = kv.take_double("split_valid", defaults.split.valid);
    cfg.split.test = kv.take_double("split_test", defaults.split.test);
    cfg.day_len = static_cast<int>(kv.take_int("day_len", defaults.day_len));
    cfg.out_dir = kv.take_string("out_dir", "out");

    ModelConfig& m = cfg.model;
    m.lookback = static_cast<int>(kv.take_int("lookback", m.lookback));
    m.horizon = static_cast<int>(kv.take_int("horizon", m.horizon));
    m.period = static_cast<int>(kv.take_int("period", defaults.period));
    m.dim = static_cast<int>(kv.take_int("dim", m.dim));
    m.layers = static_cast<int>(kv.take_int("layers", m.layers));
    m.heads = static_cast<int>(kv.take_int("heads", m.heads));
    m.ffn_dim = static_cast<int>(kv.take_int("ffn_dim", m.ffn_dim));
    m.dropout = kv.take_double("dropout", m.dropout);
    m.seed = static_cast<std::uint64_t>(kv.take_int("seed", static_cast<long>(m.seed)));
    m.revin = kv.take_bool("revin", m.revin);
    m.mean_input = kv.take_bool("mean_input", m.mean_input);

    const std::string norm = lower(kv.take_string("norm_style", "post"));
    if (norm == "post") m.norm_style = NormStyle::post;
    else if (norm == "pre") m.norm_style = NormStyle::pre;
    else throw ConfigError("key 'norm_style': expected post|pre, got '" + norm + "'");

    const std::string backbone = lower(kv.take_string("backbone", "transformer"));
    if (backbone == "transformer") m.backbone = Backbone::transformer;
    else if (backbone == "mlp_only") m.backbone = Backbone::mlp_only;
    else throw ConfigError("key 'backbone': expected transformer|mlp_only, got '" + backbone + "'");

    const std::string head = lower(kv.take_string("head", "mlp"));
    if (head == "mlp") m.head = HeadKind::mlp;
    else if (head == "linear") m.head = HeadKind::linear;
    else throw ConfigError("key 'head': expected mlp|linear, got '" + head + "'");

    const std::string ablation = lower(kv.take_string("ablation", "none"));
    m.ablate_channel = m.ablate_phase = m.ablate_joint = false;
    if (ablation != "none" && !ablation.empty()) {
        std::istringstream parts(ablation);
        std::string item;
        while (std::getline(parts, item, ',')) {
            item = trim(item);
            if (item == "channel") m.ablate_channel = true;
            else if (item == "phase") m.ablate_phase = true;
            else if (item == "joint") m.ablate_joint = true;
            else throw ConfigError("key 'ablation': unknown entry '" + item +
                                   "' (expected subset of channel,phase,joint or none)");
        }
    }

    TrainConfig& t = cfg.trainer;
    t.lr = kv.take_double("lr", t.lr);
    t.beta1 = kv.take_double("beta1", t.beta1);
    t.beta2 = kv.take_double("beta2", t.beta2);
    t.epsilon = kv.take_double("epsilon", t.epsilon);
    t.batch_size = static_cast<int>(kv.take_int("batch_size", t.batch_size));
    t.max_epochs = static_cast<int>(kv.take_int("max_epochs", t.max_epochs));
    t.patience = static_cast<int>(kv.take_int("patience", t.patience));
    t.clip_norm = kv.take_double("clip_norm", t.clip_norm);

    if (!kv.entries.empty())
        throw ConfigError(source + ": unknown key '" + kv.entries.begin()->first + "'");
    return cfg;
}

std::string RunConfig::to_text() const {
    const ModelConfig& m = model;
    const TrainConfig& t = trainer;
    std::ostringstream out;
    out << "# resolved run configuration\n";
    out << "dataset = " << dataset_path << "\n";
    out << "dataset_name = " << dataset_name << "\n";
    out << "no_timestamp_column = " << (no_timestamp_column ? "true" : "false") << "\n";
    out << "split_train = " << fmt_double(split.train) << "\n";
    out << "split_valid = " << fmt_double(split.valid) << "\n";
    out << "split_test = " << fmt_double(split.test) << "\n";
    out << "day_len = " << day_len << "\n";
    out << "out_dir = " << out_dir << "\n";
    out << "lookback = " << m.lookback << "\n";
    out << "horizon = " << m.horizon << "\n";
    out << "period = " << m.period << "\n";
    out << "dim = " << m.dim << "\n";
    out << "layers = " << m.layers << "\n";
    out << "heads = " << m.heads << "\n";
    out << "ffn_dim = " << m.ffn_dim << "\n";
    out << "norm_style = " << (m.norm_style == NormStyle::post ? "post" : "pre") << "\n";
    out << "revin = " << (m.revin ? "true" : "false") << "\n";
    std::string ablation;
    if (m.ablate_channel) ablation += "channel";
    if (m.ablate_phase) ablation += ablation.empty() ? "phase" : ",phase";
    if (m.ablate_joint) ablation += ablation.empty() ? "joint" : ",joint";
    out << "ablation = " << (ablation.empty() ? "none" : ablation) << "\n";
    out << "backbone = " << (m.backbone == Backbone::transformer ? "transformer" : "mlp_only")
        << "\n";
    out << "head = " << (m.head == HeadKind::mlp ? "mlp" : "linear") << "\n";
    out << "mean_input = " << (m.mean_input ? "true" : "false") << "\n";
    out << "dropout = " << fmt_double(m.dropout) << "\n";
    out << "seed = " << m.seed << "\n";
    out << "lr = " << fmt_double(t.lr) << "\n";
    out << "beta1 = " << fmt_double(t.beta1) << "\n";
    out << "beta2 = " << fmt_double(t.beta2) << "\n";
    out << "epsilon = " << fmt_double(t.epsilon) << "\n";
    out << "batch_size = " << t.batch_size << "\n";
    out << "max_epochs = " << t.max_epochs << "\n";
    out << "patience = " << t.patience << "\n";
    out << "clip_norm = " << fmt_double(t.clip_norm) << "\n";
    return out.str();
}

void RunConfig::validate() const {
    if (dataset_path.empty()) throw ConfigError("missing required key 'dataset'");
    if (split.train <= 0 || split.valid <= 0 || split.test <= 0)
        throw ConfigError("keys 'split_train/split_valid/split_test' must be positive");
    if (std::abs(split.train + split.valid + split.test - 1.0) > 1e-9)
        throw ConfigError("keys 'split_train/split_valid/split_test' must sum to 1");
    if (day_len < 2) throw ConfigError("key 'day_len' must be >= 2");
    model.validate();
    trainer.validate();
}

TimeSeriesDataset load_prepared_dataset(RunConfig& cfg, Normalizer* fitted) {
    CsvOptions opts;
    opts.timestamp_column = !cfg.no_timestamp_column;
    opts.name = cfg.dataset_name;
    TimeSeriesDataset ds = load_csv(cfg.dataset_path, opts);
    cfg.model.channels = static_cast<int>(ds.channels());
    chronological_split(ds, cfg.split, cfg.model.lookback, cfg.model.horizon);
    const Normalizer norm = Normalizer::fit(ds, /*train_only=*/true);
    norm.apply_in_place(ds);
    if (fitted) *fitted = norm;
    return ds;
}

}  // namespace tsf
