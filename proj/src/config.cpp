#include "credal/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace credal::config {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where)
{
    if (!j.is_object())
        throw ConfigError(where + ": expected an object");
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where)
{
    require_object(j, where);
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get(const json& j, const char* key, const std::string& where)
{
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": missing or wrong type");
    }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out, const std::string& where)
{
    if (j.contains(key))
        out = get<T>(j, key, where);
}

int read_count(const json& j, const char* key, int fallback, int minimum, const std::string& where)
{
    int v = fallback;
    read_opt(j, key, v, where);
    if (v < minimum)
        throw ConfigError(where + "." + key + " must be >= " + std::to_string(minimum));
    return v;
}

double read_probability(const json& j, const char* key, double fallback, const std::string& where)
{
    double v = fallback;
    read_opt(j, key, v, where);
    if (!(v >= 0.0 && v <= 1.0))
        throw ConfigError(where + "." + key + " must lie in [0, 1]");
    return v;
}

graph::CsbmParams parse_csbm(const json& j)
{
    const std::string where = "dataset.csbm";
    check_keys(j,
               {"nodes_per_class", "num_classes", "p_in", "p_out", "feature_dim", "mean_separation",
                "noise_sigma", "seed"},
               where);
    graph::CsbmParams p;
    p.nodes_per_class = read_count(j, "nodes_per_class", p.nodes_per_class, 1, where);
    p.num_classes = read_count(j, "num_classes", p.num_classes, 1, where);
    p.p_in = read_probability(j, "p_in", p.p_in, where);
    p.p_out = read_probability(j, "p_out", p.p_out, where);
    p.feature_dim = read_count(j, "feature_dim", p.feature_dim, 1, where);
    read_opt(j, "mean_separation", p.mean_separation, where);
    read_opt(j, "noise_sigma", p.noise_sigma, where);
    read_opt(j, "seed", p.seed, where);
    p.validate();
    return p;
}

MethodSpec parse_method(const json& j)
{
    MethodSpec spec;
    json params = json::object();
    if (j.is_string()) {
        spec.name = j.get<std::string>();
    } else {
        check_keys(j, {"name", "params"}, "methods[]");
        spec.name = get<std::string>(j, "name", "methods[]");
        if (j.contains("params"))
            params = j.at("params");
    }
    spec.params = default_params(spec.name);
    const std::string where = "methods." + spec.name + ".params";
    auto& p = spec.params;
    const auto& n = spec.name;
    if (n == "msp" || n == "energy")
        check_keys(params, {"temperature"}, where);
    else if (n == "odin")
        check_keys(params, {"temperature", "epsilon"}, where);
    else if (n == "mahalanobis")
        check_keys(params, {"ridge"}, where);
    else if (n == "knn" || n == "knnlj")
        check_keys(params, {"k"}, where);
    else if (n == "gnnsafe")
        check_keys(params, {"temperature", "alpha", "rounds"}, where);
    else if (n == "classical_ensemble")
        check_keys(params, {"size"}, where);
    else if (n == "credal_ensemble")
        check_keys(params, {"size", "members_only"}, where);
    else
        check_keys(params, {}, where);

    read_opt(params, "temperature", p.temperature, where);
    read_opt(params, "epsilon", p.epsilon, where);
    read_opt(params, "ridge", p.ridge, where);
    p.k = read_count(params, "k", p.k, 1, where);
    p.alpha = read_probability(params, "alpha", p.alpha, where);
    p.rounds = read_count(params, "rounds", p.rounds, 0, where);
    p.size = read_count(params, "size", p.size, n == "classical_ensemble" ? 2 : 1, where);
    read_opt(params, "members_only", p.members_only, where);
    if (!(p.temperature > 0.0))
        throw ConfigError(where + ".temperature must be > 0");
    if (!(p.epsilon >= 0.0))
        throw ConfigError(where + ".epsilon must be >= 0");
    if (!(p.ridge > 0.0))
        throw ConfigError(where + ".ridge must be > 0");
    return spec;
}

void parse_model(const json& j, training::TrainConfig& t)
{
    const std::string where = "model";
    check_keys(j,
               {"kind", "backbone", "lr", "weight_decay", "max_epochs", "patience", "delta", "seed",
                "early_stop_metric"},
               where);
    if (j.contains("kind"))
        t.model_kind = model::parse_model_kind(get<std::string>(j, "kind", where));
    if (j.contains("backbone")) {
        const auto& b = j.at("backbone");
        const std::string bw = "model.backbone";
        check_keys(b, {"kind", "num_layers", "hidden_dim", "dropout"}, bw);
        if (b.contains("kind"))
            t.backbone.kind = gnn::parse_backbone_kind(get<std::string>(b, "kind", bw));
        t.backbone.num_layers = read_count(b, "num_layers", t.backbone.num_layers, 1, bw);
        t.backbone.hidden_dim = read_count(b, "hidden_dim", t.backbone.hidden_dim, 1, bw);
        read_opt(b, "dropout", t.backbone.dropout, bw);
        if (!(t.backbone.dropout >= 0.0 && t.backbone.dropout < 1.0))
            throw ConfigError("model.backbone.dropout must lie in [0, 1)");
    }
    read_opt(j, "lr", t.lr, where);
    read_opt(j, "weight_decay", t.weight_decay, where);
    t.max_epochs = read_count(j, "max_epochs", t.max_epochs, 1, where);
    t.patience = read_count(j, "patience", t.patience, 1, where);
    read_opt(j, "delta", t.delta, where);
    read_opt(j, "seed", t.seed, where);
    if (j.contains("early_stop_metric"))
        t.early_stop_metric =
            training::parse_early_stop_metric(get<std::string>(j, "early_stop_metric", where));
    t.validate();
}

} // namespace

const std::vector<std::string>& known_methods()
{
    static const std::vector<std::string> names{
        "msp",     "energy",  "odin",          "mahalanobis",        "knn",        "knnlj",
        "gnnsafe", "credal_final", "credal_lj", "classical_ensemble", "credal_ensemble"};
    return names;
}

MethodParams default_params(std::string_view name)
{
    const auto& names = known_methods();
    if (std::find(names.begin(), names.end(), name) == names.end())
        throw ConfigError("unknown method '" + std::string(name) + "'");
    MethodParams p;
    if (name == "odin")
        p.temperature = 1000.0;
    return p;
}

graph::ClassPartition RunConfig::partition(int num_classes) const
{
    if (!has_partition)
        throw ConfigError("partition.ood_classes is required (in the config or the dataset's split.json)");
    auto p = graph::ClassPartition::leave_out(num_classes, ood_classes);
    p.validate(num_classes);
    return p;
}

graph::GraphDataset RunConfig::load_data()
{
    graph::GraphDataset data;
    if (dataset_path) {
        if (!fs::is_directory(*dataset_path))
            throw ConfigError("dataset directory not found: " + dataset_path->string());
        data = graph::load_dataset(*dataset_path);
        if (auto split = graph::load_split_file(*dataset_path)) {
            if (!has_partition) {
                ood_classes = split->ood_classes;
                has_partition = true;
            }
        }
    } else {
        data = graph::generate_csbm(*csbm);
    }
    return data;
}

RunConfig parse_config(std::string_view json_text, const fs::path& base_dir)
{
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(root, {"dataset", "partition", "split", "model", "methods", "output"}, "config");
    if (!root.contains("dataset"))
        throw ConfigError("config: missing 'dataset' section");

    RunConfig cfg;
    const auto& ds = root.at("dataset");
    check_keys(ds, {"path", "csbm"}, "dataset");
    if (ds.contains("path") == ds.contains("csbm"))
        throw ConfigError("dataset: exactly one of 'path' or 'csbm' is required");
    if (ds.contains("path")) {
        fs::path p = get<std::string>(ds, "path", "dataset");
        cfg.dataset_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    } else {
        cfg.csbm = parse_csbm(ds.at("csbm"));
    }

    if (root.contains("partition")) {
        const auto& p = root.at("partition");
        check_keys(p, {"ood_classes"}, "partition");
        cfg.ood_classes = get<std::vector<int>>(p, "ood_classes", "partition");
        cfg.has_partition = true;
    }

    std::optional<graph::SplitFile> split_file;
    if (cfg.dataset_path && fs::is_directory(*cfg.dataset_path))
        split_file = graph::load_split_file(*cfg.dataset_path);
    if (split_file) {
        cfg.train_frac = split_file->train_frac;
        cfg.val_frac = split_file->val_frac;
        cfg.seeds = {split_file->seed};
    }
    if (root.contains("split")) {
        const auto& s = root.at("split");
        check_keys(s, {"train_frac", "val_frac", "seed", "seeds"}, "split");
        read_opt(s, "train_frac", cfg.train_frac, "split");
        read_opt(s, "val_frac", cfg.val_frac, "split");
        if (s.contains("seed") && s.contains("seeds"))
            throw ConfigError("split: give either 'seed' or 'seeds', not both");
        if (s.contains("seed"))
            cfg.seeds = {get<std::uint64_t>(s, "seed", "split")};
        if (s.contains("seeds")) {
            cfg.seeds = get<std::vector<std::uint64_t>>(s, "seeds", "split");
            if (cfg.seeds.empty())
                throw ConfigError("split.seeds must not be empty");
        }
    }
    if (!(cfg.train_frac > 0.0 && cfg.train_frac < 1.0 && cfg.val_frac > 0.0 && cfg.val_frac < 1.0 &&
          cfg.train_frac + cfg.val_frac < 1.0))
        throw ConfigError("split: need fractions in (0, 1) with train_frac + val_frac < 1");

    if (root.contains("model"))
        parse_model(root.at("model"), cfg.train);
    else
        cfg.train.validate();

    if (root.contains("methods")) {
        const auto& m = root.at("methods");
        if (!m.is_array())
            throw ConfigError("methods: expected an array");
        for (const auto& entry : m)
            cfg.methods.push_back(parse_method(entry));
    }

    if (root.contains("output")) {
        const auto& o = root.at("output");
        check_keys(o, {"dir", "timing"}, "output");
        if (o.contains("dir"))
            cfg.output_dir = get<std::string>(o, "dir", "output");
        read_opt(o, "timing", cfg.timing, "output");
    }
    cfg.train.record_timing = cfg.timing;
    return cfg;
}

RunConfig load_config(const fs::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read config file " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), file.parent_path());
}

} // namespace credal::config
