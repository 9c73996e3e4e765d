#pragma once

#include "credal/graph.hpp"
#include "credal/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace credal::config {

/// Knobs for every scorer; each method only accepts the keys it reads.
struct MethodParams {
    double temperature = 1.0; // msp, energy, gnnsafe; odin default is 1000
    double epsilon = 0.0;     // odin
    double ridge = 1e-6;      // mahalanobis
    int k = 5;                // knn, knnlj
    double alpha = 0.5;       // gnnsafe
    int rounds = 2;           // gnnsafe
    int size = 5;             // ensembles
    bool members_only = false; // credal_ensemble
};

struct MethodSpec {
    std::string name;
    MethodParams params;
};

/// Names accepted in `methods`.
const std::vector<std::string>& known_methods();

/// Default parameters for `name`; throws ConfigError for an unknown method.
MethodParams default_params(std::string_view name);

struct RunConfig {
    std::optional<std::filesystem::path> dataset_path;
    std::optional<graph::CsbmParams> csbm;
    std::vector<int> ood_classes;
    bool has_partition = false;
    double train_frac = 0.6;
    double val_frac = 0.2;
    std::vector<std::uint64_t> seeds{0};
    training::TrainConfig train;
    std::vector<MethodSpec> methods;
    std::filesystem::path output_dir = "credal_out";
    bool timing = false;

    /// Loads the dataset (from disk or generated), filling the partition and
    /// split fractions from an optional split.json when the config omits them.
    graph::GraphDataset load_data();
    graph::ClassPartition partition(int num_classes) const;
};

/// Parses and schema-validates a config document. Unknown keys, wrong types and
/// out-of-range values raise ConfigError.
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& file);

} // namespace credal::config
