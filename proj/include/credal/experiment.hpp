#pragma once

#include "credal/baselines.hpp"
#include "credal/config.hpp"
#include "credal/graph.hpp"
#include "credal/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace credal::eval {

enum class UncertaintyKind { AU, EU, Single };

std::string to_string(UncertaintyKind kind);
UncertaintyKind parse_uncertainty_kind(std::string_view text);

/// Kinds a method reports: AU and EU for credal models and ensembles, one
/// score otherwise.
std::vector<UncertaintyKind> kinds_for(std::string_view method);

struct ExperimentResult {
    std::string dataset;
    std::string method;
    UncertaintyKind kind = UncertaintyKind::Single;
    std::uint64_t seed = 0;
    /// NaN when the cell failed.
    double auroc = 0.0;
    std::optional<double> f1_lower;
    std::optional<double> f1_upper;
    double seconds = 0.0;
    /// Non-empty when the (method, seed) cell failed.
    std::string error;
    std::vector<RocPoint> roc;
    /// Every node's score; empty for failed cells and parsed results.
    baselines::ScoredNodes nodes;

    bool ok() const { return error.empty(); }
};

/// For each seed: leave-out-class split, lazily trained models, test-node
/// AUROC (OOD positive) and ID-test macro F1 per (method, kind). Seeds run on
/// up to `jobs` threads; the result order is (method, kind, seed) regardless.
std::vector<ExperimentResult> run_ood_experiment(const graph::GraphDataset& data,
                                                 const config::RunConfig& cfg, int jobs = 1);

/// results.csv, results.json, roc_<method>_<kind>.csv and
/// scores/<method>_<kind>_seed<seed>.csv under `out_dir`.
void emit_results(const std::vector<ExperimentResult>& results, const std::filesystem::path& out_dir);

/// Reads the runs back out of a results.json document (ROC points excluded).
std::vector<ExperimentResult> parse_results_json(std::string_view text);

/// One "method kind auroc mean ± std" line per (method, kind).
std::string format_summary(const std::vector<ExperimentResult>& results);

} // namespace credal::eval
