#pragma once

#include "credal/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace credal::graph {

/// Undirected adjacency in CSR form. Both directions of every edge are
/// stored, neighbor lists are strictly increasing and carry no self-loops.
struct CsrAdjacency {
    std::vector<int> row_ptr{0};
    std::vector<int> col_idx;

    /// Symmetrizes, drops self-loops and duplicates.
    static CsrAdjacency from_edges(int num_nodes, std::span<const std::pair<int, int>> edges);

    int num_nodes() const { return static_cast<int>(row_ptr.size()) - 1; }
    int degree(int u) const { return row_ptr[u + 1] - row_ptr[u]; }
    std::span<const int> neighbors(int u) const
    {
        return {col_idx.data() + row_ptr[u], static_cast<std::size_t>(degree(u))};
    }
    /// Number of undirected edges.
    std::size_t num_edges() const { return col_idx.size() / 2; }

    void validate() const;
};

struct GraphDataset {
    std::string name;
    int num_classes = 0;
    Matrix features;
    std::vector<int> labels;
    CsrAdjacency edges;

    int num_nodes() const { return static_cast<int>(labels.size()); }
    int feature_dim() const { return static_cast<int>(features.cols()); }

    /// Throws ConfigError when any structural invariant is violated.
    void validate() const;
};

struct ClassPartition {
    std::vector<int> id_classes;
    std::vector<int> ood_classes;

    /// ID classes are the complement of `ood` in 0..num_classes-1.
    static ClassPartition leave_out(int num_classes, std::vector<int> ood);

    bool is_ood(int label) const;
    bool is_id(int label) const;
    int num_id() const { return static_cast<int>(id_classes.size()); }
    void validate(int num_classes) const;
};

struct SplitMasks {
    std::vector<bool> train;
    std::vector<bool> val;
    std::vector<bool> test;

    static IndexList indices(const std::vector<bool>& mask);
    /// Disjointness and no OOD node in train. Throws std::logic_error.
    void check(const GraphDataset& data, const ClassPartition& partition) const;
};

/// Contents of the optional split.json next to a dataset.
struct SplitFile {
    std::vector<int> ood_classes;
    double train_frac = 0.0;
    double val_frac = 0.0;
    std::uint64_t seed = 0;
};

struct CsbmParams {
    int nodes_per_class = 100;
    int num_classes = 3;
    double p_in = 0.05;
    double p_out = 0.01;
    int feature_dim = 8;
    double mean_separation = 1.0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

GraphDataset load_dataset(const std::filesystem::path& directory);
/// Writes the canonical directory form; load_dataset(save_dataset(d)) == d.
void save_dataset(const GraphDataset& data, const std::filesystem::path& directory);
std::optional<SplitFile> load_split_file(const std::filesystem::path& directory);

/// D^-1/2 (A + I) D^-1/2.
SparseOperator gcn_normalize(const GraphDataset& data);
/// Mean aggregator: entry (u, v) = 1 / deg(u); isolated rows are empty.
SparseOperator row_normalize(const GraphDataset& data);

SplitMasks leave_out_class_split(const GraphDataset& data, const ClassPartition& partition,
                                 double train_frac, double val_frac, std::uint64_t seed);

/// ID classes to 0..|ID|-1 in ascending original order, OOD classes to -1.
std::vector<int> remap_id_labels(std::span<const int> labels, const ClassPartition& partition);

GraphDataset generate_csbm(const CsbmParams& params);

double edge_homophily(const GraphDataset& data);

/// Relabels nodes so that old node u becomes new node perm[u].
GraphDataset permute_nodes(const GraphDataset& data, std::span<const int> perm);

} // namespace credal::graph
