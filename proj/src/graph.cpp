#include "credal/graph.hpp"

#include "detail/text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace credal::graph {

namespace fs = std::filesystem;
using json = nlohmann::json;

CsrAdjacency CsrAdjacency::from_edges(int num_nodes, std::span<const std::pair<int, int>> edges)
{
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(num_nodes));
    for (auto [u, v] : edges) {
        if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
            throw ConfigError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                              ") out of range for " + std::to_string(num_nodes) + " nodes");
        if (u == v)
            continue;
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    CsrAdjacency csr;
    csr.row_ptr.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
    for (int u = 0; u < num_nodes; ++u) {
        auto& row = adj[u];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        csr.row_ptr[u + 1] = csr.row_ptr[u] + static_cast<int>(row.size());
        csr.col_idx.insert(csr.col_idx.end(), row.begin(), row.end());
    }
    return csr;
}

void CsrAdjacency::validate() const
{
    if (row_ptr.empty() || row_ptr.front() != 0 ||
        row_ptr.back() != static_cast<int>(col_idx.size()))
        throw ConfigError("CSR row pointer inconsistent with column indices");
    const int n = num_nodes();
    for (int u = 0; u < n; ++u) {
        if (row_ptr[u + 1] < row_ptr[u])
            throw ConfigError("CSR row pointer not monotone");
        auto nb = neighbors(u);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const int v = nb[k];
            if (v < 0 || v >= n || v == u)
                throw ConfigError("CSR column index invalid at node " + std::to_string(u));
            if (k > 0 && nb[k - 1] >= v)
                throw ConfigError("CSR neighbors not strictly increasing at node " +
                                  std::to_string(u));
            auto back = neighbors(v);
            if (!std::binary_search(back.begin(), back.end(), u))
                throw ConfigError("CSR adjacency not symmetric");
        }
    }
}

void GraphDataset::validate() const
{
    const int n = num_nodes();
    if (num_classes < 1)
        throw ConfigError("num_classes must be positive");
    if (features.rows() != n)
        throw ConfigError("feature row count " + std::to_string(features.rows()) +
                          " != num_nodes " + std::to_string(n));
    if (edges.num_nodes() != n)
        throw ConfigError("adjacency node count mismatch");
    for (int y : labels)
        if (y < 0 || y >= num_classes)
            throw ConfigError("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(num_classes) + ")");
    if (!features.allFinite())
        throw ConfigError("non-finite feature value");
    edges.validate();
}

ClassPartition ClassPartition::leave_out(int num_classes, std::vector<int> ood)
{
    ClassPartition p;
    std::sort(ood.begin(), ood.end());
    ood.erase(std::unique(ood.begin(), ood.end()), ood.end());
    p.ood_classes = std::move(ood);
    for (int c = 0; c < num_classes; ++c)
        if (!std::binary_search(p.ood_classes.begin(), p.ood_classes.end(), c))
            p.id_classes.push_back(c);
    p.validate(num_classes);
    return p;
}

bool ClassPartition::is_ood(int label) const
{
    return std::find(ood_classes.begin(), ood_classes.end(), label) != ood_classes.end();
}

bool ClassPartition::is_id(int label) const
{
    return std::find(id_classes.begin(), id_classes.end(), label) != id_classes.end();
}

void ClassPartition::validate(int num_classes) const
{
    if (id_classes.size() < 2)
        throw ConfigError("partition needs at least two ID classes");
    auto in_range = [&](int c) { return c >= 0 && c < num_classes; };
    if (!std::all_of(id_classes.begin(), id_classes.end(), in_range) ||
        !std::all_of(ood_classes.begin(), ood_classes.end(), in_range))
        throw ConfigError("partition class index out of range");
    for (int c : id_classes)
        if (is_ood(c))
            throw ConfigError("class " + std::to_string(c) + " is both ID and OOD");
    if (!std::is_sorted(id_classes.begin(), id_classes.end()) ||
        std::adjacent_find(id_classes.begin(), id_classes.end()) != id_classes.end())
        throw ConfigError("ID classes must be strictly increasing");
}

IndexList SplitMasks::indices(const std::vector<bool>& mask)
{
    IndexList out;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i])
            out.push_back(static_cast<int>(i));
    return out;
}

void SplitMasks::check(const GraphDataset& data, const ClassPartition& partition) const
{
    const auto n = static_cast<std::size_t>(data.num_nodes());
    if (train.size() != n || val.size() != n || test.size() != n)
        throw std::logic_error("split mask length mismatch");
    for (std::size_t v = 0; v < n; ++v) {
        if (int(train[v]) + int(val[v]) + int(test[v]) > 1)
            throw std::logic_error("split masks overlap at node " + std::to_string(v));
        if (train[v] && !partition.is_id(data.labels[v]))
            throw std::logic_error("OOD node " + std::to_string(v) + " in training mask");
    }
}

void CsbmParams::validate() const
{
    if (nodes_per_class < 1 || num_classes < 1 || feature_dim < 1)
        throw ConfigError("cSBM counts must be >= 1");
    if (!(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0))
        throw ConfigError("cSBM probabilities must lie in [0, 1]");
    if (!(noise_sigma > 0.0))
        throw ConfigError("cSBM noise_sigma must be > 0");
    if (feature_dim < num_classes)
        throw ConfigError("cSBM feature_dim must be >= num_classes (one-hot class means)");
}

// ---------------------------------------------------------------------------
// Directory format

namespace {

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("missing file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

} // namespace

GraphDataset load_dataset(const fs::path& directory)
{
    json meta;
    try {
        meta = json::parse(read_file(directory / "meta.json"));
    } catch (const json::exception& e) {
        throw ConfigError("meta.json: " + std::string(e.what()));
    }
    GraphDataset data;
    int n = 0;
    int d = 0;
    try {
        n = meta.at("num_nodes").get<int>();
        d = meta.at("feature_dim").get<int>();
        data.num_classes = meta.at("num_classes").get<int>();
        data.name = meta.value("name", directory.filename().string());
    } catch (const json::exception& e) {
        throw ConfigError("meta.json: " + std::string(e.what()));
    }
    if (n < 0 || d < 0)
        throw ConfigError("meta.json: negative sizes");

    std::vector<std::pair<int, int>> edges;
    {
        const auto text = read_file(directory / "edges.tsv");
        int lineno = 0;
        for (auto line : split_lines(text)) {
            ++lineno;
            if (line.empty())
                continue;
            auto tab = line.find('\t');
            if (tab == std::string_view::npos)
                throw ConfigError("edges.tsv:" + std::to_string(lineno) + ": expected u<TAB>v");
            auto u = detail::parse_int(line.substr(0, tab), "edges.tsv");
            auto v = detail::parse_int(line.substr(tab + 1), "edges.tsv");
            if (u < 0 || v < 0 || u >= n || v >= n)
                throw ConfigError("edges.tsv:" + std::to_string(lineno) + ": node index out of range");
            edges.emplace_back(u, v);
        }
    }

    {
        const auto text = read_file(directory / "features.csv");
        auto lines = split_lines(text);
        while (!lines.empty() && lines.back().empty())
            lines.pop_back();
        if (static_cast<int>(lines.size()) != n)
            throw ConfigError("features.csv: " + std::to_string(lines.size()) +
                              " rows, expected num_nodes = " + std::to_string(n));
        data.features.resize(n, d);
        for (int i = 0; i < n; ++i) {
            auto line = lines[i];
            int col = 0;
            std::size_t start = 0;
            while (true) {
                auto comma = line.find(',', start);
                auto field = line.substr(start, comma == std::string_view::npos ? line.size() - start
                                                                               : comma - start);
                if (col >= d)
                    throw ConfigError("features.csv: row " + std::to_string(i) + " has too many columns");
                data.features(i, col++) = detail::parse_double(field, "features.csv");
                if (comma == std::string_view::npos)
                    break;
                start = comma + 1;
            }
            if (col != d)
                throw ConfigError("features.csv: row " + std::to_string(i) + " has " +
                                  std::to_string(col) + " columns, expected " + std::to_string(d));
        }
    }

    {
        const auto text = read_file(directory / "labels.txt");
        auto lines = split_lines(text);
        while (!lines.empty() && lines.back().empty())
            lines.pop_back();
        if (static_cast<int>(lines.size()) != n)
            throw ConfigError("labels.txt: " + std::to_string(lines.size()) +
                              " lines, expected " + std::to_string(n));
        data.labels.reserve(n);
        for (auto line : lines)
            data.labels.push_back(detail::parse_int(line, "labels.txt"));
    }

    data.edges = CsrAdjacency::from_edges(n, edges);
    data.validate();
    return data;
}

void save_dataset(const GraphDataset& data, const fs::path& directory)
{
    data.validate();
    std::error_code ec;
    fs::create_directories(directory, ec);
    auto open = [&](const char* name) {
        std::ofstream out(directory / name, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write " + (directory / name).string());
        return out;
    };
    {
        json meta = {{"num_nodes", data.num_nodes()},
                     {"num_classes", data.num_classes},
                     {"feature_dim", data.feature_dim()},
                     {"name", data.name}};
        auto out = open("meta.json");
        out << meta.dump(2) << '\n';
    }
    {
        auto out = open("edges.tsv");
        for (int u = 0; u < data.num_nodes(); ++u)
            for (int v : data.edges.neighbors(u))
                if (u < v)
                    out << u << '\t' << v << '\n';
    }
    {
        auto out = open("features.csv");
        std::string line;
        for (int i = 0; i < data.num_nodes(); ++i) {
            line.clear();
            for (int j = 0; j < data.feature_dim(); ++j) {
                if (j)
                    line += ',';
                line += detail::format_double(data.features(i, j));
            }
            out << line << '\n';
        }
    }
    {
        auto out = open("labels.txt");
        for (int y : data.labels)
            out << y << '\n';
    }
}

std::optional<SplitFile> load_split_file(const fs::path& directory)
{
    const auto path = directory / "split.json";
    if (!fs::exists(path))
        return std::nullopt;
    try {
        auto j = json::parse(read_file(path));
        SplitFile s;
        s.ood_classes = j.at("ood_classes").get<std::vector<int>>();
        s.train_frac = j.at("train_frac").get<double>();
        s.val_frac = j.at("val_frac").get<double>();
        s.seed = j.value("seed", std::uint64_t{0});
        return s;
    } catch (const json::exception& e) {
        throw ConfigError("split.json: " + std::string(e.what()));
    }
}

// ---------------------------------------------------------------------------
// Operators

SparseOperator gcn_normalize(const GraphDataset& data)
{
    const int n = data.num_nodes();
    const auto& adj = data.edges;
    Vector inv_sqrt_deg(n);
    for (int u = 0; u < n; ++u)
        inv_sqrt_deg[u] = 1.0 / std::sqrt(static_cast<double>(adj.degree(u) + 1));

    std::vector<Eigen::Triplet<double, int>> entries;
    entries.reserve(adj.col_idx.size() + static_cast<std::size_t>(n));
    for (int u = 0; u < n; ++u) {
        entries.emplace_back(u, u, inv_sqrt_deg[u] * inv_sqrt_deg[u]);
        for (int v : adj.neighbors(u))
            entries.emplace_back(u, v, inv_sqrt_deg[u] * inv_sqrt_deg[v]);
    }
    SparseOperator op(n, n);
    op.setFromTriplets(entries.begin(), entries.end());
    op.makeCompressed();
    return op;
}

SparseOperator row_normalize(const GraphDataset& data)
{
    const int n = data.num_nodes();
    const auto& adj = data.edges;
    std::vector<Eigen::Triplet<double, int>> entries;
    entries.reserve(adj.col_idx.size());
    for (int u = 0; u < n; ++u) {
        const double w = 1.0 / static_cast<double>(std::max(adj.degree(u), 1));
        for (int v : adj.neighbors(u))
            entries.emplace_back(u, v, w);
    }
    SparseOperator op(n, n);
    op.setFromTriplets(entries.begin(), entries.end());
    op.makeCompressed();
    return op;
}

// ---------------------------------------------------------------------------
// Splits

SplitMasks leave_out_class_split(const GraphDataset& data, const ClassPartition& partition,
                                 double train_frac, double val_frac, std::uint64_t seed)
{
    if (!(train_frac > 0.0 && train_frac < 1.0 && val_frac > 0.0 && val_frac < 1.0 &&
          train_frac + val_frac < 1.0))
        throw ConfigError("split fractions must lie in (0, 1) with train + val < 1");
    partition.validate(data.num_classes);

    const auto n = static_cast<std::size_t>(data.num_nodes());
    SplitMasks masks{std::vector<bool>(n, false), std::vector<bool>(n, false),
                     std::vector<bool>(n, false)};
    std::mt19937_64 rng(seed);

    for (int c : partition.id_classes) {
        IndexList nodes;
        for (std::size_t v = 0; v < n; ++v)
            if (data.labels[v] == c)
                nodes.push_back(static_cast<int>(v));
        const int count = static_cast<int>(nodes.size());
        if (count == 0)
            throw ConfigError("ID class " + std::to_string(c) + " has no nodes");
        std::shuffle(nodes.begin(), nodes.end(), rng);

        // At least one node per subset when the class is large enough.
        int n_train = static_cast<int>(std::floor(train_frac * count));
        int n_val = static_cast<int>(std::floor(val_frac * count));
        n_train = std::min(std::max(n_train, 1), std::max(count - 2, 1));
        const int rest = count - n_train;
        n_val = rest >= 2 ? std::clamp(n_val, 1, rest - 1) : std::min(n_val, rest);
        for (int k = 0; k < count; ++k) {
            const auto v = static_cast<std::size_t>(nodes[k]);
            if (k < n_train)
                masks.train[v] = true;
            else if (k < n_train + n_val)
                masks.val[v] = true;
            else
                masks.test[v] = true;
        }
    }

    IndexList ood_nodes;
    for (std::size_t v = 0; v < n; ++v)
        if (partition.is_ood(data.labels[v]))
            ood_nodes.push_back(static_cast<int>(v));
    std::shuffle(ood_nodes.begin(), ood_nodes.end(), rng);
    const double test_frac = 1.0 - train_frac - val_frac;
    const auto n_ood_val = static_cast<std::size_t>(
        std::llround(static_cast<double>(ood_nodes.size()) * val_frac / (val_frac + test_frac)));
    for (std::size_t k = 0; k < ood_nodes.size(); ++k) {
        const auto v = static_cast<std::size_t>(ood_nodes[k]);
        (k < n_ood_val ? masks.val : masks.test)[v] = true;
    }
    masks.check(data, partition);
    return masks;
}

std::vector<int> remap_id_labels(std::span<const int> labels, const ClassPartition& partition)
{
    std::vector<int> sorted = partition.id_classes;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> out;
    out.reserve(labels.size());
    for (int y : labels) {
        auto it = std::lower_bound(sorted.begin(), sorted.end(), y);
        out.push_back(it != sorted.end() && *it == y ? static_cast<int>(it - sorted.begin()) : -1);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic graphs

GraphDataset generate_csbm(const CsbmParams& params)
{
    params.validate();
    const int n = params.nodes_per_class * params.num_classes;
    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> noise(0.0, params.noise_sigma);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    GraphDataset data;
    data.name = "csbm";
    data.num_classes = params.num_classes;
    data.labels.resize(n);
    data.features.resize(n, params.feature_dim);
    for (int v = 0; v < n; ++v) {
        const int c = v / params.nodes_per_class;
        data.labels[v] = c;
        for (int j = 0; j < params.feature_dim; ++j)
            data.features(v, j) = noise(rng) + (j == c ? params.mean_separation : 0.0);
    }

    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) {
            const double p = data.labels[u] == data.labels[v] ? params.p_in : params.p_out;
            if (unif(rng) < p)
                edges.emplace_back(u, v);
        }
    data.edges = CsrAdjacency::from_edges(n, edges);
    return data;
}

double edge_homophily(const GraphDataset& data)
{
    std::size_t same = 0;
    std::size_t total = 0;
    for (int u = 0; u < data.num_nodes(); ++u)
        for (int v : data.edges.neighbors(u))
            if (u < v) {
                ++total;
                same += data.labels[u] == data.labels[v];
            }
    if (total == 0)
        throw std::domain_error("undefined homophily: graph has no edges");
    return static_cast<double>(same) / static_cast<double>(total);
}

GraphDataset permute_nodes(const GraphDataset& data, std::span<const int> perm)
{
    const int n = data.num_nodes();
    if (static_cast<int>(perm.size()) != n)
        throw std::invalid_argument("permutation length mismatch");
    GraphDataset out;
    out.name = data.name;
    out.num_classes = data.num_classes;
    out.labels.resize(n);
    out.features.resize(n, data.feature_dim());
    for (int u = 0; u < n; ++u) {
        out.labels[perm[u]] = data.labels[u];
        out.features.row(perm[u]) = data.features.row(u);
    }
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u)
        for (int v : data.edges.neighbors(u))
            if (u < v)
                edges.emplace_back(perm[u], perm[v]);
    out.edges = CsrAdjacency::from_edges(n, edges);
    return out;
}

} // namespace credal::graph
