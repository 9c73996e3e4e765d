#include "credal/experiment.hpp"

#include "credal/baselines.hpp"
#include "credal/uncertainty.hpp"
#include "detail/text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

namespace credal::eval {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(UncertaintyKind kind)
{
    switch (kind) {
    case UncertaintyKind::AU: return "AU";
    case UncertaintyKind::EU: return "EU";
    case UncertaintyKind::Single: return "single";
    }
    return "single";
}

UncertaintyKind parse_uncertainty_kind(std::string_view text)
{
    if (text == "AU")
        return UncertaintyKind::AU;
    if (text == "EU")
        return UncertaintyKind::EU;
    if (text == "single")
        return UncertaintyKind::Single;
    throw ConfigError("unknown uncertainty kind '" + std::string(text) + "'");
}

std::vector<UncertaintyKind> kinds_for(std::string_view method)
{
    if (method == "credal_final" || method == "credal_lj" || method == "classical_ensemble" ||
        method == "credal_ensemble")
        return {UncertaintyKind::AU, UncertaintyKind::EU};
    return {UncertaintyKind::Single};
}

namespace {

// Memoized training outcome; a failure is remembered so dependent methods
// all report the same error without retraining.
template <typename T>
struct Lazy {
    std::optional<T> value;
    std::string error;
    bool attempted = false;

    const T& get(const std::function<T()>& make)
    {
        if (!attempted) {
            attempted = true;
            try {
                value.emplace(make());
            } catch (const std::exception& e) {
                error = e.what();
            }
        }
        if (!value)
            throw std::runtime_error(error);
        return *value;
    }
};

struct Scores {
    std::vector<std::pair<UncertaintyKind, Vector>> by_kind;
    std::optional<double> f1_lower;
    std::optional<double> f1_upper;
};

class SeedRun {
public:
    SeedRun(const graph::GraphDataset& data, const gnn::GraphOperators& ops,
            const graph::ClassPartition& partition, const config::RunConfig& cfg, std::uint64_t seed)
        : data_(data), ops_(ops), partition_(partition), cfg_(cfg), seed_(seed)
    {
        split_ = graph::leave_out_class_split(data, partition, cfg.train_frac, cfg.val_frac, seed);
        split_.check(data, partition);
        remapped_ = graph::remap_id_labels(data.labels, partition);
        for (int v : graph::SplitMasks::indices(split_.train))
            train_rows_.push_back(v);
        for (int v : graph::SplitMasks::indices(split_.test)) {
            if (remapped_[v] >= 0) {
                test_id_.push_back(v);
                test_id_labels_.push_back(remapped_[v]);
            } else {
                test_ood_.push_back(v);
            }
        }
        classes_.resize(static_cast<std::size_t>(partition.num_id()));
        std::iota(classes_.begin(), classes_.end(), 0);
    }

    std::vector<ExperimentResult> evaluate(const config::MethodSpec& method)
    {
        std::vector<ExperimentResult> rows;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if (test_id_.empty() || test_ood_.empty())
                throw std::runtime_error("test split lacks ID or OOD nodes");
            const auto scores = score(method);
            const double seconds =
                cfg_.timing ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                            : 0.0;
            for (const auto& [kind, s] : scores.by_kind) {
                ExperimentResult r = blank(method.name, kind);
                const auto id = gather(s, test_id_);
                const auto ood = gather(s, test_ood_);
                for (double x : id)
                    if (!std::isfinite(x))
                        throw NumericError("non-finite score");
                for (double x : ood)
                    if (!std::isfinite(x))
                        throw NumericError("non-finite score");
                r.auroc = auroc(id, ood);
                r.roc = roc_curve(id, ood);
                r.nodes = baselines::label_scores(s, data_, partition_, split_);
                r.f1_lower = scores.f1_lower;
                r.f1_upper = scores.f1_upper;
                r.seconds = seconds;
                rows.push_back(std::move(r));
            }
        } catch (const std::exception& e) {
            rows.clear();
            for (auto kind : kinds_for(method.name)) {
                auto r = blank(method.name, kind);
                r.auroc = std::numeric_limits<double>::quiet_NaN();
                r.error = e.what();
                rows.push_back(std::move(r));
            }
        }
        return rows;
    }

private:
    ExperimentResult blank(const std::string& method, UncertaintyKind kind) const
    {
        ExperimentResult r;
        r.dataset = data_.name;
        r.method = method;
        r.kind = kind;
        r.seed = seed_;
        return r;
    }

    static std::vector<double> gather(const Vector& s, const IndexList& nodes)
    {
        std::vector<double> out;
        out.reserve(nodes.size());
        for (int v : nodes)
            out.push_back(s[v]);
        return out;
    }

    training::TrainConfig train_config(model::ModelKind kind) const
    {
        auto t = cfg_.train;
        t.model_kind = kind;
        t.early_stop_metric.reset();
        t.seed = cfg_.train.seed + seed_;
        return t;
    }

    const model::GnnModel& trained(model::ModelKind kind)
    {
        auto& slot = models_[kind];
        return slot.get([&] {
            return training::train_model(data_, split_, partition_, train_config(kind)).model;
        });
    }

    const model::Predictions& predictions(model::ModelKind kind)
    {
        auto& slot = predictions_[kind];
        return slot.get([&] { return model::predict(trained(kind), data_, ops_); });
    }

    const std::vector<Matrix>& member_probs(int size)
    {
        if (static_cast<int>(members_.size()) < size) {
            if (!member_error_.empty())
                throw std::runtime_error(member_error_);
            try {
                auto t = train_config(model::ModelKind::VanillaGNN);
                const auto base = t.seed;
                for (int m = static_cast<int>(members_.size()); m < size; ++m) {
                    t.seed = baselines::member_seed(base, m);
                    const auto net = training::train_model(data_, split_, partition_, t).model;
                    members_.push_back(model::predict(net, data_, ops_).probs);
                }
            } catch (const std::exception& e) {
                member_error_ = e.what();
                throw;
            }
        }
        return members_;
    }

    double f1_of(const std::vector<int>& predicted_all) const
    {
        std::vector<int> predicted;
        predicted.reserve(test_id_.size());
        for (int v : test_id_)
            predicted.push_back(predicted_all[static_cast<std::size_t>(v)]);
        return macro_f1(predicted, test_id_labels_, classes_);
    }

    static std::vector<int> argmax_rows(const Matrix& m)
    {
        std::vector<int> out(static_cast<std::size_t>(m.rows()));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            Eigen::Index arg = 0;
            m.row(r).maxCoeff(&arg);
            out[static_cast<std::size_t>(r)] = static_cast<int>(arg);
        }
        return out;
    }

    Scores score(const config::MethodSpec& method)
    {
        using model::ModelKind;
        const auto& n = method.name;
        const auto& p = method.params;
        Scores out;

        if (n == "credal_final" || n == "credal_lj") {
            const auto kind = n == "credal_lj" ? ModelKind::CredalLJ : ModelKind::CredalFinal;
            const auto& pred = predictions(kind);
            auto u = uncertainty::interval_uncertainty(pred.credal);
            out.by_kind = {{UncertaintyKind::AU, std::move(u.au)}, {UncertaintyKind::EU, std::move(u.eu)}};
            out.f1_lower = f1_of(head::point_prediction(pred.credal, head::Bound::Lower));
            out.f1_upper = f1_of(head::point_prediction(pred.credal, head::Bound::Upper));
            return out;
        }
        if (n == "classical_ensemble" || n == "credal_ensemble") {
            const auto& all = member_probs(p.size);
            const std::span<const Matrix> used(all.data(), static_cast<std::size_t>(p.size));
            auto e = n == "classical_ensemble"
                         ? baselines::classical_ensemble(used)
                         : baselines::credal_ensemble(used, p.members_only
                                                                ? uncertainty::HullMode::MembersOnly
                                                                : uncertainty::HullMode::FullHull);
            out.by_kind = {{UncertaintyKind::AU, std::move(e.au)}, {UncertaintyKind::EU, std::move(e.eu)}};
            out.f1_lower = out.f1_upper = f1_of(argmax_rows(e.mean_probs));
            return out;
        }

        // Post-hoc scorers wrap the vanilla model selected on validation F1.
        const auto& vanilla = trained(ModelKind::VanillaGNN);
        const auto& pred = predictions(ModelKind::VanillaGNN);
        out.f1_lower = out.f1_upper = f1_of(argmax_rows(pred.logits));
        Vector s;
        if (n == "msp") {
            s = baselines::msp_score(pred.logits, p.temperature);
        } else if (n == "energy") {
            s = baselines::energy_score(pred.logits, p.temperature);
        } else if (n == "odin") {
            s = baselines::odin_score(vanilla, data_, ops_, p.temperature, p.epsilon);
        } else if (n == "mahalanobis") {
            IndexList labels;
            for (int v : train_rows_)
                labels.push_back(remapped_[v]);
            const auto g = baselines::GaussianClassModel::fit(pred.final_embedding, train_rows_, labels,
                                                              partition_.num_id(), p.ridge);
            s = baselines::mahalanobis_score(pred.final_embedding, g);
        } else if (n == "knn") {
            Matrix reference(static_cast<Eigen::Index>(train_rows_.size()), pred.final_embedding.cols());
            for (std::size_t i = 0; i < train_rows_.size(); ++i)
                reference.row(static_cast<Eigen::Index>(i)) = pred.final_embedding.row(train_rows_[i]);
            s = baselines::knn_score(pred.final_embedding, reference, p.k);
        } else if (n == "knnlj") {
            s = baselines::knnlj_score(vanilla, data_, ops_, train_rows_, p.k);
        } else if (n == "gnnsafe") {
            s = baselines::gnnsafe_score(baselines::energy_score(pred.logits, p.temperature), ops_.mean,
                                         p.alpha, p.rounds);
        } else {
            throw ConfigError("unknown method '" + n + "'");
        }
        out.by_kind = {{UncertaintyKind::Single, std::move(s)}};
        return out;
    }

    const graph::GraphDataset& data_;
    const gnn::GraphOperators& ops_;
    const graph::ClassPartition& partition_;
    const config::RunConfig& cfg_;
    std::uint64_t seed_;
    graph::SplitMasks split_;
    std::vector<int> remapped_;
    IndexList train_rows_;
    IndexList test_id_;
    IndexList test_ood_;
    IndexList test_id_labels_;
    std::vector<int> classes_;
    std::map<model::ModelKind, Lazy<model::GnnModel>> models_;
    std::map<model::ModelKind, Lazy<model::Predictions>> predictions_;
    std::vector<Matrix> members_;
    std::string member_error_;
};

std::string fmt(double x) { return std::isfinite(x) ? detail::format_double(x) : std::string(); }

std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

json to_json_number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json to_json_number(const std::optional<double>& x) { return x ? to_json_number(*x) : json(nullptr); }

} // namespace

std::vector<ExperimentResult> run_ood_experiment(const graph::GraphDataset& data,
                                                 const config::RunConfig& cfg, int jobs)
{
    data.validate();
    if (cfg.methods.empty())
        throw ConfigError("methods: at least one method is required");
    const auto partition = cfg.partition(data.num_classes);
    const auto ops = gnn::GraphOperators::build(data);

    const auto n_seeds = cfg.seeds.size();
    std::vector<std::vector<ExperimentResult>> per_seed(n_seeds);
    std::vector<std::string> fatal(n_seeds);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n_seeds; i = next++) {
            try {
                SeedRun run(data, ops, partition, cfg, cfg.seeds[i]);
                for (const auto& m : cfg.methods) {
                    auto rows = run.evaluate(m);
                    per_seed[i].insert(per_seed[i].end(), rows.begin(), rows.end());
                }
            } catch (const std::exception& e) {
                fatal[i] = e.what();
            }
        }
    };
    const auto threads = static_cast<std::size_t>(std::clamp<long>(jobs, 1, static_cast<long>(n_seeds)));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }

    // A failed split poisons every cell of that seed.
    for (std::size_t i = 0; i < n_seeds; ++i) {
        if (fatal[i].empty())
            continue;
        per_seed[i].clear();
        for (const auto& m : cfg.methods)
            for (auto kind : kinds_for(m.name)) {
                ExperimentResult r;
                r.dataset = data.name;
                r.method = m.name;
                r.kind = kind;
                r.seed = cfg.seeds[i];
                r.auroc = std::numeric_limits<double>::quiet_NaN();
                r.error = fatal[i];
                per_seed[i].push_back(std::move(r));
            }
    }

    std::vector<ExperimentResult> results;
    for (const auto& m : cfg.methods)
        for (auto kind : kinds_for(m.name))
            for (std::size_t i = 0; i < n_seeds; ++i)
                for (const auto& r : per_seed[i])
                    if (r.method == m.name && r.kind == kind)
                        results.push_back(r);
    return results;
}

void emit_results(const std::vector<ExperimentResult>& results, const fs::path& out_dir)
{
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir))
        throw std::runtime_error("cannot create output directory " + out_dir.string());

    std::ofstream csv(out_dir / "results.csv", std::ios::binary);
    if (!csv)
        throw std::runtime_error("cannot write " + (out_dir / "results.csv").string());
    csv << "dataset,method,kind,seed,auroc,f1_lower,f1_upper,seconds\n";
    for (const auto& r : results)
        csv << r.dataset << ',' << r.method << ',' << to_string(r.kind) << ',' << r.seed << ','
            << fmt(r.auroc) << ',' << fmt(r.f1_lower) << ',' << fmt(r.f1_upper) << ','
            << fmt(r.seconds) << '\n';

    // Group by (method, kind) in first-appearance order.
    std::vector<std::pair<std::string, UncertaintyKind>> groups;
    for (const auto& r : results) {
        const std::pair key{r.method, r.kind};
        if (std::find(groups.begin(), groups.end(), key) == groups.end())
            groups.push_back(key);
    }

    json doc;
    doc["dataset"] = results.empty() ? std::string() : results.front().dataset;
    json methods = json::array();
    for (const auto& [method, kind] : groups) {
        json runs = json::array();
        std::vector<double> aurocs, f1l, f1u;
        std::ofstream roc(out_dir / ("roc_" + method + "_" + to_string(kind) + ".csv"), std::ios::binary);
        roc << "seed,fpr,tpr\n";
        for (const auto& r : results) {
            if (r.method != method || r.kind != kind)
                continue;
            json run{{"seed", r.seed},
                     {"auroc", to_json_number(r.auroc)},
                     {"f1_lower", to_json_number(r.f1_lower)},
                     {"f1_upper", to_json_number(r.f1_upper)},
                     {"seconds", r.seconds}};
            if (!r.ok())
                run["error"] = r.error;
            runs.push_back(std::move(run));
            if (!r.nodes.score.empty()) {
                fs::create_directories(out_dir / "scores");
                std::ofstream nodes(out_dir / "scores" /
                                        (method + "_" + to_string(kind) + "_seed" + std::to_string(r.seed) + ".csv"),
                                    std::ios::binary);
                baselines::write_score_csv(nodes, r.nodes);
            }
            if (r.ok()) {
                aurocs.push_back(r.auroc);
                if (r.f1_lower)
                    f1l.push_back(*r.f1_lower);
                if (r.f1_upper)
                    f1u.push_back(*r.f1_upper);
            }
            for (const auto& pt : r.roc)
                roc << r.seed << ',' << fmt(pt.fpr) << ',' << fmt(pt.tpr) << '\n';
        }
        json entry{{"method", method}, {"kind", to_string(kind)}, {"runs", std::move(runs)}};
        auto summarize = [&](const char* key, const std::vector<double>& v) {
            if (v.empty())
                return;
            const auto [mean, sd] = mean_std(v);
            entry[std::string(key) + "_mean"] = mean;
            entry[std::string(key) + "_std"] = sd;
        };
        summarize("auroc", aurocs);
        summarize("f1_lower", f1l);
        summarize("f1_upper", f1u);
        methods.push_back(std::move(entry));
    }
    doc["methods"] = std::move(methods);
    std::ofstream js(out_dir / "results.json", std::ios::binary);
    if (!js)
        throw std::runtime_error("cannot write " + (out_dir / "results.json").string());
    js << doc.dump(2) << '\n';
}

std::vector<ExperimentResult> parse_results_json(std::string_view text)
{
    std::vector<ExperimentResult> out;
    try {
        const auto doc = json::parse(text);
        const auto dataset = doc.at("dataset").get<std::string>();
        auto number = [](const json& j) {
            return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
        };
        auto optional_number = [](const json& j) {
            return j.is_null() ? std::optional<double>{} : std::optional<double>{j.get<double>()};
        };
        for (const auto& m : doc.at("methods")) {
            for (const auto& run : m.at("runs")) {
                ExperimentResult r;
                r.dataset = dataset;
                r.method = m.at("method").get<std::string>();
                r.kind = parse_uncertainty_kind(m.at("kind").get<std::string>());
                r.seed = run.at("seed").get<std::uint64_t>();
                r.auroc = number(run.at("auroc"));
                r.f1_lower = optional_number(run.at("f1_lower"));
                r.f1_upper = optional_number(run.at("f1_upper"));
                r.seconds = run.at("seconds").get<double>();
                if (run.contains("error"))
                    r.error = run.at("error").get<std::string>();
                out.push_back(std::move(r));
            }
        }
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("malformed results.json: ") + e.what());
    }
    return out;
}

std::string format_summary(const std::vector<ExperimentResult>& results)
{
    std::vector<std::pair<std::string, UncertaintyKind>> groups;
    for (const auto& r : results) {
        const std::pair key{r.method, r.kind};
        if (std::find(groups.begin(), groups.end(), key) == groups.end())
            groups.push_back(key);
    }
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(4);
    for (const auto& [method, kind] : groups) {
        std::vector<double> aurocs, f1;
        std::size_t failed = 0;
        for (const auto& r : results) {
            if (r.method != method || r.kind != kind)
                continue;
            if (!r.ok()) {
                ++failed;
                continue;
            }
            aurocs.push_back(r.auroc);
            if (r.f1_upper)
                f1.push_back(*r.f1_upper);
        }
        ss << method << ' ' << to_string(kind);
        if (aurocs.empty()) {
            ss << " failed";
        } else {
            const auto [m, s] = mean_std(aurocs);
            ss << " auroc " << m << " ± " << s << " (n=" << aurocs.size() << ")";
            if (!f1.empty()) {
                const auto [fm, fs] = mean_std(f1);
                ss << " f1 " << fm << " ± " << fs;
            }
        }
        if (failed > 0)
            ss << " [" << failed << " failed]";
        ss << '\n';
    }
    return ss.str();
}

} // namespace credal::eval
