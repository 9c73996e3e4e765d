#include "credal/commands.hpp"

#include "credal/checkpoint.hpp"
#include "credal/config.hpp"
#include "credal/experiment.hpp"
#include "credal/uncertainty.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>

namespace credal::cli {

namespace fs = std::filesystem;

namespace {

config::RunConfig load_with_overrides(const fs::path& file, const Overrides& o)
{
    auto cfg = config::load_config(file);
    if (o.out)
        cfg.output_dir = *o.out;
    if (o.seed) {
        cfg.seeds = {*o.seed};
        cfg.train.seed = *o.seed;
        if (cfg.csbm)
            cfg.csbm->seed = *o.seed;
    }
    return cfg;
}

int guarded(std::ostream& err, const std::function<int()>& body)
{
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir))
        throw std::runtime_error("cannot create output directory " + dir.string());
}

} // namespace

int resolve_jobs(std::optional<int> flag)
{
    if (const char* env = std::getenv("CREDAL_JOBS")) {
        const int v = std::atoi(env);
        if (v >= 1)
            return v;
    }
    return flag && *flag >= 1 ? *flag : 1;
}

int cmd_train(const fs::path& config, const Overrides& overrides, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        auto cfg = load_with_overrides(config, overrides);
        const auto data = cfg.load_data();
        const auto partition = cfg.partition(data.num_classes);
        const auto split =
            graph::leave_out_class_split(data, partition, cfg.train_frac, cfg.val_frac, cfg.seeds.front());
        auto result = training::train_model(data, split, partition, cfg.train);

        ensure_dir(cfg.output_dir);
        training::save_checkpoint(result.model, cfg.output_dir / "checkpoint");
        {
            std::ofstream h(cfg.output_dir / "history.csv", std::ios::binary);
            result.history.write_csv(h);
            if (!h)
                throw std::runtime_error("cannot write history.csv");
        }
        if (model::is_credal(result.model.config().kind)) {
            const auto ops = gnn::GraphOperators::build(data);
            const auto pred = model::predict(result.model, data, ops);
            std::ofstream p(cfg.output_dir / "predictions.csv", std::ios::binary);
            uncertainty::write_prediction_csv(p, pred.credal, uncertainty::interval_uncertainty(pred.credal));
        }
        out << "trained " << model::to_string(result.model.config().kind) << " on " << data.name << ": "
            << result.history.epochs.size() << " epochs, best epoch " << result.history.best_epoch
            << "\ncheckpoint written to " << (cfg.output_dir / "checkpoint").string() << '\n';
        return 0;
    });
}

int cmd_eval_ood(const fs::path& config, const Overrides& overrides, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        auto cfg = load_with_overrides(config, overrides);
        if (cfg.methods.empty())
            throw ConfigError("methods: at least one method is required for eval-ood");
        const auto data = cfg.load_data();
        const auto results = eval::run_ood_experiment(data, cfg, resolve_jobs(overrides.jobs));
        eval::emit_results(results, cfg.output_dir);
        out << eval::format_summary(results);
        int failed = 0;
        for (const auto& r : results)
            if (!r.ok()) {
                ++failed;
                err << "cell " << r.method << '/' << eval::to_string(r.kind) << " seed " << r.seed
                    << " failed: " << r.error << '\n';
            }
        return failed == 0 ? 0 : 1;
    });
}

int cmd_gen_synthetic(const fs::path& config, const Overrides& overrides, std::ostream& out,
                      std::ostream& err)
{
    return guarded(err, [&] {
        auto cfg = load_with_overrides(config, overrides);
        if (!cfg.csbm)
            throw ConfigError("gen-synthetic needs a dataset.csbm section");
        const auto data = graph::generate_csbm(*cfg.csbm);
        graph::save_dataset(data, cfg.output_dir);
        if (cfg.has_partition) {
            nlohmann::json split{{"ood_classes", cfg.ood_classes},
                                 {"train_frac", cfg.train_frac},
                                 {"val_frac", cfg.val_frac},
                                 {"seed", cfg.seeds.front()}};
            std::ofstream s(cfg.output_dir / "split.json", std::ios::binary);
            s << split.dump(2) << '\n';
        }
        out << "wrote " << data.num_nodes() << " nodes, " << data.edges.num_edges() << " edges to "
            << cfg.output_dir.string();
        if (data.edges.num_edges() > 0)
            out << " (edge homophily " << graph::edge_homophily(data) << ')';
        out << '\n';
        return 0;
    });
}

int cmd_verify(const verify::VerifyOptions& options, std::ostream& out)
{
    const auto checks = verify::run_all(options);
    verify::print_report(out, checks);
    for (const auto& c : checks)
        if (!c.passed)
            return 1;
    return 0;
}

} // namespace credal::cli
