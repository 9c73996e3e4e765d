#include "credal/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"Credal GNN training, OOD evaluation and verification"};
    app.require_subcommand(1);

    std::string config;
    credal::cli::Overrides overrides;
    std::string out_dir;
    std::uint64_t seed = 0;
    int jobs = 1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "run configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "override output.dir");
        sub->add_option("--seed", seed, "override every seed in the config");
    };

    auto* train = app.add_subcommand("train", "train one model and write a checkpoint");
    add_common(train);
    auto* eval = app.add_subcommand("eval-ood", "run the leave-out-class OOD experiment");
    add_common(eval);
    eval->add_option("--jobs", jobs, "parallel seeds (CREDAL_JOBS overrides)")->check(CLI::PositiveNumber);
    auto* gen = app.add_subcommand("gen-synthetic", "write a cSBM dataset directory");
    add_common(gen);

    credal::verify::VerifyOptions verify_options;
    auto* verify = app.add_subcommand("verify", "run the built-in numerical verification battery");
    verify->add_option("--scale", verify_options.scale, "instance-count multiplier")
        ->check(CLI::PositiveNumber);
    verify->add_flag("--inject-min-entropy-fault", verify_options.inject_min_entropy_fault,
                     "test hook: swap the min-entropy solver for the max-entropy one");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    auto collect = [&](CLI::App* sub) {
        if (sub->count("--out") > 0)
            overrides.out = out_dir;
        if (sub->count("--seed") > 0)
            overrides.seed = seed;
        if (sub->get_option_no_throw("--jobs") != nullptr && sub->count("--jobs") > 0)
            overrides.jobs = jobs;
    };

    if (train->parsed()) {
        collect(train);
        return credal::cli::cmd_train(config, overrides, std::cout, std::cerr);
    }
    if (eval->parsed()) {
        collect(eval);
        return credal::cli::cmd_eval_ood(config, overrides, std::cout, std::cerr);
    }
    if (gen->parsed()) {
        collect(gen);
        return credal::cli::cmd_gen_synthetic(config, overrides, std::cout, std::cerr);
    }
    return credal::cli::cmd_verify(verify_options, std::cout);
}
