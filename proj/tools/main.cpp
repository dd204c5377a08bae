#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "bregmix/cli.hpp"
#include "bregmix/error.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Adaptive mixtures of LMS filters with EGU/EG combiners"};
    app.require_subcommand(1);

    std::filesystem::path run_config;
    bregmix::RunOverrides overrides;
    auto* run = app.add_subcommand("run", "Run one experiment and write CSV curves plus manifest.json");
    run->add_option("config", run_config, "Experiment config (JSON)")->required();
    run->add_option("--out", overrides.out, "Output directory (overrides output.directory)");
    run->add_option("--runs", overrides.runs, "Number of Monte Carlo runs");
    run->add_option("--seed", overrides.seed, "Experiment seed");

    std::vector<std::filesystem::path> compare_configs;
    std::filesystem::path compare_out = ".";
    auto* compare = app.add_subcommand("compare", "Run several mixture variants on the same signal and rank them");
    compare->add_option("configs", compare_configs, "Experiment configs (JSON)")->required()->expected(2, -1);
    compare->add_option("--out", compare_out, "Directory for compare.csv");

    std::filesystem::path validate_config;
    auto* validate = app.add_subcommand("validate", "Check a config and print it with defaults filled in");
    validate->add_option("config", validate_config, "Experiment config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : bregmix::kExitConfig;
    }

    unsigned threads = 0;
    try {
        threads = bregmix::threads_from_env(std::getenv("BREGMIX_THREADS"));
    } catch (const bregmix::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return bregmix::kExitConfig;
    }

    if (*run) {
        return bregmix::cmd_run(run_config, overrides, threads, std::cout, std::cerr);
    }
    if (*compare) {
        return bregmix::cmd_compare(compare_configs, compare_out, threads, std::cout, std::cerr);
    }
    return bregmix::cmd_validate(validate_config, std::cout, std::cerr);
}
