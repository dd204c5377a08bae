#include "bregmix/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>

#include "bregmix/config.hpp"
#include "bregmix/harness.hpp"
#include "bregmix/output.hpp"
#include "bregmix/summary.hpp"

#ifndef BREGMIX_VERSION
#define BREGMIX_VERSION "unknown"
#endif

namespace bregmix {

namespace {

template <class Fn>
int guarded(std::ostream& err, Fn&& fn)
{
    try {
        return fn();
    } catch (const ConfigErrors& e) {
        for (const auto& issue : e.issues()) {
            err << "config error: " << issue << '\n';
        }
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ExperimentDiverged& e) {
        err << "error: " << e.what() << '\n';
        return kExitDiverged;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

struct Comparison {
    std::string label;
    ExperimentConfig config;
    double final_mse = 0.0;
    std::optional<std::size_t> iterations;
};

// Everything except the mixture section and the output directory must match.
bool comparable(const ExperimentConfig& a, const ExperimentConfig& b)
{
    auto key = [](const ExperimentConfig& c) {
        nlohmann::json j = config_to_json(c);
        j.erase("mixture");
        j["output"].erase("directory");
        j["output"].erase("moment_entries");
        return j;
    };
    return key(a) == key(b);
}

}  // namespace

unsigned threads_from_env(const char* value)
{
    if (value == nullptr || *value == '\0') {
        return 0;
    }
    unsigned threads = 0;
    const char* end = value + std::strlen(value);
    const auto [ptr, ec] = std::from_chars(value, end, threads);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("BREGMIX_THREADS: expected a non-negative integer, got '" + std::string(value) + "'");
    }
    return threads;
}

int cmd_run(const std::filesystem::path& config_path, const RunOverrides& overrides, unsigned threads,
            std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        ExperimentConfig config = load_config(config_path);
        if (overrides.out) {
            config.output.directory = overrides.out->string();
        }
        if (overrides.runs) {
            if (*overrides.runs == 0) {
                throw ConfigErrors({"runs: must be >= 1"});
            }
            config.runs = *overrides.runs;
        }
        if (overrides.seed) {
            config.seed = *overrides.seed;
        }
        const ResolvedExperiment resolved = resolve(config);

        const auto start = std::chrono::steady_clock::now();
        const CurveSet curves = run_ensemble(config, RunOptions{threads});
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

        const std::filesystem::path dir = config.output.directory;
        Manifest manifest;
        manifest.config = config_to_json(pinned_config(resolved));
        manifest.version = BREGMIX_VERSION;
        manifest.seed = config.seed;
        manifest.wall_clock_seconds = elapsed.count();
        manifest.runs_used = curves.runs_used;
        manifest.diverged_runs = curves.diverged_runs;
        manifest.files = write_curves(curves, dir);
        write_manifest(manifest, dir);

        out << "wrote " << manifest.files.size() << " files to " << dir.string() << " (" << curves.runs_used
            << " runs, " << curves.diverged_runs << " diverged, " << std::fixed << std::setprecision(1)
            << elapsed.count() << " s)\n";
        return kExitOk;
    });
}

int cmd_compare(const std::vector<std::filesystem::path>& config_paths, const std::filesystem::path& out_dir,
                unsigned threads, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        if (config_paths.size() < 2) {
            throw ConfigError("compare: at least two configs are required");
        }
        std::vector<Comparison> rows;
        for (const auto& path : config_paths) {
            rows.push_back({path.stem().string(), load_config(path), 0.0, std::nullopt});
        }
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (!comparable(rows.front().config, rows[i].config)) {
                throw ConfigError("not comparable: " + config_paths[i].string() + " differs from "
                                  + config_paths.front().string() + " outside the mixture section");
            }
        }

        for (auto& row : rows) {
            const CurveSet curves = run_ensemble(row.config, RunOptions{threads});
            row.final_mse = final_window_mean(curves.mse_mixture);
            std::vector<double> w1(curves.weights_effective.rows());
            for (Eigen::Index r = 0; r < curves.weights_effective.rows(); ++r) {
                w1[static_cast<std::size_t>(r)] = curves.weights_effective(r, 0);
            }
            row.iterations = iterations_to_90(curves.t, w1);
        }

        std::filesystem::create_directories(out_dir);
        std::ofstream csv(out_dir / "compare.csv", std::ios::binary);
        csv << "label,algorithm,mu,u,final_mse,iterations_to_90\n";
        for (const auto& row : rows) {
            const auto& mix = row.config.mixture;
            csv << row.label << ',' << to_string(mix.algorithm) << ',' << format_double(mix.mu) << ','
                << (mix.u ? format_double(*mix.u) : std::string()) << ',' << format_double(row.final_mse) << ','
                << (row.iterations ? std::to_string(*row.iterations) : std::string()) << '\n';
        }
        if (!csv) {
            throw Error("failed writing compare.csv");
        }

        std::vector<const Comparison*> ranking;
        for (const auto& row : rows) {
            ranking.push_back(&row);
        }
        std::stable_sort(ranking.begin(), ranking.end(), [](const Comparison* a, const Comparison* b) {
            const auto ia = a->iterations.value_or(SIZE_MAX);
            const auto ib = b->iterations.value_or(SIZE_MAX);
            return ia != ib ? ia < ib : a->final_mse < b->final_mse;
        });
        out << "rank  label                 algorithm           iterations_to_90  final_mse\n";
        for (std::size_t i = 0; i < ranking.size(); ++i) {
            const Comparison& row = *ranking[i];
            out << std::left << std::setw(6) << i + 1 << std::setw(22) << row.label << std::setw(20)
                << to_string(row.config.mixture.algorithm) << std::setw(18)
                << (row.iterations ? std::to_string(*row.iterations) : std::string("-")) << std::scientific
                << std::setprecision(4) << row.final_mse << std::defaultfloat << '\n';
        }
        return kExitOk;
    });
}

int cmd_validate(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const ExperimentConfig config = load_config(config_path);
        out << config_to_json(config).dump(2) << '\n';
        return kExitOk;
    });
}

}  // namespace bregmix
