#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bregmix/config.hpp"
#include "bregmix/harness.hpp"

namespace bregmix {

struct WrittenFile {
    std::string name;
    std::size_t rows = 0;     ///< data rows, header excluded
    std::size_t columns = 0;
};

/// Shortest-safe round-trip text: 17 significant digits, '.' decimal point.
std::string format_double(double value);

/// Writes mse.csv, weights_mean.csv, weights_effective.csv, weights_moment.csv
/// and diagnostics.csv into `directory`, creating it if needed.
std::vector<WrittenFile> write_curves(const CurveSet& curves, const std::filesystem::path& directory);

struct Manifest {
    nlohmann::json config;
    std::string version;
    std::uint64_t seed = 0;
    double wall_clock_seconds = 0.0;
    std::size_t runs_used = 0;
    std::size_t diverged_runs = 0;
    std::vector<WrittenFile> files;
};

nlohmann::json manifest_to_json(const Manifest& manifest);
void write_manifest(const Manifest& manifest, const std::filesystem::path& directory);

}  // namespace bregmix
