#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace bregmix {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitDiverged = 3,
};

struct RunOverrides {
    std::optional<std::filesystem::path> out;
    std::optional<std::size_t> runs;
    std::optional<std::uint64_t> seed;
};

int cmd_run(const std::filesystem::path& config_path, const RunOverrides& overrides, unsigned threads,
            std::ostream& out, std::ostream& err);

/// Runs every config and writes compare.csv into `out_dir`.
int cmd_compare(const std::vector<std::filesystem::path>& config_paths, const std::filesystem::path& out_dir,
                unsigned threads, std::ostream& out, std::ostream& err);

int cmd_validate(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);

/// Parses BREGMIX_THREADS; unset or empty means 0 (auto).
unsigned threads_from_env(const char* value);

}  // namespace bregmix
