#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bregmix/error.hpp"
#include "bregmix/mixture.hpp"
#include "bregmix/signal_model.hpp"

namespace bregmix {

/// A constituent step size: either fixed or drawn uniformly once per experiment.
struct ConstituentSpec {
    std::optional<double> mu;
    std::optional<std::pair<double, double>> mu_range;
};

/// Exactly one of `tau` and `snr_db` is set.
struct SignalSpec {
    std::vector<double> w_o;
    double noise_variance = 0.3;
    std::optional<double> tau;
    std::optional<double> snr_db;
};

struct MixtureSpec {
    Algorithm algorithm = Algorithm::AffineEg;
    double mu = 0.0;
    std::optional<double> u;
    bool use_linearized = false;
};

struct TheorySpec {
    bool enabled = false;
    /// 0 means the moments come from the analysed ensemble itself.
    std::size_t moment_runs = 0;
};

/// 1-based (i, j) index into the augmented second-moment matrix.
using MomentEntry = std::pair<int, int>;

struct OutputSpec {
    std::string directory = ".";
    std::size_t decimation = 10;
    std::vector<MomentEntry> moment_entries;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::size_t runs = 200;
    std::size_t horizon = 20000;
    SignalSpec signal;
    std::vector<ConstituentSpec> constituents;
    MixtureSpec mixture;
    TheorySpec theory;
    OutputSpec output;

    std::size_t constituent_count() const { return constituents.size(); }
    /// Augmented weight dimension: 2(m - 1), 2m, m - 1 or m depending on the algorithm.
    std::size_t weight_dimension() const;
};

/// Schema violations, each prefixed with its field path (e.g. "mixture.u: ...").
class ConfigErrors : public ConfigError {
public:
    explicit ConfigErrors(std::vector<std::string> issues);
    const std::vector<std::string>& issues() const { return issues_; }

private:
    std::vector<std::string> issues_;
};

/// Parses and validates; unknown keys are errors. Throws ConfigErrors listing every violation.
ExperimentConfig parse_config(const nlohmann::json& document);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved config with defaults filled in.
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Config plus everything derived from it before simulation.
struct ResolvedExperiment {
    ExperimentConfig config;
    SignalModelConfig signal;
    std::vector<double> constituent_mu;
};

/// Draws ranged step sizes from the experiment seed and solves tau from the SNR if needed.
ResolvedExperiment resolve(const ExperimentConfig& config);

/// Config echo that reproduces the experiment without any draws: fixed
/// constituent step sizes and an explicit tau.
ExperimentConfig pinned_config(const ResolvedExperiment& resolved);

}  // namespace bregmix
