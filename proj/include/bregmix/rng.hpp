#pragma once

#include <cstdint>
#include <random>

namespace bregmix {

/// Independent stream purposes within one Monte Carlo run.
enum class StreamRole : std::uint64_t {
    Regressor = 1,
    Noise = 2,
    ConstituentStep = 3,
};

/// Which ensemble a run belongs to. Calibration runs only feed moment estimates.
enum class Ensemble : std::uint64_t {
    Main = 0,
    Calibration = 1,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Derives a 64-bit stream seed from (seed, ensemble, run, role). Distinct keys
/// give statistically independent streams; the mapping is fixed across builds.
std::uint64_t stream_seed(std::uint64_t seed, Ensemble ensemble, std::uint64_t run, StreamRole role);

/// Seeded Gaussian/uniform source. Each instance is owned by exactly one run.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace bregmix
