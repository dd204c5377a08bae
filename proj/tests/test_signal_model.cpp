#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "bregmix/error.hpp"
#include "bregmix/rng.hpp"
#include "bregmix/signal_model.hpp"

using namespace bregmix;

TEST_CASE("reference system is the seventh-order filter of the experiments")
{
    const Eigen::VectorXd w = reference_system();
    REQUIRE(w.size() == 7);
    const double expected[] = {0.25, -0.47, -0.37, 0.045, -0.18, 0.78, 0.147};
    for (int i = 0; i < 7; ++i) {
        CHECK(w[i] == expected[i]);
    }
    CHECK_NOTHROW(SignalModelConfig(w, 1.0, 0.3));
}

TEST_CASE("config validation")
{
    CHECK_THROWS_AS(SignalModelConfig(Eigen::VectorXd(), 1.0, 0.3), ConfigError);
    CHECK_THROWS_AS(SignalModelConfig(Eigen::VectorXd::Ones(2), 0.0, 0.3), ConfigError);
    CHECK_THROWS_AS(SignalModelConfig(Eigen::VectorXd::Ones(2), 1.0, -0.1), ConfigError);
    Eigen::VectorXd bad = Eigen::VectorXd::Ones(2);
    bad[1] = std::nan("");
    CHECK_THROWS_AS(SignalModelConfig(bad, 1.0, 0.3), ConfigError);
}

TEST_CASE("noiseless identity system")
{
    const SignalModelConfig c(Eigen::VectorXd::Ones(1), 1.0, 0.0);
    Eigen::VectorXd a(1);
    a << 2.0;
    CHECK(desired_signal(c, a, 0.0) == 2.0);
}

TEST_CASE("snr in dB")
{
    const Eigen::VectorXd w = reference_system();
    const double energy = w.squaredNorm();

    SUBCASE("equal powers give 0 dB")
    {
        const SignalModelConfig c(w, std::sqrt(0.3 / energy), 0.3);
        CHECK(snr_db(c) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("decade ratio gives 10 dB")
    {
        const SignalModelConfig c(w, std::sqrt(3.0 / energy), 0.3);
        CHECK(snr_db(c) == doctest::Approx(10.0).epsilon(1e-12));
    }
    SUBCASE("tau solved for -10 dB round-trips")
    {
        const auto c = SignalModelConfig::with_snr_db(w, 0.3, -10.0);
        CHECK(c.tau() == doctest::Approx(std::sqrt(0.03 / energy)).epsilon(1e-14));
        CHECK(snr_db(c) == doctest::Approx(-10.0).epsilon(1e-12));
    }
    SUBCASE("noiseless signal has infinite SNR")
    {
        const SignalModelConfig c(w, 1.0, 0.0);
        CHECK_THROWS_WITH_AS(snr_db(c), "infinite SNR", ConfigError);
    }
}

TEST_CASE("sample sequences are reproducible from the seed")
{
    const auto c = SignalModelConfig::with_snr_db(reference_system(), 0.3, 0.0);
    Rng r1(stream_seed(5, Ensemble::Main, 3, StreamRole::Regressor));
    Rng n1(stream_seed(5, Ensemble::Main, 3, StreamRole::Noise));
    Rng r2(stream_seed(5, Ensemble::Main, 3, StreamRole::Regressor));
    Rng n2(stream_seed(5, Ensemble::Main, 3, StreamRole::Noise));
    for (int t = 0; t < 100; ++t) {
        const Sample a = next_sample(c, r1, n1);
        const Sample b = next_sample(c, r2, n2);
        REQUIRE(a.y == b.y);
        REQUIRE(a.a == b.a);
    }
}

TEST_CASE("stream seeds differ across every key component")
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
        for (auto ens : {Ensemble::Main, Ensemble::Calibration}) {
            for (std::uint64_t run = 0; run < 50; ++run) {
                for (auto role : {StreamRole::Regressor, StreamRole::Noise, StreamRole::ConstituentStep}) {
                    seen.insert(stream_seed(seed, ens, run, role));
                }
            }
        }
    }
    CHECK(seen.size() == 3 * 2 * 50 * 3);
}

TEST_CASE("sample statistics")
{
    const auto c = SignalModelConfig::with_snr_db(reference_system(), 0.3, -10.0);
    Rng reg(stream_seed(11, Ensemble::Main, 0, StreamRole::Regressor));
    Rng noise(stream_seed(11, Ensemble::Main, 0, StreamRole::Noise));
    const int N = 1000000;
    const Eigen::Index n = c.filter_order();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    double sum_y = 0.0, sum_y2 = 0.0, sum_y4 = 0.0;
    Sample s;
    for (int t = 0; t < N; ++t) {
        next_sample(c, reg, noise, s);
        cov.noalias() += s.a * s.a.transpose();
        sum_y += s.y;
        const double y2 = s.y * s.y;
        sum_y2 += y2;
        sum_y4 += y2 * y2;
    }
    cov /= N;
    const double mean_y = sum_y / N;
    const double power = c.tau() * c.tau() * c.system().squaredNorm() + c.noise_variance();
    const double mean_y2 = sum_y2 / N;

    CHECK(std::abs(mean_y) <= 3.0 * std::sqrt(power / N));
    CHECK((cov - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 5.0 / std::sqrt(double(N)));
    const double stderr_y2 = std::sqrt((sum_y4 / N - mean_y2 * mean_y2) / N);
    CHECK(std::abs(mean_y2 - power) <= 3.0 * stderr_y2);
}
