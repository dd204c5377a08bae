#include "bregmix/signal_model.hpp"

#include <cmath>

#include "bregmix/error.hpp"

namespace bregmix {

Eigen::VectorXd reference_system()
{
    Eigen::VectorXd w(7);
    w << 0.25, -0.47, -0.37, 0.045, -0.18, 0.78, 0.147;
    return w;
}

SignalModelConfig::SignalModelConfig(Eigen::VectorXd w_o, double tau, double noise_variance)
    : w_o_(std::move(w_o)), tau_(tau), noise_variance_(noise_variance)
{
    if (w_o_.size() == 0) {
        throw ConfigError("signal.w_o: must be non-empty");
    }
    if (!w_o_.allFinite()) {
        throw ConfigError("signal.w_o: entries must be finite");
    }
    if (!(tau_ > 0.0) || !std::isfinite(tau_)) {
        throw ConfigError("signal.tau: must be > 0");
    }
    if (!(noise_variance_ >= 0.0) || !std::isfinite(noise_variance_)) {
        throw ConfigError("signal.noise_variance: must be >= 0");
    }
}

SignalModelConfig SignalModelConfig::with_snr_db(Eigen::VectorXd w_o, double noise_variance, double snr_db)
{
    if (!(noise_variance > 0.0)) {
        throw ConfigError("signal.noise_variance: must be > 0 when snr_db is given");
    }
    const double power = w_o.squaredNorm();
    if (!(power > 0.0)) {
        throw ConfigError("signal.w_o: zero system has no finite SNR");
    }
    const double tau = std::sqrt(noise_variance * std::pow(10.0, snr_db / 10.0) / power);
    return SignalModelConfig(std::move(w_o), tau, noise_variance);
}

double desired_signal(const SignalModelConfig& config, const Eigen::VectorXd& a, double noise)
{
    return config.tau() * config.system().dot(a) + noise;
}

void next_sample(const SignalModelConfig& config, Rng& regressor_rng, Rng& noise_rng, Sample& out)
{
    out.a.resize(config.filter_order());
    for (Eigen::Index i = 0; i < out.a.size(); ++i) {
        out.a[i] = regressor_rng.normal();
    }
    const double noise = std::sqrt(config.noise_variance()) * noise_rng.normal();
    out.y = desired_signal(config, out.a, noise);
}

Sample next_sample(const SignalModelConfig& config, Rng& regressor_rng, Rng& noise_rng)
{
    Sample s;
    next_sample(config, regressor_rng, noise_rng, s);
    return s;
}

double snr_db(const SignalModelConfig& config)
{
    if (config.noise_variance() == 0.0) {
        throw ConfigError("infinite SNR");
    }
    const double signal_power = config.tau() * config.tau() * config.system().squaredNorm();
    return 10.0 * std::log10(signal_power / config.noise_variance());
}

}  // namespace bregmix
