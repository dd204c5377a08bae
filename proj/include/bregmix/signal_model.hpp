#pragma once

#include <Eigen/Dense>

#include "bregmix/rng.hpp"

namespace bregmix {

/// Seventh-order system used by the reference experiments.
Eigen::VectorXd reference_system();

/// Synthetic data model y(t) = tau * w_o^T a(t) + n(t), a(t) ~ N(0, I), n(t) ~ N(0, noise_variance).
class SignalModelConfig {
public:
    /// Throws ConfigError unless tau > 0, noise_variance >= 0 and w_o is non-empty and finite.
    SignalModelConfig(Eigen::VectorXd w_o, double tau, double noise_variance);

    /// Solves tau from a target SNR in dB against the actual noise variance.
    static SignalModelConfig with_snr_db(Eigen::VectorXd w_o, double noise_variance, double snr_db);

    Eigen::Index filter_order() const { return w_o_.size(); }
    const Eigen::VectorXd& system() const { return w_o_; }
    double tau() const { return tau_; }
    double noise_variance() const { return noise_variance_; }

private:
    Eigen::VectorXd w_o_;
    double tau_;
    double noise_variance_;
};

struct Sample {
    Eigen::VectorXd a;
    double y = 0.0;
};

/// y for a given regressor and noise realization.
double desired_signal(const SignalModelConfig& config, const Eigen::VectorXd& a, double noise);

/// Draws the regressor from `regressor_rng` and the noise from `noise_rng`.
Sample next_sample(const SignalModelConfig& config, Rng& regressor_rng, Rng& noise_rng);

/// In-place variant that reuses `out.a`.
void next_sample(const SignalModelConfig& config, Rng& regressor_rng, Rng& noise_rng, Sample& out);

/// 10 log10(tau^2 ||w_o||^2 / noise_variance). Throws ConfigError("infinite SNR") when noise_variance == 0.
double snr_db(const SignalModelConfig& config);

}  // namespace bregmix
