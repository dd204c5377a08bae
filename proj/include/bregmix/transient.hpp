#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace bregmix {

/// Per-time-step ensemble statistics of the augmented regressor u(t) = [r; -r]
/// against the target term s(t): gamma = E[u s], Gamma = E[u u^T], d = E[s^2].
/// For affine mixtures r = delta and s = y - x_m; unconstrained: r = x, s = y.
struct MomentEstimates {
    std::vector<Eigen::VectorXd> gamma;
    std::vector<Eigen::MatrixXd> Gamma;
    std::vector<double> d;

    std::size_t horizon() const { return d.size(); }
};

/// One run's stream of augmented regressors and target terms.
struct RegressorStream {
    std::vector<Eigen::VectorXd> u;
    std::vector<double> target;
};

/// Per-t ensemble means, summed in run order. Throws ConfigError on an empty
/// ensemble or on runs with different horizons.
MomentEstimates estimate_moments(std::span<const RegressorStream> runs);

/// Expands base-space moments (R = E[r r^T], p = E[r s]) to the augmented space:
/// Gamma = [R, -R; -R, R], gamma = [p; -p].
void augment_moments(const Eigen::MatrixXd& R, const Eigen::VectorXd& p, Eigen::MatrixXd& Gamma,
                     Eigen::VectorXd& gamma);

/// Mean q_a and second moment Q_a of the augmented weights.
struct TheoreticalMoments {
    Eigen::VectorXd q;
    Eigen::MatrixXd Q;
};

/// Right hand side of the second-moment recursion for the first-order EGU
/// update, with E[diag^2(u)] taken as diag(diag(Gamma)):
///
///   (I + mu diag(gamma) - mu diag(Gamma q)) Q - mu D (Q - q q^T) 1 q^T
///   - mu diag(q) Gamma (Q - q q^T) + Q (mu diag(gamma) - mu diag(Gamma q))
///   - mu q 1^T (Q - q q^T) D - mu (Q - q q^T) Gamma diag(q)
///
/// Not symmetrized.
Eigen::MatrixXd second_moment_rhs(double mu, const Eigen::VectorXd& q, const Eigen::MatrixXd& Q,
                                  const Eigen::VectorXd& gamma, const Eigen::MatrixXd& Gamma);

/// Normalizer of the EG second-moment recursion, written with augmented-space
/// quantities (p -> gamma, R q -> Gamma q). Equals 1^T A 1 for A = second_moment_rhs.
double eg_second_moment_normalizer(double mu, const Eigen::VectorXd& q, const Eigen::MatrixXd& Q,
                                   const Eigen::VectorXd& gamma, const Eigen::MatrixXd& Gamma);

/// One step of the coupled EGU mean / second-moment recursions. Q' is symmetrized.
TheoreticalMoments egu_moment_step(double mu, const Eigen::VectorXd& q, const Eigen::MatrixXd& Q,
                                   const Eigen::VectorXd& gamma, const Eigen::MatrixXd& Gamma);

/// EG mean recursion with the expectation of the quotient replaced by the
/// quotient of expectations. Throws NumericalError("quotient approximation
/// degenerate") when the denominator is below 1e-12 in magnitude.
Eigen::VectorXd eg_mean_step(double mu, double u, const Eigen::VectorXd& q, const Eigen::MatrixXd& Q,
                             const Eigen::VectorXd& gamma, const Eigen::MatrixXd& Gamma);

/// Q' = u^2 A / b, symmetrized. Throws NumericalError when |b| < 1e-12.
Eigen::MatrixXd eg_second_moment_step(double mu, double u, const Eigen::VectorXd& q, const Eigen::MatrixXd& Q,
                                      const Eigen::VectorXd& gamma, const Eigen::MatrixXd& Gamma);

/// d - 2 q^T gamma + tr(Q Gamma).
double mse_evolution(const Eigen::VectorXd& q, const Eigen::MatrixXd& Q, const Eigen::VectorXd& gamma,
                     const Eigen::MatrixXd& Gamma, double d);

/// Wiener solution R w0 = p.
struct OptimumSolution {
    Eigen::MatrixXd R;
    Eigen::VectorXd p;
    Eigen::VectorXd w0;
    double condition_number = 0.0;
};

/// Throws NumericalError when R is singular or its condition number exceeds 1e12.
OptimumSolution optimum_weights(const Eigen::MatrixXd& R, const Eigen::VectorXd& p);

/// Spectral radius of I - mu diag(q_1 + q_2) R, where q = [q_1; q_2] is the
/// augmented mean and R the base-space regressor correlation.
double convergence_condition(const Eigen::VectorXd& q, const Eigen::MatrixXd& R, double mu);

/// Sequential driver of the recursions for either EGU or EG mixtures.
class TransientRecursion {
public:
    /// `mass` is u for EG recursions; leave empty for EGU. Q starts at q q^T.
    TransientRecursion(double mu, std::optional<double> mass, Eigen::VectorXd q0);

    const Eigen::VectorXd& mean() const { return moments_.q; }
    const Eigen::MatrixXd& second_moment() const { return moments_.Q; }
    std::size_t steps() const { return steps_; }

    /// Advances one time step. NumericalError messages carry the time index.
    void advance(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& Gamma);

private:
    double mu_;
    std::optional<double> mass_;
    TheoreticalMoments moments_;
    std::size_t steps_ = 0;
};

}  // namespace bregmix
