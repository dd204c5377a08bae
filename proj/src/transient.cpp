#include "bregmix/transient.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bregmix/error.hpp"

namespace bregmix {

namespace {

void check_dimensions(const Eigen::VectorXd& q, const Eigen::MatrixXd& Q, const Eigen::VectorXd& gamma,
                      const Eigen::MatrixXd& Gamma)
{
    const Eigen::Index k = q.size();
    if (Q.rows() != k || Q.cols() != k || gamma.size() != k || Gamma.rows() != k || Gamma.cols() != k) {
        throw ConfigError("transient recursion: inconsistent dimensions (q has " + std::to_string(k) + " entries)");
    }
}

// diag(Q Gamma) as a vector.
Eigen::VectorXd diag_product(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& Gamma)
{
    return Q.cwiseProduct(Gamma.transpose()).rowwise().sum();
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& A)
{
    return 0.5 * (A + A.transpose());
}

}  // namespace

MomentEstimates estimate_moments(std::span<const RegressorStream> runs)
{
    if (runs.empty()) {
        throw ConfigError("estimate_moments: empty ensemble");
    }
    const std::size_t horizon = runs.front().target.size();
    for (const auto& run : runs) {
        if (run.target.size() != horizon || run.u.size() != horizon) {
            throw ConfigError("estimate_moments: runs must share one horizon");
        }
    }
    const double scale = 1.0 / static_cast<double>(runs.size());
    MomentEstimates out;
    out.gamma.reserve(horizon);
    out.Gamma.reserve(horizon);
    out.d.reserve(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
        const Eigen::Index k = runs.front().u[t].size();
        Eigen::VectorXd gamma = Eigen::VectorXd::Zero(k);
        Eigen::MatrixXd Gamma = Eigen::MatrixXd::Zero(k, k);
        double d = 0.0;
        for (const auto& run : runs) {
            const Eigen::VectorXd& u = run.u[t];
            if (u.size() != k) {
                throw ConfigError("estimate_moments: regressor dimension changes across runs");
            }
            const double s = run.target[t];
            gamma += s * u;
            Gamma.noalias() += u * u.transpose();
            d += s * s;
        }
        out.gamma.push_back(scale * gamma);
        out.Gamma.push_back(scale * Gamma);
        out.d.push_back(scale * d);
    }
    return out;
}

void augment_moments(const Eigen::MatrixXd& R, const Eigen::VectorXd& p, Eigen::MatrixXd& Gamma,
                     Eigen::VectorXd& gamma)
{
    const Eigen::Index n = p.size();
    Gamma.resize(2 * n, 2 * n);
    Gamma.topLeftCorner(n, n) = R;
    Gamma.topRightCorner(n, n) = -R;
    Gamma.bottomLeftCorner(n, n) = -R;
    Gamma.bottomRightCorner(n, n) = R;
    gamma.resize(2 * n);
    gamma << p, -p;
}

Eigen::MatrixXd second_moment_rhs(double mu, const Eigen::VectorXd& q, const Eigen::MatrixXd& Q,
                                  const Eigen::VectorXd& gamma, const Eigen::MatrixXd& Gamma)
{
    check_dimensions(q, Q, gamma, Gamma);
    const Eigen::Index k = q.size();
    const Eigen::MatrixXd C = Q - q * q.transpose();
    const Eigen::VectorXd Dvec = Gamma.diagonal();
    const Eigen::VectorXd drift = gamma - Gamma * q;  // diag(gamma) - diag(Gamma q)
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(k);

    Eigen::MatrixXd A = Q;
    A += mu * drift.asDiagonal() * Q;
    A += mu * Q * drift.asDiagonal();
    A -= mu * (Dvec.asDiagonal() * (C * ones)) * q.transpose();
    A -= mu * q.asDiagonal() * Gamma * C;
    A -= mu * q * ((ones.transpose() * C) * Dvec.asDiagonal());
    A -= mu * C * Gamma * q.asDiagonal();
    return A;
}

double eg_second_moment_normalizer(double mu, const Eigen::VectorXd& q, const Eigen::MatrixXd& Q,
                                   const Eigen::VectorXd& gamma, const Eigen::MatrixXd& Gamma)
{
    check_dimensions(q, Q, gamma, Gamma);
    const Eigen::Index k = q.size();
    const Eigen::MatrixXd C = Q - q * q.transpose();
    const Eigen::MatrixXd D = Gamma.diagonal().asDiagonal();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(k);
    const Eigen::VectorXd Q1 = Q * ones;
    const Eigen::VectorXd C1 = C * ones;
    const Eigen::VectorXd Gq = Gamma * q;
    const double mass = q.sum();

    double b = ones.dot(Q1);
    b += mu * gamma.dot(Q1);
    b -= mu * Gq.dot(Q1);
    b -= mu * C1.dot(Gq);
    b -= mu * mass * ones.dot(C * D * ones);
    b += mu * Q1.dot(gamma);
    b -= mu * Q1.dot(Gq);
    b -= mu * Gq.dot(C1);
    b -= mu * mass * ones.dot(D * C1);
    return b;
}

TheoreticalMoments egu_moment_step(double mu, const Eigen::VectorXd& q, const Eigen::MatrixXd& Q,
                                   const Eigen::VectorXd& gamma, const Eigen::MatrixXd& Gamma)
{
    check_dimensions(q, Q, gamma, Gamma);
    TheoreticalMoments next;
    next.q = q + mu * gamma.cwiseProduct(q) - mu * diag_product(Q, Gamma);
    next.Q = symmetrized(second_moment_rhs(mu, q, Q, gamma, Gamma));
    return next;
}

Eigen::VectorXd eg_mean_step(double mu, double u, const Eigen::VectorXd& q, const Eigen::MatrixXd& Q,
                             const Eigen::VectorXd& gamma, const Eigen::MatrixXd& Gamma)
{
    check_dimensions(q, Q, gamma, Gamma);
    const Eigen::VectorXd numerator = q + mu * gamma.cwiseProduct(q) - mu * diag_product(Q, Gamma);
    const double denominator = q.sum() + mu * gamma.dot(q) - mu * (Q * Gamma).trace();
    if (!(std::abs(denominator) >= 1e-12)) {
        throw NumericalError("quotient approximation degenerate");
    }
    return (u / denominator) * numerator;
}

Eigen::MatrixXd eg_second_moment_step(double mu, double u, const Eigen::VectorXd& q, const Eigen::MatrixXd& Q,
                                      const Eigen::VectorXd& gamma, const Eigen::MatrixXd& Gamma)
{
    const Eigen::MatrixXd A = second_moment_rhs(mu, q, Q, gamma, Gamma);
    const double b = eg_second_moment_normalizer(mu, q, Q, gamma, Gamma);
    if (!(std::abs(b) >= 1e-12)) {
        throw NumericalError("second-moment normalizer degenerate");
    }
    return symmetrized((u * u / b) * A);
}

double mse_evolution(const Eigen::VectorXd& q, const Eigen::MatrixXd& Q, const Eigen::VectorXd& gamma,
                     const Eigen::MatrixXd& Gamma, double d)
{
    check_dimensions(q, Q, gamma, Gamma);
    return d - 2.0 * q.dot(gamma) + (Q * Gamma).trace();
}

OptimumSolution optimum_weights(const Eigen::MatrixXd& R, const Eigen::VectorXd& p)
{
    if (R.rows() != R.cols() || R.rows() != p.size() || p.size() == 0) {
        throw ConfigError("optimum_weights: R must be square and match p");
    }
    OptimumSolution out{R, p, {}, 0.0};
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
    const auto& sv = svd.singularValues();
    const double smallest = sv[sv.size() - 1];
    out.condition_number = smallest > 0.0 ? sv[0] / smallest : std::numeric_limits<double>::infinity();
    if (!(out.condition_number <= 1e12)) {
        throw NumericalError("optimum_weights: R is singular or ill-conditioned (cond = "
                             + std::to_string(out.condition_number) + ")");
    }
    out.w0 = R.colPivHouseholderQr().solve(p);
    return out;
}

double convergence_condition(const Eigen::VectorXd& q, const Eigen::MatrixXd& R, double mu)
{
    const Eigen::Index n = R.rows();
    if (R.cols() != n || q.size() != 2 * n) {
        throw ConfigError("convergence_condition: q must have twice the dimension of R");
    }
    const Eigen::VectorXd s = q.head(n) + q.tail(n);
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - mu * s.asDiagonal() * R;
    const Eigen::EigenSolver<Eigen::MatrixXd> solver(M, false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

TransientRecursion::TransientRecursion(double mu, std::optional<double> mass, Eigen::VectorXd q0)
    : mu_(mu), mass_(mass)
{
    moments_.Q = q0 * q0.transpose();
    moments_.q = std::move(q0);
}

void TransientRecursion::advance(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& Gamma)
{
    try {
        if (mass_) {
            Eigen::VectorXd q = eg_mean_step(mu_, *mass_, moments_.q, moments_.Q, gamma, Gamma);
            moments_.Q = eg_second_moment_step(mu_, *mass_, moments_.q, moments_.Q, gamma, Gamma);
            moments_.q = std::move(q);
        } else {
            moments_ = egu_moment_step(mu_, moments_.q, moments_.Q, gamma, Gamma);
        }
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at t = " + std::to_string(steps_));
    }
    ++steps_;
}

}  // namespace bregmix
