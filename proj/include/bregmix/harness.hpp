#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bregmix/config.hpp"
#include "bregmix/error.hpp"
#include "bregmix/transient.hpp"

namespace bregmix {

/// More than 10% of the runs diverged.
class ExperimentDiverged : public Error {
public:
    ExperimentDiverged(std::size_t diverged, std::size_t runs);
    std::size_t diverged() const { return diverged_; }

private:
    std::size_t diverged_;
};

struct RunOptions {
    /// Worker threads; 0 picks the hardware concurrency. Results do not depend on it.
    unsigned threads = 0;
};

/// Ensemble-averaged, decimated curves of one experiment. Every per-row series has
/// ceil(horizon / decimation) rows; row r covers steps [r D, min((r + 1) D, T) - 1]
/// and `t` holds the last step of the window. Squared errors and diagnostics are
/// window means; weights and moments are end-of-window values.
struct CurveSet {
    std::vector<std::size_t> t;

    std::vector<double> mse_mixture;
    Eigen::MatrixXd mse_constituent;    ///< rows x m
    Eigen::MatrixXd weights_mean;       ///< rows x k, augmented weights (plain weights for LMS)
    Eigen::MatrixXd weights_effective;  ///< rows x m, effective combination weights
    std::vector<MomentEntry> moment_entries;
    Eigen::MatrixXd weights_moment;     ///< rows x entries, E[w_a(i) w_a(j)]

    bool has_theory = false;
    std::vector<double> mse_theory;
    Eigen::MatrixXd theory_mean;        ///< rows x k
    Eigen::MatrixXd theory_moment;      ///< rows x entries
    std::vector<double> convergence_radius;  ///< window maximum

    std::vector<double> linearization_diff;  ///< NaN for LMS combiners
    std::vector<double> quotient_diff;       ///< NaN unless EG
    std::vector<std::size_t> saturation_count;

    /// Smallest diagonal entry of E[w_a w_a^T] - E[w_a] E[w_a]^T over all steps.
    double min_weight_variance = 0.0;
    /// Smallest diagonal entry of Q_a - q_a q_a^T along the theoretical trajectory (theory only).
    double min_theory_variance = 0.0;

    /// Base-space moments at the last step (theory only): R = E[r r^T], p = E[r s].
    Eigen::MatrixXd final_R;
    Eigen::VectorXd final_p;

    std::size_t runs_used = 0;
    std::size_t diverged_runs = 0;
    std::vector<double> constituent_mu;
    double tau = 0.0;

    std::size_t rows() const { return t.size(); }
};

/// Runs the whole Monte Carlo experiment. Run r draws from streams keyed on
/// (seed, r, role); per-step sums are reduced in run order, so the result is
/// identical for any thread count. Diverged runs are excluded and counted;
/// more than 10% diverged throws ExperimentDiverged.
CurveSet run_ensemble(const ExperimentConfig& config, const RunOptions& options = {});

/// One ensemble member at a fixed time step, for the quotient diagnostic.
struct EnsembleMember {
    Eigen::VectorXd weights;    ///< augmented weights before the update
    Eigen::VectorXd regressor;  ///< augmented regressor [r; -r]
    double error = 0.0;
};

/// Accumulates E[u N / D], E[N] and E[D] with N = (I + mu e diag(u_reg)) w_a and
/// D = (1^T + mu e u_reg^T) w_a.
class QuotientAccumulator {
public:
    QuotientAccumulator(double mu, double mass, Eigen::Index dimension);
    void add(const Eigen::VectorXd& weights, const Eigen::VectorXd& regressor, double error);
    void merge(const QuotientAccumulator& other);
    /// First-coordinate normalized squared difference between the mean quotient
    /// and the quotient of means. Throws NumericalError on a degenerate denominator.
    double value() const;
    std::size_t count() const { return count_; }

private:
    double mu_;
    double mass_;
    Eigen::VectorXd quotient_sum_;
    Eigen::VectorXd numerator_sum_;
    double denominator_sum_ = 0.0;
    std::size_t count_ = 0;
};

double quotient_diagnostic(std::span<const EnsembleMember> members, double mu, double mass);

/// Full-resolution theoretical trajectories.
struct TheoryCurves {
    std::vector<Eigen::VectorXd> q;
    std::vector<Eigen::MatrixXd> Q;
    std::vector<double> mse;
};

/// Drives the recursions from the config's initial weights with the supplied moments.
TheoryCurves run_theory(const ExperimentConfig& config, const MomentEstimates& moments);

/// Initial augmented weights of the configured combiner.
Eigen::VectorXd initial_weights(const ExperimentConfig& config);

}  // namespace bregmix
