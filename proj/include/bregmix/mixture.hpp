#pragma once

#include <optional>
#include <string_view>
#include <variant>

#include <Eigen/Dense>

namespace bregmix {

/// Second-stage combiner families.
enum class Algorithm {
    AffineEgu,
    AffineEg,
    AffineLms,
    UnconstrainedEgu,
    UnconstrainedEg,
    UnconstrainedLms,
};

std::string_view to_string(Algorithm algorithm);
std::optional<Algorithm> parse_algorithm(std::string_view name);
bool is_affine(Algorithm algorithm);
bool is_eg(Algorithm algorithm);
bool is_lms(Algorithm algorithm);
inline bool is_multiplicative(Algorithm algorithm) { return !is_lms(algorithm); }

/// Exponent arguments are clamped to [-kExponentClamp, kExponentClamp].
inline constexpr double kExponentClamp = 700.0;

/// Affinely constrained mixture. The effective weights are
/// w_i = lambda1_i - lambda2_i for i < m and w_m = 1 - sum_i (lambda1_i - lambda2_i).
/// `u` is the total augmented mass for EG states and unused for EGU.
struct AffineMixtureState {
    Eigen::VectorXd lambda1;
    Eigen::VectorXd lambda2;
    double mu = 0.0;
    double u = 1.0;
};

/// Unconstrained mixture with w = w1 - w2.
struct UnconstrainedMixtureState {
    Eigen::VectorXd w1;
    Eigen::VectorXd w2;
    double mu = 0.0;
    double u = 1.0;
};

/// Plain stochastic-gradient combiner. Affine variants hold lambda (m - 1
/// entries), unconstrained variants hold w (m entries).
struct LmsMixtureState {
    Eigen::VectorXd weights;
    double mu = 0.0;
};

/// Result of one combiner step. Prediction and error use the state before the update.
template <class State>
struct MixtureStep {
    double prediction = 0.0;
    double error = 0.0;
    State next_state;
    bool saturated = false;
};

// Initial states: uniform effective weights 1/m.
AffineMixtureState make_affine_egu(Eigen::Index m, double mu);
AffineMixtureState make_affine_eg(Eigen::Index m, double mu, double u);
UnconstrainedMixtureState make_unconstrained_egu(Eigen::Index m, double mu);
UnconstrainedMixtureState make_unconstrained_eg(Eigen::Index m, double mu, double u);
LmsMixtureState make_affine_lms(Eigen::Index m, double mu);
LmsMixtureState make_unconstrained_lms(Eigen::Index m, double mu);

/// Concatenation [first; second] of the positive and negative parts.
Eigen::VectorXd augmented(const AffineMixtureState& s);
Eigen::VectorXd augmented(const UnconstrainedMixtureState& s);

/// Effective combination weights; they sum to one up to rounding.
Eigen::VectorXd affine_effective_weights(const AffineMixtureState& s);
Eigen::VectorXd affine_effective_weights(const LmsMixtureState& s);

struct AffineError {
    Eigen::VectorXd delta;  ///< x_i - x_m, i < m
    double e = 0.0;         ///< (y - x_m) - lambda^T delta
};

AffineError affine_error(const AffineMixtureState& s, const Eigen::VectorXd& x, double y);

MixtureStep<AffineMixtureState> affine_egu_step(const AffineMixtureState& s, const Eigen::VectorXd& x, double y);
MixtureStep<AffineMixtureState> affine_eg_step(const AffineMixtureState& s, const Eigen::VectorXd& x, double y);
MixtureStep<UnconstrainedMixtureState> unconstrained_egu_step(const UnconstrainedMixtureState& s,
                                                              const Eigen::VectorXd& x, double y);
MixtureStep<UnconstrainedMixtureState> unconstrained_eg_step(const UnconstrainedMixtureState& s,
                                                             const Eigen::VectorXd& x, double y);

// First-order variants: exp(z) replaced by 1 + z.
MixtureStep<AffineMixtureState> affine_egu_step_lin(const AffineMixtureState& s, const Eigen::VectorXd& x, double y);
MixtureStep<AffineMixtureState> affine_eg_step_lin(const AffineMixtureState& s, const Eigen::VectorXd& x, double y);
MixtureStep<UnconstrainedMixtureState> unconstrained_egu_step_lin(const UnconstrainedMixtureState& s,
                                                                  const Eigen::VectorXd& x, double y);
MixtureStep<UnconstrainedMixtureState> unconstrained_eg_step_lin(const UnconstrainedMixtureState& s,
                                                                 const Eigen::VectorXd& x, double y);

/// EG update of an augmented vector [first; second] for a given error: entries are
/// multiplied by exp(+-mu e r_i) and the result rescaled to sum to u.
Eigen::VectorXd eg_update(const Eigen::VectorXd& augmented, const Eigen::VectorXd& r, double mu, double e, double u);

/// lambda <- lambda + mu e delta.
MixtureStep<LmsMixtureState> affine_lms_step(const LmsMixtureState& s, const Eigen::VectorXd& x, double y);
/// w <- w + mu e x.
MixtureStep<LmsMixtureState> unconstrained_lms_step(const LmsMixtureState& s, const Eigen::VectorXd& x, double y);

/// Base-space regressor: delta = x_i - x_m (affine) or x itself (unconstrained).
void mixture_regressor(bool affine, const Eigen::VectorXd& x, Eigen::VectorXd& out);
/// Target term: y - x_m (affine) or y (unconstrained).
double mixture_target(bool affine, const Eigen::VectorXd& x, double y);

/// ||exp(z) - (1 + z)||^2 / sqrt(||exp(z)||^2 ||1 + z||^2) for z = mu e r_1, r = delta or x.
double linearization_gap(double z);

/// Per-step outcome reported by Combiner::advance.
struct StepReport {
    double prediction = 0.0;
    double error = 0.0;
    bool saturated = false;
};

/// Type-erased second stage used by the Monte Carlo harness.
class Combiner {
public:
    /// `u` is required for EG algorithms and rejected otherwise.
    Combiner(Algorithm algorithm, Eigen::Index m, double mu, std::optional<double> u = std::nullopt,
             bool linearized = false);

    Algorithm algorithm() const { return algorithm_; }
    Eigen::Index constituents() const { return m_; }
    double mu() const { return mu_; }
    double mass() const { return u_; }
    bool linearized() const { return linearized_; }

    /// Length of the augmented vector, or of the plain weight vector for LMS.
    Eigen::Index augmented_size() const;
    void augmented(Eigen::VectorXd& out) const;
    Eigen::VectorXd augmented() const;

    Eigen::VectorXd effective_weights() const;
    double predict(const Eigen::VectorXd& x) const;

    /// One in-place update. Throws DivergenceError on a non-finite or non-positive weight.
    StepReport advance(const Eigen::VectorXd& x, double y);

    /// linearization_gap at the current state for coordinate 1 (multiplicative algorithms only).
    double linearization_diagnostic(const Eigen::VectorXd& x, double y) const;

    using State = std::variant<AffineMixtureState, UnconstrainedMixtureState, LmsMixtureState>;
    const State& state() const { return state_; }

private:
    Algorithm algorithm_;
    Eigen::Index m_;
    double mu_;
    double u_ = 1.0;
    bool linearized_;
    State state_;
};

/// linearization_gap for coordinate 1 of the given state and sample.
double linearization_diagnostic(const AffineMixtureState& s, const Eigen::VectorXd& x, double y);
double linearization_diagnostic(const UnconstrainedMixtureState& s, const Eigen::VectorXd& x, double y);

}  // namespace bregmix
