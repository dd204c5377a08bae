#include "bregmix/mixture.hpp"

#include <array>
#include <cmath>
#include <string>

#include "bregmix/error.hpp"

namespace bregmix {

namespace {

constexpr std::array<std::pair<Algorithm, std::string_view>, 6> kAlgorithmNames{{
    {Algorithm::AffineEgu, "affine_egu"},
    {Algorithm::AffineEg, "affine_eg"},
    {Algorithm::AffineLms, "affine_lms"},
    {Algorithm::UnconstrainedEgu, "unconstrained_egu"},
    {Algorithm::UnconstrainedEg, "unconstrained_eg"},
    {Algorithm::UnconstrainedLms, "unconstrained_lms"},
}};

void require_constituents(Eigen::Index m)
{
    if (m < 2) {
        throw ConfigError("mixture: needs at least two constituents, got " + std::to_string(m));
    }
}

void require_step(double mu)
{
    if (!(mu >= 0.0) || !std::isfinite(mu)) {
        throw ConfigError("mixture.mu: must be finite and >= 0");
    }
}

void require_mass(double u)
{
    if (!(u >= 1.0) || !std::isfinite(u)) {
        throw ConfigError("mixture.u: u must be >= 1");
    }
}

void require_length(const Eigen::VectorXd& x, Eigen::Index m)
{
    if (x.size() != m) {
        throw ConfigError("mixture input has " + std::to_string(x.size()) + " entries, expected "
                          + std::to_string(m));
    }
}

double clamp_exponent(double z, bool& saturated)
{
    if (z > kExponentClamp) {
        saturated = true;
        return kExponentClamp;
    }
    if (z < -kExponentClamp) {
        saturated = true;
        return -kExponentClamp;
    }
    return z;
}

// Multiplies first_i by g(+mu e r_i) and second_i by g(-mu e r_i), g = exp or 1 + z.
// With `mass` set the augmented vector is rescaled to sum to *mass.
bool multiplicative_update(Eigen::VectorXd& first, Eigen::VectorXd& second, const Eigen::VectorXd& r, double mu,
                           double e, std::optional<double> mass, bool linearized)
{
    bool saturated = false;
    const Eigen::Index n = first.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = mu * e * r[i];
        if (linearized) {
            first[i] *= 1.0 + z;
            second[i] *= 1.0 - z;
        } else {
            const double zc = clamp_exponent(z, saturated);
            first[i] *= std::exp(zc);
            second[i] *= std::exp(-zc);
        }
    }
    if (mass) {
        const double denominator = first.sum() + second.sum();
        const double scale = *mass / denominator;
        first *= scale;
        second *= scale;
    }
    const bool positive = (first.array() > 0.0).all() && (second.array() > 0.0).all();
    if (!first.allFinite() || !second.allFinite() || !positive) {
        throw DivergenceError("mixture weights left the positive orthant");
    }
    return saturated;
}

void delta_of(const Eigen::VectorXd& x, Eigen::VectorXd& delta)
{
    const Eigen::Index m = x.size();
    delta = x.head(m - 1).array() - x[m - 1];
}

StepReport advance_affine(AffineMixtureState& s, const Eigen::VectorXd& x, double y, bool eg, bool linearized)
{
    require_length(x, s.lambda1.size() + 1);
    Eigen::VectorXd delta;
    delta_of(x, delta);
    const double xm = x[x.size() - 1];
    StepReport r;
    r.prediction = xm + (s.lambda1 - s.lambda2).dot(delta);
    r.error = y - r.prediction;
    r.saturated = multiplicative_update(s.lambda1, s.lambda2, delta, s.mu, r.error,
                                        eg ? std::optional<double>(s.u) : std::nullopt, linearized);
    return r;
}

StepReport advance_unconstrained(UnconstrainedMixtureState& s, const Eigen::VectorXd& x, double y, bool eg,
                                 bool linearized)
{
    require_length(x, s.w1.size());
    StepReport r;
    r.prediction = (s.w1 - s.w2).dot(x);
    r.error = y - r.prediction;
    r.saturated = multiplicative_update(s.w1, s.w2, x, s.mu, r.error,
                                        eg ? std::optional<double>(s.u) : std::nullopt, linearized);
    return r;
}

StepReport advance_lms(LmsMixtureState& s, const Eigen::VectorXd& x, double y, bool affine)
{
    StepReport r;
    if (affine) {
        require_length(x, s.weights.size() + 1);
        Eigen::VectorXd delta;
        delta_of(x, delta);
        const double xm = x[x.size() - 1];
        r.prediction = xm + s.weights.dot(delta);
        r.error = y - r.prediction;
        s.weights += (s.mu * r.error) * delta;
    } else {
        require_length(x, s.weights.size());
        r.prediction = s.weights.dot(x);
        r.error = y - r.prediction;
        s.weights += (s.mu * r.error) * x;
    }
    if (!s.weights.allFinite()) {
        throw DivergenceError("LMS mixture weights");
    }
    return r;
}

template <class State, class Advance>
MixtureStep<State> pure_step(const State& s, Advance&& advance)
{
    MixtureStep<State> out;
    out.next_state = s;
    const StepReport r = advance(out.next_state);
    out.prediction = r.prediction;
    out.error = r.error;
    out.saturated = r.saturated;
    return out;
}

}  // namespace

std::string_view to_string(Algorithm algorithm)
{
    for (const auto& [a, name] : kAlgorithmNames) {
        if (a == algorithm) {
            return name;
        }
    }
    return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view name)
{
    for (const auto& [a, n] : kAlgorithmNames) {
        if (n == name) {
            return a;
        }
    }
    return std::nullopt;
}

bool is_affine(Algorithm algorithm)
{
    return algorithm == Algorithm::AffineEgu || algorithm == Algorithm::AffineEg || algorithm == Algorithm::AffineLms;
}

bool is_eg(Algorithm algorithm)
{
    return algorithm == Algorithm::AffineEg || algorithm == Algorithm::UnconstrainedEg;
}

bool is_lms(Algorithm algorithm)
{
    return algorithm == Algorithm::AffineLms || algorithm == Algorithm::UnconstrainedLms;
}

AffineMixtureState make_affine_egu(Eigen::Index m, double mu)
{
    require_constituents(m);
    require_step(mu);
    const double beta = 1.0 / (2.0 * static_cast<double>(m));
    AffineMixtureState s;
    s.lambda1 = Eigen::VectorXd::Constant(m - 1, 1.0 / static_cast<double>(m) + beta);
    s.lambda2 = Eigen::VectorXd::Constant(m - 1, beta);
    s.mu = mu;
    return s;
}

AffineMixtureState make_affine_eg(Eigen::Index m, double mu, double u)
{
    require_constituents(m);
    require_step(mu);
    require_mass(u);
    const double share = u / (2.0 * static_cast<double>(m - 1));
    const double half_weight = 1.0 / (2.0 * static_cast<double>(m));
    AffineMixtureState s;
    s.lambda1 = Eigen::VectorXd::Constant(m - 1, share + half_weight);
    s.lambda2 = Eigen::VectorXd::Constant(m - 1, share - half_weight);
    s.mu = mu;
    s.u = u;
    return s;
}

UnconstrainedMixtureState make_unconstrained_egu(Eigen::Index m, double mu)
{
    require_constituents(m);
    require_step(mu);
    const double beta = 1.0 / (2.0 * static_cast<double>(m));
    UnconstrainedMixtureState s;
    s.w1 = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m) + beta);
    s.w2 = Eigen::VectorXd::Constant(m, beta);
    s.mu = mu;
    return s;
}

UnconstrainedMixtureState make_unconstrained_eg(Eigen::Index m, double mu, double u)
{
    require_constituents(m);
    require_step(mu);
    require_mass(u);
    const double md = static_cast<double>(m);
    UnconstrainedMixtureState s;
    s.w1 = Eigen::VectorXd::Constant(m, (u + 1.0) / (2.0 * md));
    s.w2 = Eigen::VectorXd::Constant(m, (u - 1.0) / (2.0 * md));
    s.mu = mu;
    s.u = u;
    if (u - 1.0 < 1e-6) {
        s.w2 = s.w2.cwiseMax(1e-6);
        const double scale = u / (s.w1.sum() + s.w2.sum());
        s.w1 *= scale;
        s.w2 *= scale;
    }
    return s;
}

LmsMixtureState make_affine_lms(Eigen::Index m, double mu)
{
    require_constituents(m);
    require_step(mu);
    return {Eigen::VectorXd::Constant(m - 1, 1.0 / static_cast<double>(m)), mu};
}

LmsMixtureState make_unconstrained_lms(Eigen::Index m, double mu)
{
    require_constituents(m);
    require_step(mu);
    return {Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m)), mu};
}

Eigen::VectorXd augmented(const AffineMixtureState& s)
{
    Eigen::VectorXd out(s.lambda1.size() + s.lambda2.size());
    out << s.lambda1, s.lambda2;
    return out;
}

Eigen::VectorXd augmented(const UnconstrainedMixtureState& s)
{
    Eigen::VectorXd out(s.w1.size() + s.w2.size());
    out << s.w1, s.w2;
    return out;
}

Eigen::VectorXd affine_effective_weights(const AffineMixtureState& s)
{
    return affine_effective_weights(LmsMixtureState{s.lambda1 - s.lambda2, s.mu});
}

Eigen::VectorXd affine_effective_weights(const LmsMixtureState& s)
{
    const Eigen::Index free = s.weights.size();
    Eigen::VectorXd w(free + 1);
    w.head(free) = s.weights;
    w[free] = 1.0 - s.weights.sum();
    return w;
}

AffineError affine_error(const AffineMixtureState& s, const Eigen::VectorXd& x, double y)
{
    require_length(x, s.lambda1.size() + 1);
    AffineError out;
    delta_of(x, out.delta);
    out.e = (y - x[x.size() - 1]) - (s.lambda1 - s.lambda2).dot(out.delta);
    return out;
}

MixtureStep<AffineMixtureState> affine_egu_step(const AffineMixtureState& s, const Eigen::VectorXd& x, double y)
{
    return pure_step(s, [&](AffineMixtureState& n) { return advance_affine(n, x, y, false, false); });
}

MixtureStep<AffineMixtureState> affine_eg_step(const AffineMixtureState& s, const Eigen::VectorXd& x, double y)
{
    return pure_step(s, [&](AffineMixtureState& n) { return advance_affine(n, x, y, true, false); });
}

MixtureStep<AffineMixtureState> affine_egu_step_lin(const AffineMixtureState& s, const Eigen::VectorXd& x, double y)
{
    return pure_step(s, [&](AffineMixtureState& n) { return advance_affine(n, x, y, false, true); });
}

MixtureStep<AffineMixtureState> affine_eg_step_lin(const AffineMixtureState& s, const Eigen::VectorXd& x, double y)
{
    return pure_step(s, [&](AffineMixtureState& n) { return advance_affine(n, x, y, true, true); });
}

MixtureStep<UnconstrainedMixtureState> unconstrained_egu_step(const UnconstrainedMixtureState& s,
                                                              const Eigen::VectorXd& x, double y)
{
    return pure_step(s, [&](UnconstrainedMixtureState& n) { return advance_unconstrained(n, x, y, false, false); });
}

MixtureStep<UnconstrainedMixtureState> unconstrained_eg_step(const UnconstrainedMixtureState& s,
                                                             const Eigen::VectorXd& x, double y)
{
    return pure_step(s, [&](UnconstrainedMixtureState& n) { return advance_unconstrained(n, x, y, true, false); });
}

MixtureStep<UnconstrainedMixtureState> unconstrained_egu_step_lin(const UnconstrainedMixtureState& s,
                                                                  const Eigen::VectorXd& x, double y)
{
    return pure_step(s, [&](UnconstrainedMixtureState& n) { return advance_unconstrained(n, x, y, false, true); });
}

MixtureStep<UnconstrainedMixtureState> unconstrained_eg_step_lin(const UnconstrainedMixtureState& s,
                                                                 const Eigen::VectorXd& x, double y)
{
    return pure_step(s, [&](UnconstrainedMixtureState& n) { return advance_unconstrained(n, x, y, true, true); });
}

MixtureStep<LmsMixtureState> affine_lms_step(const LmsMixtureState& s, const Eigen::VectorXd& x, double y)
{
    return pure_step(s, [&](LmsMixtureState& n) { return advance_lms(n, x, y, true); });
}

MixtureStep<LmsMixtureState> unconstrained_lms_step(const LmsMixtureState& s, const Eigen::VectorXd& x, double y)
{
    return pure_step(s, [&](LmsMixtureState& n) { return advance_lms(n, x, y, false); });
}

void mixture_regressor(bool affine, const Eigen::VectorXd& x, Eigen::VectorXd& out)
{
    if (affine) {
        delta_of(x, out);
    } else {
        out = x;
    }
}

double mixture_target(bool affine, const Eigen::VectorXd& x, double y)
{
    return affine ? y - x[x.size() - 1] : y;
}

Eigen::VectorXd eg_update(const Eigen::VectorXd& augmented, const Eigen::VectorXd& r, double mu, double e, double u)
{
    const Eigen::Index n = r.size();
    if (augmented.size() != 2 * n) {
        throw ConfigError("eg_update: augmented vector must have twice the regressor length");
    }
    Eigen::VectorXd first = augmented.head(n);
    Eigen::VectorXd second = augmented.tail(n);
    multiplicative_update(first, second, r, mu, e, u, false);
    Eigen::VectorXd out(2 * n);
    out << first, second;
    return out;
}

double linearization_gap(double z)
{
    // exp(z) - (1 + z) evaluated without cancellation.
    const double diff = std::expm1(z) - z;
    const double exact = std::exp(z);
    const double first_order = 1.0 + z;
    return diff * diff / std::sqrt(exact * exact * first_order * first_order);
}

double linearization_diagnostic(const AffineMixtureState& s, const Eigen::VectorXd& x, double y)
{
    const AffineError err = affine_error(s, x, y);
    return linearization_gap(s.mu * err.e * err.delta[0]);
}

double linearization_diagnostic(const UnconstrainedMixtureState& s, const Eigen::VectorXd& x, double y)
{
    require_length(x, s.w1.size());
    const double e = y - (s.w1 - s.w2).dot(x);
    return linearization_gap(s.mu * e * x[0]);
}

Combiner::Combiner(Algorithm algorithm, Eigen::Index m, double mu, std::optional<double> u, bool linearized)
    : algorithm_(algorithm), m_(m), mu_(mu), linearized_(linearized)
{
    if (is_eg(algorithm) != u.has_value()) {
        throw ConfigError(is_eg(algorithm) ? "mixture.u: required for " + std::string(to_string(algorithm))
                                           : "mixture.u: only valid for EG algorithms");
    }
    if (u) {
        u_ = *u;
    }
    switch (algorithm) {
    case Algorithm::AffineEgu: state_ = make_affine_egu(m, mu); break;
    case Algorithm::AffineEg: state_ = make_affine_eg(m, mu, u_); break;
    case Algorithm::AffineLms: state_ = make_affine_lms(m, mu); break;
    case Algorithm::UnconstrainedEgu: state_ = make_unconstrained_egu(m, mu); break;
    case Algorithm::UnconstrainedEg: state_ = make_unconstrained_eg(m, mu, u_); break;
    case Algorithm::UnconstrainedLms: state_ = make_unconstrained_lms(m, mu); break;
    }
}

Eigen::Index Combiner::augmented_size() const
{
    switch (algorithm_) {
    case Algorithm::AffineEgu:
    case Algorithm::AffineEg: return 2 * (m_ - 1);
    case Algorithm::AffineLms: return m_ - 1;
    case Algorithm::UnconstrainedEgu:
    case Algorithm::UnconstrainedEg: return 2 * m_;
    case Algorithm::UnconstrainedLms: return m_;
    }
    return 0;
}

void Combiner::augmented(Eigen::VectorXd& out) const
{
    out.resize(augmented_size());
    if (const auto* a = std::get_if<AffineMixtureState>(&state_)) {
        out << a->lambda1, a->lambda2;
    } else if (const auto* u = std::get_if<UnconstrainedMixtureState>(&state_)) {
        out << u->w1, u->w2;
    } else {
        out = std::get<LmsMixtureState>(state_).weights;
    }
}

Eigen::VectorXd Combiner::augmented() const
{
    Eigen::VectorXd out;
    augmented(out);
    return out;
}

Eigen::VectorXd Combiner::effective_weights() const
{
    if (const auto* a = std::get_if<AffineMixtureState>(&state_)) {
        return affine_effective_weights(*a);
    }
    if (const auto* u = std::get_if<UnconstrainedMixtureState>(&state_)) {
        return u->w1 - u->w2;
    }
    const auto& l = std::get<LmsMixtureState>(state_);
    return is_affine(algorithm_) ? affine_effective_weights(l) : l.weights;
}

double Combiner::predict(const Eigen::VectorXd& x) const
{
    require_length(x, m_);
    if (is_affine(algorithm_)) {
        Eigen::VectorXd delta;
        delta_of(x, delta);
        Eigen::VectorXd lambda;
        if (const auto* a = std::get_if<AffineMixtureState>(&state_)) {
            lambda = a->lambda1 - a->lambda2;
        } else {
            lambda = std::get<LmsMixtureState>(state_).weights;
        }
        return x[m_ - 1] + lambda.dot(delta);
    }
    return effective_weights().dot(x);
}

StepReport Combiner::advance(const Eigen::VectorXd& x, double y)
{
    switch (algorithm_) {
    case Algorithm::AffineEgu:
    case Algorithm::AffineEg:
        return advance_affine(std::get<AffineMixtureState>(state_), x, y, is_eg(algorithm_), linearized_);
    case Algorithm::UnconstrainedEgu:
    case Algorithm::UnconstrainedEg:
        return advance_unconstrained(std::get<UnconstrainedMixtureState>(state_), x, y, is_eg(algorithm_),
                                     linearized_);
    case Algorithm::AffineLms:
    case Algorithm::UnconstrainedLms:
        return advance_lms(std::get<LmsMixtureState>(state_), x, y, is_affine(algorithm_));
    }
    return {};
}

double Combiner::linearization_diagnostic(const Eigen::VectorXd& x, double y) const
{
    if (const auto* a = std::get_if<AffineMixtureState>(&state_)) {
        return bregmix::linearization_diagnostic(*a, x, y);
    }
    if (const auto* u = std::get_if<UnconstrainedMixtureState>(&state_)) {
        return bregmix::linearization_diagnostic(*u, x, y);
    }
    throw ConfigError("linearization diagnostic is defined for EGU/EG combiners only");
}

}  // namespace bregmix
