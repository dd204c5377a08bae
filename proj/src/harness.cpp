#include "bregmix/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>

#include "bregmix/constituent.hpp"
#include "bregmix/mixture.hpp"
#include "bregmix/rng.hpp"
#include "bregmix/signal_model.hpp"

namespace bregmix {

namespace {

constexpr std::size_t kGroupSize = 8;
constexpr std::size_t kBufferBudget = std::size_t{64} << 20;  // bytes of per-block group buffers
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Normalized squared difference of the first coordinates of two vectors.
double first_coordinate_gap(double a, double b)
{
    const double scale = std::sqrt(a * a * b * b);
    if (!(scale > 0.0)) {
        throw NumericalError("quotient diagnostic: degenerate denominator");
    }
    return (a - b) * (a - b) / scale;
}

double quotient_value(double mass, double quotient_mean, double numerator_mean, double denominator_mean)
{
    if (!(std::abs(denominator_mean) > 0.0)) {
        throw NumericalError("quotient diagnostic: degenerate denominator");
    }
    return first_coordinate_gap(mass * quotient_mean, mass * numerator_mean / denominator_mean);
}

std::size_t upper_size(Eigen::Index n)
{
    return static_cast<std::size_t>(n * (n + 1) / 2);
}

std::size_t upper_index(Eigen::Index n, Eigen::Index i, Eigen::Index j)
{
    if (i > j) {
        std::swap(i, j);
    }
    return static_cast<std::size_t>(i * n - i * (i - 1) / 2 + (j - i));
}

// Offsets of the per-step accumulators inside one flat record.
struct Layout {
    Eigen::Index m = 0;  // constituents
    Eigen::Index k = 0;  // augmented (or plain LMS) weight dimension
    Eigen::Index n = 0;  // base regressor dimension
    bool multiplicative = false;
    bool eg = false;
    bool moments = false;

    std::size_t sq_err = 0, sq_err_c = 0, qa = 0, Qa = 0, w_eff = 0, lin = 0, sat = 0;
    std::size_t quot = 0, quot_num = 0, quot_den = 0;
    std::size_t R = 0, p = 0, d = 0;
    std::size_t stride = 0;

    explicit Layout(const ExperimentConfig& config)
    {
        const Algorithm a = config.mixture.algorithm;
        m = static_cast<Eigen::Index>(config.constituent_count());
        k = static_cast<Eigen::Index>(config.weight_dimension());
        n = is_affine(a) ? m - 1 : m;
        multiplicative = is_multiplicative(a);
        eg = is_eg(a);
        moments = config.theory.enabled;

        std::size_t off = 0;
        auto take = [&](std::size_t count) {
            const std::size_t at = off;
            off += count;
            return at;
        };
        sq_err = take(1);
        sq_err_c = take(static_cast<std::size_t>(m));
        qa = take(static_cast<std::size_t>(k));
        Qa = take(upper_size(k));
        w_eff = take(static_cast<std::size_t>(m));
        lin = take(1);
        sat = take(1);
        if (eg) {
            quot = take(static_cast<std::size_t>(k));
            quot_num = take(static_cast<std::size_t>(k));
            quot_den = take(1);
        }
        if (moments) {
            R = take(upper_size(n));
            p = take(static_cast<std::size_t>(n));
            d = take(1);
        }
        stride = off;
    }
};

struct RunState {
    Ensemble ensemble;
    std::size_t index;
    Rng regressor_rng;
    Rng noise_rng;
    FilterBank bank;
    std::optional<Combiner> combiner;
    bool contributes_moments = false;
    bool diverged = false;
};

// Scratch vectors reused across steps of one run.
struct Scratch {
    Sample sample;
    Eigen::VectorXd x;
    Eigen::VectorXd weights;
    Eigen::VectorXd regressor;
    Eigen::VectorXd augmented_regressor;
};

Combiner make_combiner(const ExperimentConfig& config)
{
    return Combiner(config.mixture.algorithm, static_cast<Eigen::Index>(config.constituent_count()),
                    config.mixture.mu, config.mixture.u, config.mixture.use_linearized);
}

void simulate_step(const Layout& L, const SignalModelConfig& signal, RunState& run, Scratch& s, double* rec)
{
    next_sample(signal, run.regressor_rng, run.noise_rng, s.sample);
    const double y = s.sample.y;
    run.bank.predict(s.sample.a, s.x);

    if (run.combiner) {
        Combiner& c = *run.combiner;
        for (Eigen::Index i = 0; i < L.m; ++i) {
            const double ei = y - s.x[i];
            rec[L.sq_err_c + static_cast<std::size_t>(i)] += ei * ei;
        }
        c.augmented(s.weights);
        for (Eigen::Index i = 0; i < L.k; ++i) {
            rec[L.qa + static_cast<std::size_t>(i)] += s.weights[i];
        }
        double* upper = rec + L.Qa;
        for (Eigen::Index i = 0; i < L.k; ++i) {
            const double wi = s.weights[i];
            for (Eigen::Index j = i; j < L.k; ++j) {
                *upper++ += wi * s.weights[j];
            }
        }
        const Eigen::VectorXd w = c.effective_weights();
        for (Eigen::Index i = 0; i < L.m; ++i) {
            rec[L.w_eff + static_cast<std::size_t>(i)] += w[i];
        }
        if (L.multiplicative) {
            rec[L.lin] += c.linearization_diagnostic(s.x, y);
        }

        const StepReport report = c.advance(s.x, y);
        rec[L.sq_err] += report.error * report.error;
        if (report.saturated) {
            rec[L.sat] += 1.0;
        }

        if (L.eg) {
            mixture_regressor(is_affine(c.algorithm()), s.x, s.regressor);
            const Eigen::Index n = s.regressor.size();
            const double scale = c.mu() * report.error;
            double denominator = 0.0;
            for (Eigen::Index i = 0; i < L.k; ++i) {
                const double ui = i < n ? s.regressor[i] : -s.regressor[i - n];
                const double numerator = s.weights[i] * (1.0 + scale * ui);
                rec[L.quot_num + static_cast<std::size_t>(i)] += numerator;
                denominator += numerator;
            }
            for (Eigen::Index i = 0; i < L.k; ++i) {
                const double ui = i < n ? s.regressor[i] : -s.regressor[i - n];
                rec[L.quot + static_cast<std::size_t>(i)] += s.weights[i] * (1.0 + scale * ui) / denominator;
            }
            rec[L.quot_den] += denominator;
        }
    }

    if (run.contributes_moments) {
        const bool affine = L.n < L.m;
        mixture_regressor(affine, s.x, s.regressor);
        const double target = mixture_target(affine, s.x, y);
        double* upper = rec + L.R;
        for (Eigen::Index i = 0; i < L.n; ++i) {
            const double ri = s.regressor[i];
            for (Eigen::Index j = i; j < L.n; ++j) {
                *upper++ += ri * s.regressor[j];
            }
            rec[L.p + static_cast<std::size_t>(i)] += ri * target;
        }
        rec[L.d] += target * target;
    }

    run.bank.adapt(s.sample.a, y);
}

// Runs fn(task) for task in [0, tasks) on up to `threads` workers and rethrows the first exception.
template <class Fn>
void parallel_for(std::size_t tasks, unsigned threads, Fn&& fn)
{
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), tasks);
    if (workers <= 1) {
        for (std::size_t i = 0; i < tasks; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < tasks; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    const std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

unsigned resolve_threads(unsigned requested)
{
    if (requested != 0) {
        return requested;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

Eigen::MatrixXd unpack_upper(const double* upper, Eigen::Index n, double scale)
{
    Eigen::MatrixXd M(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            M(i, j) = M(j, i) = scale * *upper++;
        }
    }
    return M;
}

// Decimation window state and the per-row output writer.
class Decimator {
public:
    Decimator(const ExperimentConfig& config, const Layout& L, CurveSet& out)
        : L_(L), out_(out), decimation_(config.output.decimation), horizon_(config.horizon)
    {
        const auto rows = static_cast<Eigen::Index>((horizon_ + decimation_ - 1) / decimation_);
        const auto entries = static_cast<Eigen::Index>(config.output.moment_entries.size());
        out_.t.reserve(static_cast<std::size_t>(rows));
        out_.mse_constituent.resize(rows, L.m);
        out_.weights_mean.resize(rows, L.k);
        out_.weights_effective.resize(rows, L.m);
        out_.weights_moment.resize(rows, entries);
        if (out_.has_theory) {
            out_.theory_mean.resize(rows, L.k);
            out_.theory_moment.resize(rows, entries);
        }
        mse_c_ = Eigen::VectorXd::Zero(L.m);
    }

    struct Step {
        double mse = 0.0;
        const Eigen::VectorXd* mse_c = nullptr;
        double lin = kNaN;
        double quot = kNaN;
        double sat = 0.0;
        const Eigen::VectorXd* qa = nullptr;
        const Eigen::VectorXd* w_eff = nullptr;
        const Eigen::VectorXd* entries = nullptr;
        double mse_theory = kNaN;
        double radius = kNaN;
        const Eigen::VectorXd* theory_q = nullptr;
        const Eigen::VectorXd* theory_entries = nullptr;
    };

    void push(std::size_t t, const Step& s)
    {
        mse_ += s.mse;
        mse_c_ += *s.mse_c;
        lin_ += s.lin;
        quot_ += s.quot;
        sat_ += s.sat;
        mse_theory_ += s.mse_theory;
        if (!std::isnan(s.radius)) {
            radius_ = std::isnan(radius_) ? s.radius : std::max(radius_, s.radius);
        }
        ++count_;
        if ((t + 1) % decimation_ != 0 && t + 1 != horizon_) {
            return;
        }
        const auto row = static_cast<Eigen::Index>(out_.t.size());
        const double inv = 1.0 / static_cast<double>(count_);
        out_.t.push_back(t);
        out_.mse_mixture.push_back(mse_ * inv);
        out_.mse_constituent.row(row) = (mse_c_ * inv).transpose();
        out_.weights_mean.row(row) = s.qa->transpose();
        out_.weights_effective.row(row) = s.w_eff->transpose();
        out_.weights_moment.row(row) = s.entries->transpose();
        out_.linearization_diff.push_back(lin_ * inv);
        out_.quotient_diff.push_back(quot_ * inv);
        out_.saturation_count.push_back(static_cast<std::size_t>(sat_));
        if (out_.has_theory) {
            out_.mse_theory.push_back(mse_theory_ * inv);
            out_.convergence_radius.push_back(radius_);
            out_.theory_mean.row(row) = s.theory_q->transpose();
            out_.theory_moment.row(row) = s.theory_entries->transpose();
        }
        mse_ = lin_ = quot_ = sat_ = mse_theory_ = 0.0;
        radius_ = kNaN;
        mse_c_.setZero();
        count_ = 0;
    }

private:
    const Layout& L_;
    CurveSet& out_;
    std::size_t decimation_;
    std::size_t horizon_;
    double mse_ = 0.0, lin_ = 0.0, quot_ = 0.0, sat_ = 0.0, mse_theory_ = 0.0, radius_ = kNaN;
    Eigen::VectorXd mse_c_;
    std::size_t count_ = 0;
};

struct PassResult {
    CurveSet curves;
    std::vector<std::size_t> diverged;  // indices into the run list
    std::size_t diverged_main = 0;
};

PassResult simulate(const ResolvedExperiment& resolved, const std::vector<bool>& excluded, unsigned threads)
{
    const ExperimentConfig& config = resolved.config;
    const Layout L(config);
    const std::size_t calibration = config.theory.enabled ? config.theory.moment_runs : 0;
    const bool separate_moments = calibration > 0;

    std::vector<RunState> runs;
    runs.reserve(config.runs + calibration);
    auto add_run = [&](Ensemble ensemble, std::size_t index, bool main) {
        RunState run{ensemble,
                     index,
                     Rng(stream_seed(config.seed, ensemble, index, StreamRole::Regressor)),
                     Rng(stream_seed(config.seed, ensemble, index, StreamRole::Noise)),
                     FilterBank(resolved.signal.filter_order(), resolved.constituent_mu),
                     std::nullopt};
        if (main) {
            run.combiner = make_combiner(config);
        }
        run.contributes_moments = config.theory.enabled && (main != separate_moments);
        run.diverged = excluded[runs.size()];
        runs.push_back(std::move(run));
    };
    for (std::size_t r = 0; r < config.runs; ++r) {
        add_run(Ensemble::Main, r, true);
    }
    for (std::size_t r = 0; r < calibration; ++r) {
        add_run(Ensemble::Calibration, r, false);
    }

    std::size_t main_count = 0;
    std::size_t moment_count = 0;
    for (const auto& run : runs) {
        if (!run.diverged) {
            main_count += run.combiner ? 1 : 0;
            moment_count += run.contributes_moments ? 1 : 0;
        }
    }
    if (main_count == 0 || (config.theory.enabled && moment_count == 0)) {
        throw ExperimentDiverged(config.runs, config.runs);
    }

    PassResult result;
    CurveSet& out = result.curves;
    out.has_theory = config.theory.enabled;
    out.moment_entries = config.output.moment_entries;
    out.constituent_mu = resolved.constituent_mu;
    out.tau = resolved.signal.tau();
    out.min_weight_variance = std::numeric_limits<double>::infinity();
    out.min_theory_variance = out.has_theory ? std::numeric_limits<double>::infinity() : 0.0;

    const std::size_t groups = (runs.size() + kGroupSize - 1) / kGroupSize;
    const std::size_t per_step = groups * L.stride * sizeof(double);
    const std::size_t block = std::clamp<std::size_t>(kBufferBudget / std::max<std::size_t>(per_step, 1), 1, 4096);

    std::optional<TransientRecursion> theory;
    if (config.theory.enabled) {
        theory.emplace(config.mixture.mu, config.mixture.u, initial_weights(config));
    }
    Decimator decimator(config, L, out);

    const double inv_main = 1.0 / static_cast<double>(main_count);
    const double inv_moment = moment_count > 0 ? 1.0 / static_cast<double>(moment_count) : 0.0;
    const double mass = config.mixture.u.value_or(1.0);

    std::vector<double> buffers;
    std::vector<double> total(L.stride);
    std::vector<std::uint8_t> diverged_now(runs.size(), 0);
    Eigen::VectorXd mse_c(L.m), qa(L.k), w_eff(L.m), entries(out.moment_entries.size()), gamma, p_base;
    Eigen::VectorXd theory_entries(out.moment_entries.size());
    Eigen::MatrixXd Gamma;

    for (std::size_t start = 0; start < config.horizon; start += block) {
        const std::size_t len = std::min(block, config.horizon - start);
        buffers.assign(groups * len * L.stride, 0.0);
        parallel_for(groups, threads, [&](std::size_t g) {
            Scratch scratch;
            double* base = buffers.data() + g * len * L.stride;
            const std::size_t end = std::min(runs.size(), (g + 1) * kGroupSize);
            for (std::size_t r = g * kGroupSize; r < end; ++r) {
                RunState& run = runs[r];
                if (run.diverged) {
                    continue;
                }
                try {
                    for (std::size_t i = 0; i < len; ++i) {
                        simulate_step(L, resolved.signal, run, scratch, base + i * L.stride);
                    }
                } catch (const DivergenceError&) {
                    run.diverged = true;
                    diverged_now[r] = 1;
                }
            }
        });

        std::size_t diverged_main = 0;
        for (std::size_t r = 0; r < runs.size(); ++r) {
            diverged_main += (diverged_now[r] && runs[r].combiner) ? 1 : 0;
        }
        if (diverged_main * 10 > config.runs) {
            throw ExperimentDiverged(diverged_main, config.runs);
        }

        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t t = start + i;
            std::fill(total.begin(), total.end(), 0.0);
            for (std::size_t g = 0; g < groups; ++g) {
                const double* rec = buffers.data() + (g * len + i) * L.stride;
                for (std::size_t j = 0; j < L.stride; ++j) {
                    total[j] += rec[j];
                }
            }

            Decimator::Step step;
            step.mse = total[L.sq_err] * inv_main;
            for (Eigen::Index c = 0; c < L.m; ++c) {
                mse_c[c] = total[L.sq_err_c + static_cast<std::size_t>(c)] * inv_main;
                w_eff[c] = total[L.w_eff + static_cast<std::size_t>(c)] * inv_main;
            }
            for (Eigen::Index c = 0; c < L.k; ++c) {
                qa[c] = total[L.qa + static_cast<std::size_t>(c)] * inv_main;
                const double second = total[L.Qa + upper_index(L.k, c, c)] * inv_main;
                out.min_weight_variance = std::min(out.min_weight_variance, second - qa[c] * qa[c]);
            }
            for (std::size_t e = 0; e < out.moment_entries.size(); ++e) {
                const auto [ei, ej] = out.moment_entries[e];
                entries[static_cast<Eigen::Index>(e)] = total[L.Qa + upper_index(L.k, ei - 1, ej - 1)] * inv_main;
            }
            step.mse_c = &mse_c;
            step.qa = &qa;
            step.w_eff = &w_eff;
            step.entries = &entries;
            step.sat = total[L.sat];
            if (L.multiplicative) {
                step.lin = total[L.lin] * inv_main;
            }
            if (L.eg) {
                step.quot = quotient_value(mass, total[L.quot] * inv_main, total[L.quot_num] * inv_main,
                                           total[L.quot_den] * inv_main);
            }

            if (theory) {
                const Eigen::MatrixXd R = unpack_upper(total.data() + L.R, L.n, inv_moment);
                p_base = Eigen::Map<const Eigen::VectorXd>(total.data() + L.p, L.n) * inv_moment;
                const double d = total[L.d] * inv_moment;
                augment_moments(R, p_base, Gamma, gamma);

                const Eigen::VectorXd& tq = theory->mean();
                const Eigen::MatrixXd& tQ = theory->second_moment();
                for (std::size_t e = 0; e < out.moment_entries.size(); ++e) {
                    const auto [ei, ej] = out.moment_entries[e];
                    theory_entries[static_cast<Eigen::Index>(e)] = tQ(ei - 1, ej - 1);
                }
                out.min_theory_variance =
                    std::min(out.min_theory_variance, (tQ.diagonal() - tq.cwiseProduct(tq)).minCoeff());
                step.mse_theory = mse_evolution(tq, tQ, gamma, Gamma, d);
                step.radius = convergence_condition(qa, R, config.mixture.mu);
                step.theory_q = &tq;
                step.theory_entries = &theory_entries;
                if (t + 1 == config.horizon) {
                    out.final_R = R;
                    out.final_p = p_base;
                }
                decimator.push(t, step);
                theory->advance(gamma, Gamma);
            } else {
                decimator.push(t, step);
            }
        }
    }

    for (std::size_t r = 0; r < runs.size(); ++r) {
        if (diverged_now[r]) {
            result.diverged.push_back(r);
            result.diverged_main += runs[r].combiner ? 1 : 0;
        }
    }
    out.runs_used = main_count;
    return result;
}

}  // namespace

ExperimentDiverged::ExperimentDiverged(std::size_t diverged, std::size_t runs)
    : Error("divergence detected in " + std::to_string(diverged) + " of " + std::to_string(runs) + " runs"),
      diverged_(diverged)
{
}

CurveSet run_ensemble(const ExperimentConfig& config, const RunOptions& options)
{
    const ResolvedExperiment resolved = resolve(config);
    const unsigned threads = resolve_threads(options.threads);
    const std::size_t total_runs = config.runs + (config.theory.enabled ? config.theory.moment_runs : 0);
    std::vector<bool> excluded(total_runs, false);

    PassResult pass = simulate(resolved, excluded, threads);
    if (pass.diverged.empty()) {
        return std::move(pass.curves);
    }
    // Diverged runs contaminated the first pass; rerun without them.
    for (std::size_t r : pass.diverged) {
        excluded[r] = true;
    }
    PassResult clean = simulate(resolved, excluded, threads);
    clean.curves.diverged_runs = pass.diverged_main;
    return std::move(clean.curves);
}

QuotientAccumulator::QuotientAccumulator(double mu, double mass, Eigen::Index dimension)
    : mu_(mu), mass_(mass), quotient_sum_(Eigen::VectorXd::Zero(dimension)),
      numerator_sum_(Eigen::VectorXd::Zero(dimension))
{
}

void QuotientAccumulator::add(const Eigen::VectorXd& weights, const Eigen::VectorXd& regressor, double error)
{
    const Eigen::VectorXd numerator = weights.array() * (1.0 + mu_ * error * regressor.array());
    const double denominator = weights.sum() + mu_ * error * regressor.dot(weights);
    quotient_sum_ += numerator / denominator;
    numerator_sum_ += numerator;
    denominator_sum_ += denominator;
    ++count_;
}

void QuotientAccumulator::merge(const QuotientAccumulator& other)
{
    quotient_sum_ += other.quotient_sum_;
    numerator_sum_ += other.numerator_sum_;
    denominator_sum_ += other.denominator_sum_;
    count_ += other.count_;
}

double QuotientAccumulator::value() const
{
    if (count_ == 0) {
        throw NumericalError("quotient diagnostic: empty ensemble");
    }
    const double inv = 1.0 / static_cast<double>(count_);
    return quotient_value(mass_, quotient_sum_[0] * inv, numerator_sum_[0] * inv, denominator_sum_ * inv);
}

double quotient_diagnostic(std::span<const EnsembleMember> members, double mu, double mass)
{
    if (members.empty()) {
        throw NumericalError("quotient diagnostic: empty ensemble");
    }
    QuotientAccumulator acc(mu, mass, members.front().weights.size());
    for (const auto& member : members) {
        acc.add(member.weights, member.regressor, member.error);
    }
    return acc.value();
}

Eigen::VectorXd initial_weights(const ExperimentConfig& config)
{
    return make_combiner(config).augmented();
}

TheoryCurves run_theory(const ExperimentConfig& config, const MomentEstimates& moments)
{
    if (!is_multiplicative(config.mixture.algorithm)) {
        throw ConfigError("theory.enabled: transient recursions exist for EGU/EG combiners only");
    }
    if (moments.horizon() < config.horizon) {
        throw ConfigError("run_theory: moment estimates cover " + std::to_string(moments.horizon())
                          + " steps, horizon is " + std::to_string(config.horizon));
    }
    TransientRecursion recursion(config.mixture.mu, config.mixture.u, initial_weights(config));
    TheoryCurves out;
    out.q.reserve(config.horizon);
    out.Q.reserve(config.horizon);
    out.mse.reserve(config.horizon);
    for (std::size_t t = 0; t < config.horizon; ++t) {
        out.q.push_back(recursion.mean());
        out.Q.push_back(recursion.second_moment());
        out.mse.push_back(
            mse_evolution(recursion.mean(), recursion.second_moment(), moments.gamma[t], moments.Gamma[t], moments.d[t]));
        recursion.advance(moments.gamma[t], moments.Gamma[t]);
    }
    return out;
}

}  // namespace bregmix
