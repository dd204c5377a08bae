// Acceptance suite: prints one PASS/FAIL line per criterion and exits non-zero on any failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "bregmix/config.hpp"
#include "bregmix/constituent.hpp"
#include "bregmix/harness.hpp"
#include "bregmix/mixture.hpp"
#include "bregmix/output.hpp"
#include "bregmix/signal_model.hpp"
#include "bregmix/summary.hpp"
#include "bregmix/transient.hpp"
#include "oracles.hpp"

using namespace bregmix;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& title, const std::string& detail)
{
    std::printf("%s  [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += pass ? 0 : 1;
}

std::string fmt(const char* format, auto... args)
{
    char buffer[512];
    std::snprintf(buffer, sizeof buffer, format, args...);
    return buffer;
}

ExperimentConfig load(const std::string& name)
{
    ExperimentConfig c = load_config(fs::path(BREGMIX_CONFIG_DIR) / (name + ".json"));
    c.output.decimation = 1;
    return c;
}

// Runs are cached by name so several criteria can share one ensemble.
const CurveSet& curves(const std::string& name, const std::function<void(ExperimentConfig&)>& tweak = {},
                       const std::string& variant = "")
{
    static std::map<std::string, CurveSet> cache;
    const std::string key = name + "/" + variant;
    auto it = cache.find(key);
    if (it == cache.end()) {
        ExperimentConfig c = load(name);
        if (tweak) {
            tweak(c);
        }
        it = cache.emplace(key, run_ensemble(c)).first;
    }
    return it->second;
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index j)
{
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out[static_cast<std::size_t>(r)] = m(r, j);
    }
    return out;
}

std::size_t iterations(const CurveSet& c)
{
    return iterations_to_90(c.t, column(c.weights_effective, 0)).value_or(SIZE_MAX);
}

double mean(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

void criterion_1()
{
    const CurveSet& c = curves("exp1_affine_eg");
    const double w1 = final_window_mean(column(c.weights_effective, 0));
    report(1, w1 >= 0.45 && w1 <= 0.55, "sparse-mixture convergence (affine EG, u=500)",
           fmt("final-window E[lambda^(1)] = %.4f, required [0.45, 0.55]", w1));
}

void criterion_2()
{
    const std::size_t eg = iterations(curves("exp1_affine_eg"));
    const std::size_t lms = iterations(curves("exp1_affine_lms"));
    report(2, eg < lms, "EG beats LMS on the sparse mixture",
           fmt("iterations to 90%% of final E[lambda^(1)]: EG %zu, LMS %zu", eg, lms));
}

void criterion_3()
{
    bool pass = true;
    std::string detail;
    for (const char* tag : {"exp4a", "exp4b"}) {
        const CurveSet& egu = curves(std::string(tag) + "_affine_egu");
        const CurveSet& lms = curves(std::string(tag) + "_affine_lms");
        const double mse_egu = final_window_mean(egu.mse_mixture);
        const double mse_lms = final_window_mean(lms.mse_mixture);
        const double mse_rel = std::abs(mse_egu - mse_lms) / mse_lms;
        const double it_egu = static_cast<double>(iterations(egu));
        const double it_lms = static_cast<double>(iterations(lms));
        const double it_rel = std::abs(it_egu - it_lms) / it_lms;
        pass = pass && mse_rel <= 0.05 && it_rel <= 0.25;
        detail += fmt("%s MSE rel diff %.3f (<= 0.05), iterations EGU %.0f vs LMS %.0f rel diff %.3f (<= 0.25); ",
                      tag, mse_rel, it_egu, it_lms, it_rel);
    }
    detail.resize(detail.size() - 2);
    report(3, pass, "EGU and LMS perform alike", detail);
}

void theory_criterion(int id, const std::string& name, const std::string& title)
{
    const CurveSet& c = curves(name);
    double worst_mean = 0.0, worst_moment = 0.0;
    for (Eigen::Index j = 0; j < c.weights_mean.cols(); ++j) {
        worst_mean = std::max(worst_mean, relative_rms(column(c.theory_mean, j), column(c.weights_mean, j)));
    }
    std::string entries;
    for (Eigen::Index j = 0; j < c.weights_moment.cols(); ++j) {
        worst_moment = std::max(worst_moment, relative_rms(column(c.theory_moment, j), column(c.weights_moment, j)));
        const auto [a, b] = c.moment_entries[static_cast<std::size_t>(j)];
        entries += fmt("%s(%d,%d)", j ? "," : "", a, b);
    }
    report(id, worst_mean <= 0.10 && worst_moment <= 0.15, title,
           fmt("max relative RMS: mean weights %.4f (<= 0.10), second moments %s %.4f (<= 0.15)", worst_mean,
               entries.c_str(), worst_moment));
}

void criterion_6()
{
    bool bounded = true, scaling = true;
    std::string detail;
    for (const char* name : {"exp1_affine_eg", "exp2_unconstrained_egu", "exp2_unconstrained_eg"}) {
        const CurveSet& full = curves(name);
        const CurveSet& half = curves(name, [](ExperimentConfig& c) { c.mixture.mu /= 2.0; }, "half_mu");
        const double peak = *std::max_element(full.linearization_diff.begin(), full.linearization_diff.end());
        const double ratio = mean(full.linearization_diff) / mean(half.linearization_diff);
        bounded = bounded && peak <= 1e-3;
        scaling = scaling && ratio >= 3.0 && ratio <= 5.0;
        detail += fmt("%s max %.2e, mu/2 ratio %.2f; ", name, peak, ratio);
    }
    detail += fmt("bound <= 1e-3 %s, ratio in [3, 5] %s", bounded ? "met" : "missed", scaling ? "met" : "missed");
    report(6, bounded && scaling, "linearization accuracy", detail);
}

void criterion_7()
{
    std::mt19937_64 rng(20240607);
    std::uniform_real_distribution<double> mu_dist(1e-4, 0.01);
    std::uniform_real_distribution<double> u_dist(1.0, 20.0);
    std::uniform_int_distribution<int> m_dist(2, 8);
    double worst = 0.0;
    auto rel = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return ((a - b).array() / b.array().abs()).abs().maxCoeff();
    };
    auto gradient = [](const Eigen::VectorXd& r, double e) {
        Eigen::VectorXd g(2 * r.size());
        g << -e * r, e * r;
        return g;
    };
    for (int k = 0; k < 1000; ++k) {
        const int m = m_dist(rng);
        const double mu = mu_dist(rng);
        const double u = u_dist(rng);
        const Eigen::VectorXd x = oracle::random_normal(rng, m);
        const double y = oracle::random_normal(rng, 1)[0];

        AffineMixtureState a{oracle::random_positive(rng, m - 1), oracle::random_positive(rng, m - 1), mu, 1.0};
        const AffineError ea = affine_error(a, x, y);
        worst = std::max(worst, rel(augmented(affine_egu_step(a, x, y).next_state),
                                    oracle::egu_minimizer(augmented(a), gradient(ea.delta, ea.e), mu)));
        const double sa = augmented(a).sum();
        a.lambda1 *= u / sa;
        a.lambda2 *= u / sa;
        a.u = u;
        const AffineError eg_a = affine_error(a, x, y);
        worst = std::max(worst, rel(augmented(affine_eg_step(a, x, y).next_state),
                                    oracle::eg_minimizer(augmented(a), gradient(eg_a.delta, eg_a.e), mu, u)));

        UnconstrainedMixtureState w{oracle::random_positive(rng, m), oracle::random_positive(rng, m), mu, 1.0};
        const double ew = y - (w.w1 - w.w2).dot(x);
        worst = std::max(worst, rel(augmented(unconstrained_egu_step(w, x, y).next_state),
                                    oracle::egu_minimizer(augmented(w), gradient(x, ew), mu)));
        const double sw = augmented(w).sum();
        w.w1 *= u / sw;
        w.w2 *= u / sw;
        w.u = u;
        const double eg_w = y - (w.w1 - w.w2).dot(x);
        worst = std::max(worst, rel(augmented(unconstrained_eg_step(w, x, y).next_state),
                                    oracle::eg_minimizer(augmented(w), gradient(x, eg_w), mu, u)));
    }
    report(7, worst <= 1e-6, "closed-form steps match numerical minimization",
           fmt("1000 draws x 4 updates, worst per-coordinate relative deviation %.2e (<= 1e-6)", worst));
}

void criterion_8()
{
    bool positive = true;
    double mass_drift = 0.0, affine_drift = 0.0, scale_dev = 0.0, fixed_dev = 0.0;

    // Full signal -> bank -> combiner pipelines with every multiplicative combiner.
    const auto signal = SignalModelConfig::with_snr_db(reference_system(), 0.3, -5.0);
    std::vector<double> mus = {0.002, 0.1, 0.105, 0.104, 0.1, 0.002, 0.108, 0.101, 0.103, 0.109};
    struct Variant {
        Algorithm a;
        double mu;
        std::optional<double> u;
    };
    const Variant variants[] = {{Algorithm::AffineEg, 0.0008, 500.0}, {Algorithm::AffineEg, 0.002, 1.0},
                                {Algorithm::AffineEgu, 0.005, {}},   {Algorithm::UnconstrainedEg, 0.01, 3.0},
                                {Algorithm::UnconstrainedEgu, 0.01, {}}};
    for (std::uint64_t run = 0; run < 8; ++run) {
        for (const auto& v : variants) {
            Rng reg(stream_seed(77, Ensemble::Main, run, StreamRole::Regressor));
            Rng noise(stream_seed(77, Ensemble::Main, run, StreamRole::Noise));
            FilterBank bank(signal.filter_order(), mus);
            Combiner c(v.a, static_cast<Eigen::Index>(mus.size()), v.mu, v.u);
            Sample s;
            Eigen::VectorXd x;
            for (int t = 0; t < 5000; ++t) {
                next_sample(signal, reg, noise, s);
                bank.predict(s.a, x);
                c.advance(x, s.y);
                bank.adapt(s.a, s.y);
                const Eigen::VectorXd w = c.augmented();
                positive = positive && (w.array() > 0.0).all();
                if (v.u) {
                    mass_drift = std::max(mass_drift, std::abs(w.sum() - *v.u) / *v.u);
                }
                if (is_affine(v.a)) {
                    affine_drift = std::max(affine_drift, std::abs(c.effective_weights().sum() - 1.0));
                }
            }
        }
    }

    std::mt19937_64 rng(8);
    for (int k = 0; k < 1000; ++k) {
        const Eigen::VectorXd a = oracle::random_positive(rng, 8);
        const Eigen::VectorXd r = oracle::random_normal(rng, 4);
        const double e = oracle::random_normal(rng, 1)[0];
        const double c = std::exp(oracle::random_normal(rng, 1, 2.0)[0]);
        const Eigen::VectorXd base = eg_update(a, r, 0.01, e, 5.0);
        scale_dev = std::max(scale_dev, ((eg_update(c * a, r, 0.01, e, 5.0) - base).array() / base.array()).abs().maxCoeff());
    }

    // mu = 0: every recursion and update is a fixed point or a pure renormalization.
    for (int k = 0; k < 100; ++k) {
        const Eigen::VectorXd q = oracle::random_positive(rng, 6, 0.1, 1.0);
        const Eigen::MatrixXd Q = q * q.transpose() + 0.01 * oracle::random_spd(rng, 6);
        Eigen::MatrixXd G;
        Eigen::VectorXd g;
        augment_moments(oracle::random_spd(rng, 3), oracle::random_normal(rng, 3), G, g);
        const auto egu = egu_moment_step(0.0, q, Q, g, G);
        fixed_dev = std::max(fixed_dev, (egu.q - q).cwiseAbs().maxCoeff());
        fixed_dev = std::max(fixed_dev, (egu.Q - Q).cwiseAbs().maxCoeff());
        fixed_dev = std::max(fixed_dev, (eg_mean_step(0.0, q.sum(), q, Q, g, G) - q).cwiseAbs().maxCoeff());
        fixed_dev = std::max(fixed_dev,
                             (eg_second_moment_step(0.0, std::sqrt(Q.sum()), q, Q, g, G) - Q).cwiseAbs().maxCoeff());
        const Eigen::VectorXd x = oracle::random_normal(rng, 4);
        const double y = oracle::random_normal(rng, 1)[0];
        const AffineMixtureState a{q.head(3), q.tail(3), 0.0, q.sum()};
        fixed_dev = std::max(fixed_dev, (augmented(affine_egu_step(a, x, y).next_state) - q).cwiseAbs().maxCoeff());
        fixed_dev = std::max(fixed_dev, (augmented(affine_eg_step(a, x, y).next_state) - q).cwiseAbs().maxCoeff());
        const LmsMixtureState l{q.head(3), 0.0};
        fixed_dev = std::max(fixed_dev, (affine_lms_step(l, x, y).next_state.weights - l.weights).cwiseAbs().maxCoeff());
    }

    double min_variance = INFINITY;
    for (const char* name : {"exp1_affine_eg", "exp1_affine_lms", "exp2_unconstrained_egu", "exp2_unconstrained_eg",
                             "exp4a_affine_egu", "exp4b_affine_egu"}) {
        min_variance = std::min(min_variance, curves(name).min_weight_variance);
    }

    const bool pass = positive && mass_drift <= 1e-12 && affine_drift <= 1e-12 && scale_dev <= 1e-12
                      && fixed_dev <= 1e-12 && min_variance >= -1e-10;
    report(8, pass, "invariant suite",
           fmt("positivity %s; EG relative mass drift %.1e; affine sum drift %.1e; EG scale invariance %.1e; "
               "mu=0 fixed points %.1e (all <= 1e-12); min empirical variance %.2e (>= -1e-10)",
               positive ? "held" : "violated", mass_drift, affine_drift, scale_dev, fixed_dev, min_variance));
}

void criterion_9()
{
    const CurveSet& c = curves("exp2_unconstrained_egu");
    double radius_late = 0.0;
    double radius_early = 0.0;
    for (std::size_t r = 0; r < c.rows(); ++r) {
        (c.t[r] < 2 ? radius_early : radius_late) =
            std::max(c.t[r] < 2 ? radius_early : radius_late, c.convergence_radius[r]);
    }
    const auto last = static_cast<Eigen::Index>(c.rows() - 1);
    const Eigen::Index m = c.weights_effective.cols();
    const double w1 = c.weights_mean(last, 0) - c.weights_mean(last, m);
    const OptimumSolution opt = optimum_weights(c.final_R, c.final_p);
    const double gap = std::abs(w1 - opt.w0[0]);
    report(9, radius_late < 1.0 && gap <= 0.1, "mean-convergence consistency",
           fmt("max radius over t >= 2: %.9f (< 1; t = 0, 1 have singular R, radius %.3f); "
               "E[w^(1)](T) = %.4f, w0^(1) = %.4f, gap %.4f (<= 0.1)",
               radius_late, radius_early, w1, opt.w0[0], gap));
}

std::map<std::string, std::string> files_of(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        out[entry.path().filename().string()] = s.str();
    }
    return out;
}

void criterion_10()
{
    const fs::path root = fs::temp_directory_path() / ("bregmix_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    bool identical = true;
    std::string detail;
    for (const char* name : {"exp2_unconstrained_eg", "exp1_affine_eg"}) {
        ExperimentConfig c = load_config(fs::path(BREGMIX_CONFIG_DIR) / (std::string(name) + ".json"));
        if (c.horizon > 5000) {
            c.runs = 50;
        }
        write_curves(run_ensemble(c, {1}), root / name / "serial");
        write_curves(run_ensemble(c, {4}), root / name / "parallel");
        write_curves(run_ensemble(c, {1}), root / name / "repeat");
        const auto serial = files_of(root / name / "serial");
        const bool same = serial == files_of(root / name / "parallel") && serial == files_of(root / name / "repeat");
        identical = identical && same;
        detail += fmt("%s %zu files %s; ", name, serial.size(), same ? "identical" : "differ");
    }
    fs::remove_all(root);
    detail.resize(detail.size() - 2);
    report(10, identical, "byte-identical CSVs for serial, parallel and repeated runs", detail);
}

}  // namespace

int main()
{
    const std::pair<const char*, std::function<void()>> criteria[] = {
        {"1", criterion_1},
        {"2", criterion_2},
        {"3", criterion_3},
        {"4", [] { theory_criterion(4, "exp2_unconstrained_egu", "theory vs simulation, unconstrained EGU"); }},
        {"5", [] { theory_criterion(5, "exp2_unconstrained_eg", "theory vs simulation, unconstrained EG (u=3)"); }},
        {"6", criterion_6},
        {"7", criterion_7},
        {"8", criterion_8},
        {"9", criterion_9},
        {"10", criterion_10},
    };
    for (const auto& [id, run] : criteria) {
        try {
            run();
        } catch (const std::exception& e) {
            report(std::stoi(id), false, "criterion raised an error", e.what());
        }
    }
    std::printf("%d of %zu criteria failed\n", failures, std::size(criteria));
    return failures == 0 ? 0 : 1;
}
