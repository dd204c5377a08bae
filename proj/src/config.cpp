#include "bregmix/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bregmix/rng.hpp"

namespace bregmix {

using nlohmann::json;

namespace {

std::string join_issues(const std::vector<std::string>& issues)
{
    std::string out;
    for (const auto& issue : issues) {
        if (!out.empty()) {
            out += "; ";
        }
        out += issue;
    }
    return out;
}

std::string child(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

// Collects every schema violation instead of stopping at the first one.
class Reader {
public:
    std::vector<std::string> issues;

    void fail(const std::string& path, const std::string& message) { issues.push_back(path + ": " + message); }

    bool expect_object(const json& value, const std::string& path)
    {
        if (!value.is_object()) {
            fail(path.empty() ? "<root>" : path, "expected an object");
            return false;
        }
        return true;
    }

    void allow_keys(const json& object, const std::string& path, std::initializer_list<std::string_view> keys)
    {
        for (const auto& [key, _] : object.items()) {
            if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
                fail(child(path, key), "unknown key");
            }
        }
    }

    std::optional<double> number(const json& object, const std::string& path, const std::string& key)
    {
        if (!object.contains(key)) {
            return std::nullopt;
        }
        const json& v = object.at(key);
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
            fail(child(path, key), "expected a finite number");
            return std::nullopt;
        }
        return v.get<double>();
    }

    std::optional<std::uint64_t> count(const json& object, const std::string& path, const std::string& key)
    {
        if (!object.contains(key)) {
            return std::nullopt;
        }
        const json& v = object.at(key);
        if (v.is_number_unsigned()) {
            return v.get<std::uint64_t>();
        }
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        }
        fail(child(path, key), "expected a non-negative integer");
        return std::nullopt;
    }

    std::optional<bool> flag(const json& object, const std::string& path, const std::string& key)
    {
        if (!object.contains(key)) {
            return std::nullopt;
        }
        const json& v = object.at(key);
        if (!v.is_boolean()) {
            fail(child(path, key), "expected true or false");
            return std::nullopt;
        }
        return v.get<bool>();
    }

    std::optional<std::string> text(const json& object, const std::string& path, const std::string& key)
    {
        if (!object.contains(key)) {
            return std::nullopt;
        }
        const json& v = object.at(key);
        if (!v.is_string()) {
            fail(child(path, key), "expected a string");
            return std::nullopt;
        }
        return v.get<std::string>();
    }

    std::optional<std::vector<double>> numbers(const json& object, const std::string& path, const std::string& key)
    {
        if (!object.contains(key)) {
            return std::nullopt;
        }
        const json& v = object.at(key);
        if (!v.is_array()) {
            fail(child(path, key), "expected an array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
                fail(child(path, key) + "[" + std::to_string(i) + "]", "expected a finite number");
                return std::nullopt;
            }
            out.push_back(v[i].get<double>());
        }
        return out;
    }
};

void read_signal(Reader& r, const json& doc, SignalSpec& signal)
{
    const Eigen::VectorXd reference = reference_system();
    signal.w_o.assign(reference.data(), reference.data() + reference.size());
    if (!doc.contains("signal")) {
        r.fail("signal", "required (tau or snr_db)");
        return;
    }
    const json& s = doc.at("signal");
    if (!r.expect_object(s, "signal")) {
        return;
    }
    r.allow_keys(s, "signal", {"w_o", "noise_variance", "tau", "snr_db"});
    if (auto w = r.numbers(s, "signal", "w_o")) {
        if (w->empty()) {
            r.fail("signal.w_o", "must be non-empty");
        }
        signal.w_o = *w;
    }
    if (auto nv = r.number(s, "signal", "noise_variance")) {
        if (*nv < 0.0) {
            r.fail("signal.noise_variance", "must be >= 0");
        }
        signal.noise_variance = *nv;
    }
    signal.tau = r.number(s, "signal", "tau");
    signal.snr_db = r.number(s, "signal", "snr_db");
    if (signal.tau.has_value() == signal.snr_db.has_value()) {
        r.fail("signal", "exactly one of tau and snr_db is required");
    }
    if (signal.tau && !(*signal.tau > 0.0)) {
        r.fail("signal.tau", "must be > 0");
    }
    if (signal.snr_db && !(signal.noise_variance > 0.0)) {
        r.fail("signal.snr_db", "needs noise_variance > 0");
    }
}

void read_constituents(Reader& r, const json& doc, std::vector<ConstituentSpec>& out)
{
    if (!doc.contains("constituents") || !doc.at("constituents").is_array()) {
        r.fail("constituents", "required array of {mu} or {mu_range} entries");
        return;
    }
    const json& list = doc.at("constituents");
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string path = "constituents[" + std::to_string(i) + "]";
        ConstituentSpec spec;
        if (!r.expect_object(list[i], path)) {
            continue;
        }
        r.allow_keys(list[i], path, {"mu", "mu_range"});
        spec.mu = r.number(list[i], path, "mu");
        if (auto range = r.numbers(list[i], path, "mu_range")) {
            if (range->size() != 2 || !((*range)[0] > 0.0) || (*range)[0] > (*range)[1]) {
                r.fail(path + ".mu_range", "expected [lo, hi] with 0 < lo <= hi");
            } else {
                spec.mu_range = std::make_pair((*range)[0], (*range)[1]);
            }
        }
        if (list[i].contains("mu") == list[i].contains("mu_range")) {
            r.fail(path, "exactly one of mu and mu_range is required");
        }
        if (spec.mu && !(*spec.mu > 0.0)) {
            r.fail(path + ".mu", "must be > 0");
        }
        out.push_back(spec);
    }
    if (list.size() < 2) {
        r.fail("constituents", "at least two constituent filters are required");
    }
}

void read_mixture(Reader& r, const json& doc, MixtureSpec& mixture)
{
    if (!doc.contains("mixture")) {
        r.fail("mixture", "required");
        return;
    }
    const json& m = doc.at("mixture");
    if (!r.expect_object(m, "mixture")) {
        return;
    }
    r.allow_keys(m, "mixture", {"algorithm", "mu", "u", "use_linearized"});
    bool known_algorithm = false;
    if (auto name = r.text(m, "mixture", "algorithm")) {
        if (auto a = parse_algorithm(*name)) {
            mixture.algorithm = *a;
            known_algorithm = true;
        } else {
            r.fail("mixture.algorithm", "unknown algorithm '" + *name + "'");
        }
    } else if (!m.contains("algorithm")) {
        r.fail("mixture.algorithm", "required");
    }
    if (auto mu = r.number(m, "mixture", "mu")) {
        if (!(*mu > 0.0)) {
            r.fail("mixture.mu", "must be > 0");
        }
        mixture.mu = *mu;
    } else if (!m.contains("mu")) {
        r.fail("mixture.mu", "required");
    }
    mixture.u = r.number(m, "mixture", "u");
    if (known_algorithm) {
        if (is_eg(mixture.algorithm) && !m.contains("u")) {
            r.fail("mixture.u", "required for " + std::string(to_string(mixture.algorithm)));
        }
        if (!is_eg(mixture.algorithm) && m.contains("u")) {
            r.fail("mixture.u", "only valid for EG algorithms");
        }
        if (is_lms(mixture.algorithm) && m.contains("use_linearized") && m.at("use_linearized") == true) {
            r.fail("mixture.use_linearized", "not applicable to LMS combiners");
        }
    }
    if (mixture.u && !(*mixture.u >= 1.0)) {
        r.fail("mixture.u", "u must be >= 1");
    }
    mixture.use_linearized = r.flag(m, "mixture", "use_linearized").value_or(false);
}

void read_theory(Reader& r, const json& doc, TheorySpec& theory)
{
    if (!doc.contains("theory")) {
        return;
    }
    const json& t = doc.at("theory");
    if (!r.expect_object(t, "theory")) {
        return;
    }
    r.allow_keys(t, "theory", {"enabled", "moment_runs"});
    theory.enabled = r.flag(t, "theory", "enabled").value_or(false);
    theory.moment_runs = r.count(t, "theory", "moment_runs").value_or(0);
}

void read_output(Reader& r, const json& doc, OutputSpec& output)
{
    if (!doc.contains("output")) {
        return;
    }
    const json& o = doc.at("output");
    if (!r.expect_object(o, "output")) {
        return;
    }
    r.allow_keys(o, "output", {"directory", "decimation", "moment_entries"});
    output.directory = r.text(o, "output", "directory").value_or(".");
    if (auto d = r.count(o, "output", "decimation")) {
        if (*d < 1) {
            r.fail("output.decimation", "must be >= 1");
        }
        output.decimation = *d;
    }
    if (o.contains("moment_entries")) {
        const json& list = o.at("moment_entries");
        bool ok = list.is_array();
        for (std::size_t i = 0; ok && i < list.size(); ++i) {
            const json& e = list[i];
            if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
                ok = false;
                break;
            }
            output.moment_entries.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        if (!ok) {
            r.fail("output.moment_entries", "expected an array of [i, j] integer pairs");
            output.moment_entries.clear();
        }
    }
}

}  // namespace

std::size_t ExperimentConfig::weight_dimension() const
{
    const std::size_t m = constituents.size();
    switch (mixture.algorithm) {
    case Algorithm::AffineEgu:
    case Algorithm::AffineEg: return 2 * (m - 1);
    case Algorithm::AffineLms: return m - 1;
    case Algorithm::UnconstrainedEgu:
    case Algorithm::UnconstrainedEg: return 2 * m;
    case Algorithm::UnconstrainedLms: return m;
    }
    return 0;
}

ConfigErrors::ConfigErrors(std::vector<std::string> issues)
    : ConfigError(join_issues(issues)), issues_(std::move(issues))
{
}

ExperimentConfig parse_config(const json& doc)
{
    Reader r;
    ExperimentConfig config;
    if (!r.expect_object(doc, "")) {
        throw ConfigErrors(r.issues);
    }
    r.allow_keys(doc, "", {"seed", "runs", "horizon", "signal", "constituents", "mixture", "theory", "output"});
    config.seed = r.count(doc, "", "seed").value_or(config.seed);
    config.runs = r.count(doc, "", "runs").value_or(config.runs);
    config.horizon = r.count(doc, "", "horizon").value_or(config.horizon);
    if (config.runs < 1) {
        r.fail("runs", "must be >= 1");
    }
    if (config.horizon < 1) {
        r.fail("horizon", "must be >= 1");
    }
    read_signal(r, doc, config.signal);
    read_constituents(r, doc, config.constituents);
    read_mixture(r, doc, config.mixture);
    read_theory(r, doc, config.theory);
    read_output(r, doc, config.output);

    if (config.theory.enabled && is_lms(config.mixture.algorithm)) {
        r.fail("theory.enabled", "transient recursions exist for EGU/EG combiners only");
    }
    if (r.issues.empty()) {
        const int k = static_cast<int>(config.weight_dimension());
        if (config.output.moment_entries.empty()) {
            config.output.moment_entries = {{1, 1}, {1, std::min(2, k)}};
        }
        for (const auto& [i, j] : config.output.moment_entries) {
            if (i < 1 || j < 1 || i > k || j > k) {
                r.fail("output.moment_entries", "entry [" + std::to_string(i) + ", " + std::to_string(j)
                                                    + "] outside 1.." + std::to_string(k));
            }
        }
    }
    if (!r.issues.empty()) {
        throw ConfigErrors(r.issues);
    }
    return config;
}

ExperimentConfig parse_config_text(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigErrors({std::string("<root>: malformed JSON: ") + e.what()});
    }
    return parse_config(doc);
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigErrors({path.string() + ": cannot open config file"});
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

json config_to_json(const ExperimentConfig& config)
{
    json signal = {{"w_o", config.signal.w_o}, {"noise_variance", config.signal.noise_variance}};
    if (config.signal.tau) {
        signal["tau"] = *config.signal.tau;
    }
    if (config.signal.snr_db) {
        signal["snr_db"] = *config.signal.snr_db;
    }
    json constituents = json::array();
    for (const auto& c : config.constituents) {
        if (c.mu) {
            constituents.push_back({{"mu", *c.mu}});
        } else {
            constituents.push_back({{"mu_range", {c.mu_range->first, c.mu_range->second}}});
        }
    }
    json mixture = {{"algorithm", std::string(to_string(config.mixture.algorithm))},
                    {"mu", config.mixture.mu},
                    {"use_linearized", config.mixture.use_linearized}};
    if (config.mixture.u) {
        mixture["u"] = *config.mixture.u;
    }
    json entries = json::array();
    for (const auto& [i, j] : config.output.moment_entries) {
        entries.push_back({i, j});
    }
    return {
        {"seed", config.seed},
        {"runs", config.runs},
        {"horizon", config.horizon},
        {"signal", signal},
        {"constituents", constituents},
        {"mixture", mixture},
        {"theory", {{"enabled", config.theory.enabled}, {"moment_runs", config.theory.moment_runs}}},
        {"output",
         {{"directory", config.output.directory},
          {"decimation", config.output.decimation},
          {"moment_entries", entries}}},
    };
}

ResolvedExperiment resolve(const ExperimentConfig& config)
{
    Eigen::VectorXd w_o = Eigen::Map<const Eigen::VectorXd>(config.signal.w_o.data(),
                                                           static_cast<Eigen::Index>(config.signal.w_o.size()));
    SignalModelConfig signal =
        config.signal.snr_db
            ? SignalModelConfig::with_snr_db(std::move(w_o), config.signal.noise_variance, *config.signal.snr_db)
            : SignalModelConfig(std::move(w_o), config.signal.tau.value_or(0.0), config.signal.noise_variance);

    Rng draws(stream_seed(config.seed, Ensemble::Main, 0, StreamRole::ConstituentStep));
    std::vector<double> mu;
    mu.reserve(config.constituents.size());
    for (const auto& c : config.constituents) {
        mu.push_back(c.mu ? *c.mu : draws.uniform(c.mu_range->first, c.mu_range->second));
    }
    return {config, std::move(signal), std::move(mu)};
}

ExperimentConfig pinned_config(const ResolvedExperiment& resolved)
{
    ExperimentConfig pinned = resolved.config;
    pinned.signal.tau = resolved.signal.tau();
    pinned.signal.snr_db.reset();
    for (std::size_t i = 0; i < pinned.constituents.size(); ++i) {
        pinned.constituents[i] = ConstituentSpec{resolved.constituent_mu[i], std::nullopt};
    }
    return pinned;
}

}  // namespace bregmix
