#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "bregmix/cli.hpp"
#include "bregmix/config.hpp"
#include "bregmix/output.hpp"

using namespace bregmix;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir()
    {
        path = fs::temp_directory_path() / ("bregmix_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter()
    {
        static int n = 0;
        return n;
    }
};

fs::path write_file(const fs::path& path, const std::string& text)
{
    std::ofstream(path) << text;
    return path;
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count_lines(const std::string& text)
{
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

const char* kSmoke = R"({
  "seed": 7, "runs": 1, "horizon": 10,
  "signal": {"snr_db": 0.0},
  "constituents": [{"mu": 0.01}, {"mu_range": [0.1, 0.11]}, {"mu": 0.05}],
  "mixture": {"algorithm": "affine_eg", "mu": 0.01, "u": 2},
  "output": {"decimation": 1}
})";

const char* kFiles[] = {"mse.csv", "weights_mean.csv", "weights_effective.csv", "weights_moment.csv",
                        "diagnostics.csv"};

}  // namespace

TEST_CASE("float formatting round-trips")
{
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(std::nan("")) == "nan");
}

TEST_CASE("BREGMIX_THREADS parsing")
{
    CHECK(threads_from_env(nullptr) == 0);
    CHECK(threads_from_env("") == 0);
    CHECK(threads_from_env("6") == 6);
    CHECK_THROWS_AS(threads_from_env("many"), ConfigError);
    CHECK_THROWS_AS(threads_from_env("-1"), ConfigError);
}

TEST_CASE("run writes deterministic files and a manifest")
{
    TempDir tmp;
    const fs::path config = write_file(tmp.path / "smoke.json", kSmoke);
    std::ostringstream out, err;
    REQUIRE(cmd_run(config, {tmp.path / "a", {}, {}}, 1, out, err) == kExitOk);
    REQUIRE(cmd_run(config, {tmp.path / "b", {}, {}}, 4, out, err) == kExitOk);

    for (const char* name : kFiles) {
        const std::string a = read_file(tmp.path / "a" / name);
        CHECK(count_lines(a) == 11);
        CHECK(a == read_file(tmp.path / "b" / name));
    }
    CHECK(read_file(tmp.path / "a" / "mse.csv").rfind("t,mse_mixture,mse_c1,mse_c2,mse_c3\n", 0) == 0);
    CHECK(read_file(tmp.path / "a" / "weights_mean.csv").rfind("t,qa_1,qa_2,qa_3,qa_4\n", 0) == 0);
    CHECK(read_file(tmp.path / "a" / "diagnostics.csv").rfind("t,linearization_diff,quotient_diff,saturation_count\n", 0) == 0);

    const auto manifest = nlohmann::json::parse(read_file(tmp.path / "a" / "manifest.json"));
    CHECK(manifest.at("seed") == 7);
    CHECK(manifest.at("diverged_runs") == 0);
    CHECK(manifest.contains("version"));
    CHECK(manifest.contains("wall_clock_seconds"));
    CHECK(manifest.at("files").size() == 5);
    CHECK(manifest.at("files")[0].at("rows") == 10);
    CHECK(manifest.at("files")[0].at("columns") == 5);
    const auto& echoed = manifest.at("config");
    CHECK(echoed.at("constituents")[1].contains("mu"));
    CHECK(echoed.at("signal").contains("tau"));
    CHECK_FALSE(echoed.at("signal").contains("snr_db"));

    SUBCASE("the config echo alone reproduces every file")
    {
        nlohmann::json pinned = echoed;
        pinned["output"]["directory"] = (tmp.path / "c").string();
        const fs::path replay = write_file(tmp.path / "replay.json", pinned.dump());
        REQUIRE(cmd_run(replay, {}, 2, out, err) == kExitOk);
        for (const char* name : kFiles) {
            CHECK(read_file(tmp.path / "c" / name) == read_file(tmp.path / "a" / name));
        }
    }
    SUBCASE("overrides")
    {
        REQUIRE(cmd_run(config, {tmp.path / "d", 3, 11}, 1, out, err) == kExitOk);
        const auto m = nlohmann::json::parse(read_file(tmp.path / "d" / "manifest.json"));
        CHECK(m.at("seed") == 11);
        CHECK(m.at("config").at("runs") == 3);
        CHECK(m.at("runs_used") == 3);
        CHECK(read_file(tmp.path / "d" / "mse.csv") != read_file(tmp.path / "a" / "mse.csv"));
    }
}

TEST_CASE("run exit codes")
{
    TempDir tmp;
    std::ostringstream out, err;
    SUBCASE("malformed JSON")
    {
        CHECK(cmd_run(write_file(tmp.path / "bad.json", "{\"seed\": 1,"), {}, 1, out, err) == kExitConfig);
        CHECK(err.str().find("malformed JSON") != std::string::npos);
    }
    SUBCASE("missing file")
    {
        CHECK(cmd_run(tmp.path / "nope.json", {}, 1, out, err) == kExitConfig);
    }
    SUBCASE("divergence")
    {
        const fs::path config = write_file(tmp.path / "div.json", R"({
          "runs": 4, "horizon": 2000,
          "signal": {"snr_db": 10.0},
          "constituents": [{"mu": 5.0}, {"mu": 0.1}],
          "mixture": {"algorithm": "affine_egu", "mu": 0.01}
        })");
        CHECK(cmd_run(config, {tmp.path / "out", {}, {}}, 1, out, err) == kExitDiverged);
    }
}

TEST_CASE("validate")
{
    TempDir tmp;
    std::ostringstream out, err;
    SUBCASE("missing u names the field")
    {
        const fs::path p = write_file(tmp.path / "a.json", R"({
          "signal": {"snr_db": 0}, "constituents": [{"mu": 0.1}, {"mu": 0.2}],
          "mixture": {"algorithm": "affine_eg", "mu": 0.01}})");
        CHECK(cmd_validate(p, out, err) == kExitConfig);
        CHECK(err.str().find("mixture.u") != std::string::npos);
    }
    SUBCASE("u below one")
    {
        const fs::path p = write_file(tmp.path / "a.json", R"({
          "signal": {"snr_db": 0}, "constituents": [{"mu": 0.1}, {"mu": 0.2}],
          "mixture": {"algorithm": "affine_eg", "mu": 0.01, "u": 0.5}})");
        CHECK(cmd_validate(p, out, err) == kExitConfig);
        CHECK(err.str().find("u must be >= 1") != std::string::npos);
    }
    SUBCASE("several violations are listed together")
    {
        const fs::path p = write_file(tmp.path / "a.json", R"({
          "runs": 0, "colour": 1, "signal": {"snr_db": 0}, "constituents": [{"mu": 0.1}],
          "mixture": {"algorithm": "affine_lms", "mu": 0.01}})");
        CHECK(cmd_validate(p, out, err) == kExitConfig);
        CHECK(err.str().find("runs") != std::string::npos);
        CHECK(err.str().find("colour") != std::string::npos);
        CHECK(err.str().find("constituents") != std::string::npos);
    }
    SUBCASE("defaults are echoed")
    {
        const fs::path p = write_file(tmp.path / "a.json", R"({
          "signal": {"snr_db": 0}, "constituents": [{"mu": 0.1}, {"mu_range": [0.1, 0.11]}],
          "mixture": {"algorithm": "affine_lms", "mu": 0.01}})");
        CHECK(cmd_validate(p, out, err) == kExitOk);
        const auto j = nlohmann::json::parse(out.str());
        CHECK(j.at("seed") == 1);
        CHECK(j.at("runs") == 200);
        CHECK(j.at("horizon") == 20000);
        CHECK(j.at("output").at("decimation") == 10);
        CHECK(j.at("signal").at("noise_variance") == 0.3);
        CHECK(j.at("signal").at("w_o").size() == 7);
        CHECK(j.at("constituents")[1].contains("mu_range"));
    }
}

TEST_CASE("compare")
{
    TempDir tmp;
    std::ostringstream out, err;
    const std::string head = R"({
      "seed": 5, "runs": 8, "horizon": 400,
      "signal": {"snr_db": -5.0},
      "constituents": [{"mu": 0.002}, {"mu": 0.1}, {"mu": 0.1}],
      "output": {"decimation": 4},
      "mixture": )";
    const fs::path eg = write_file(tmp.path / "eg.json", head + R"({"algorithm": "affine_eg", "mu": 0.001, "u": 50}})");
    const fs::path lms = write_file(tmp.path / "lms.json", head + R"({"algorithm": "affine_lms", "mu": 0.005}})");

    SUBCASE("writes one row per config")
    {
        REQUIRE(cmd_compare({eg, lms}, tmp.path / "cmp", 1, out, err) == kExitOk);
        const std::string csv = read_file(tmp.path / "cmp" / "compare.csv");
        CHECK(csv.rfind("label,algorithm,mu,u,final_mse,iterations_to_90\n", 0) == 0);
        CHECK(count_lines(csv) == 3);
        CHECK(out.str().find("affine_lms") != std::string::npos);
    }
    SUBCASE("duplicated configs give identical rows")
    {
        const fs::path copy = write_file(tmp.path / "lms_copy.json", read_file(lms));
        REQUIRE(cmd_compare({lms, copy}, tmp.path / "dup", 2, out, err) == kExitOk);
        std::istringstream csv(read_file(tmp.path / "dup" / "compare.csv"));
        std::string header, a, b;
        std::getline(csv, header);
        std::getline(csv, a);
        std::getline(csv, b);
        CHECK(a.substr(a.find(',')) == b.substr(b.find(',')));
    }
    SUBCASE("different signals are not comparable")
    {
        std::string other = read_file(lms);
        other.replace(other.find("-5.0"), 4, "5.0");
        const fs::path p = write_file(tmp.path / "other.json", other);
        CHECK(cmd_compare({eg, p}, tmp.path / "x", 1, out, err) == kExitConfig);
        CHECK(err.str().find("not comparable") != std::string::npos);
    }
}
