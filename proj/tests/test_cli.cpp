#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "volnet/data.hpp"
#include "volnet/io.hpp"

using namespace volnet;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = 0;
    std::string stderr_text;
};

CliResult run_cli(const fs::path& workdir, const std::string& args) {
    fs::create_directories(workdir);
    const fs::path err = workdir / "stderr.log";
    const std::string cmd = "cd " + workdir.string() + " && " + VOLNET_CLI_PATH + " " + args +
                            " > /dev/null 2> " + err.string();
    const int raw = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    if (fs::exists(err)) result.stderr_text = read_file(err);
    return result;
}

const fs::path kRoot = fs::temp_directory_path() / "volnet_cli_tests";

}  // namespace

TEST_CASE("missing subcommand and missing config are config errors") {
    const auto none = run_cli(kRoot / "none", "");
    CHECK(none.exit_code == 2);

    const auto no_cfg = run_cli(kRoot / "nocfg", "synth");
    CHECK(no_cfg.exit_code == 2);
    CHECK(no_cfg.stderr_text.find("error: config") != std::string::npos);
}

TEST_CASE("config violations are enumerated together") {
    const fs::path dir = kRoot / "badcfg";
    fs::create_directories(dir);
    write_file(dir / "cfg.json", R"({
      "synth": {"dgp": "mystery", "assets": 1, "beta": [0.1]},
      "glasso": {"folds": 1}
    })");
    const auto result = run_cli(dir, "--config cfg.json synth");
    CHECK(result.exit_code == 2);
    // one line naming every violated field
    CHECK(result.stderr_text.find("synth.dgp") != std::string::npos);
    CHECK(result.stderr_text.find("synth.assets") != std::string::npos);
    CHECK(result.stderr_text.find("synth.beta") != std::string::npos);
    CHECK(result.stderr_text.find("glasso.folds") != std::string::npos);
}

TEST_CASE("missing input files exit with the data code and name the path") {
    const fs::path dir = kRoot / "missing";
    fs::create_directories(dir);
    write_file(dir / "cfg.json", R"({
      "data": {"rv_panel": "nowhere/panel.csv", "returns": "nowhere/returns.csv"},
      "backtest": {"models": ["har_m"]}
    })");
    const auto result = run_cli(dir, "--config cfg.json backtest");
    CHECK(result.exit_code == 3);
    CHECK(result.stderr_text.find("error: data") != std::string::npos);
    CHECK(result.stderr_text.find("nowhere/panel.csv") != std::string::npos);
}

TEST_CASE("compute-rv produces the expected panel and returns files") {
    const fs::path dir = kRoot / "rv";
    fs::create_directories(dir);
    // two five-minute 1% log returns -> rv = 2e-4
    write_file(dir / "intraday.csv",
               "date,asset,minute,price\n"
               "2020-01-02,AAA,0,100\n"
               "2020-01-02,AAA,5," + format_double(100.0 * std::exp(0.01)) + "\n"
               "2020-01-02,AAA,10," + format_double(100.0 * std::exp(0.02)) + "\n"
               "2020-01-03,AAA,0,100\n"
               "2020-01-03,AAA,5,100\n"
               "2020-01-03,AAA,10,100\n");
    const auto result = run_cli(
        dir, "compute-rv --input intraday.csv --delta 5 --base 5 --rv-out rv.csv "
             "--returns-out rets.csv");
    CHECK(result.exit_code == 0);
    const auto rows = read_csv(dir / "rv.csv", "date,asset,rv");
    REQUIRE(rows.size() == 2);
    CHECK(parse_double(rows[0].fields[2], 2, "rv") == doctest::Approx(2.0e-4).epsilon(1e-10));
    CHECK(parse_double(rows[1].fields[2], 3, "rv") == 0.0);
    // close-to-close return for the second day
    const auto rets = read_csv(dir / "rets.csv", "date,asset,ret");
    REQUIRE(rets.size() == 1);
    CHECK(parse_double(rets[0].fields[2], 2, "ret") == doctest::Approx(-0.02));
}

TEST_CASE("estimate-graph writes the edge list and spd report") {
    const fs::path dir = kRoot / "graph";
    fs::create_directories(dir);
    // synthesize returns first
    write_file(dir / "cfg.json", R"({
      "out": "synth_out",
      "synth": {"dgp": "linear", "assets": 5, "days": 600, "seed": 4, "topology": "chain",
                 "alpha": -0.2, "beta": [0.3, 0.2, 0.1], "gamma": [0, 0, 0]},
      "glasso": {"folds": 3, "grid_size": 8}
    })");
    CHECK(run_cli(dir, "--config cfg.json synth").exit_code == 0);
    const auto result = run_cli(
        dir, "--config cfg.json --out graph_out estimate-graph --returns synth_out/returns.csv");
    CHECK(result.exit_code == 0);
    CHECK(fs::exists(dir / "graph_out" / "edges.csv"));
    CHECK(fs::exists(dir / "graph_out" / "spd_frequency.csv"));
    CHECK(fs::exists(dir / "graph_out" / "graph_summary.json"));
    CHECK(fs::exists(dir / "graph_out" / "manifest.json"));
}

TEST_CASE("cleanup") { fs::remove_all(kRoot); }
