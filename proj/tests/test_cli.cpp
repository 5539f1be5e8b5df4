#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kExe = BSVIE_CLI_PATH;

fs::path fresh_dir(const std::string& label) {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() /
                   ("bsvie_cli_" + std::to_string(::getpid()) + "_" + label + "_" +
                    std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& command) {
    const int status = std::system((command + " >/dev/null 2>&1").c_str());
    if (status == -1) return -1;
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -2;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
    REQUIRE(out.good());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), "missing file: " << path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json read_report(const fs::path& dir) { return json::parse(read_file(dir / "report.json")); }

const std::string kZeroConfig = R"({
  "horizon": 1.0, "steps": 8, "paths": 320, "seed": 3,
  "generator": {"tag": "zero"},
  "terminal": {"tag": "constant", "c": 2.5}
})";

} // namespace

TEST_CASE("solve writes a schema-versioned report and slice table") {
    auto dir = fresh_dir("solve");
    auto cfg = dir / "config.json";
    write_file(cfg, kZeroConfig);

    CHECK(run(kExe + " solve --config " + cfg.string() + " --out " + dir.string()) == 0);

    auto report = read_report(dir);
    CHECK(report.at("schema_version").get<int>() == 1);
    CHECK(report.at("command").get<std::string>() == "solve");
    CHECK(report.at("config").at("steps").get<int>() == 8);
    CHECK(report.at("config").at("seed").get<long long>() == 3);
    CHECK(std::abs(report.at("results").at("y0").get<double>() - 2.5) <= 1e-12);
    CHECK(report.at("results").at("solver").at("converged").get<bool>());
    // Worker count must never be part of the artifact.
    CHECK(report.dump().find("thread") == std::string::npos);

    const std::string csv = read_file(dir / "solve_slices.csv");
    CHECK(csv.rfind("t,meanY,stdY,mResidual\n", 0) == 0);
    CHECK(csv.find("2.5") != std::string::npos);
    CHECK(!fs::exists(dir / "report.json.tmp")); // atomic rename leaves no temp file
}

TEST_CASE("identical configs reproduce byte-identical artifacts across thread counts") {
    auto base = fresh_dir("repro");
    auto cfg = base / "config.json";
    write_file(cfg, R"({
      "horizon": 1.0, "steps": 8, "paths": 500, "seed": 21,
      "generator": {"tag": "linear", "l1": 0.2, "l2": 0.2},
      "terminal": {"tag": "call", "strike": 0.0}
    })");

    auto run_into = [&](const std::string& label, const std::string& extra) {
        auto dir = fresh_dir("repro_" + label);
        REQUIRE(run(kExe + " solve --config " + cfg.string() + " --out " + dir.string() + extra) ==
                0);
        return dir;
    };
    auto a = run_into("a", "");
    auto b = run_into("b", "");
    auto c = run_into("c", " --threads 8");

    CHECK(read_file(a / "report.json") == read_file(b / "report.json"));
    CHECK(read_file(a / "solve_slices.csv") == read_file(b / "solve_slices.csv"));
    CHECK(read_file(a / "report.json") == read_file(c / "report.json"));
    CHECK(read_file(a / "solve_slices.csv") == read_file(c / "solve_slices.csv"));
}

TEST_CASE("seed flag overrides the config and changes the results") {
    auto dir = fresh_dir("seed");
    auto cfg = dir / "config.json";
    write_file(cfg, R"({
      "horizon": 1.0, "steps": 8, "paths": 500, "seed": 21,
      "generator": {"tag": "linear", "l1": 0.2, "l2": 0.2},
      "terminal": {"tag": "call", "strike": 0.0}
    })");

    auto d1 = fresh_dir("seed_a"), d2 = fresh_dir("seed_b");
    REQUIRE(run(kExe + " solve --config " + cfg.string() + " --out " + d1.string()) == 0);
    REQUIRE(run(kExe + " solve --config " + cfg.string() + " --out " + d2.string() + " --seed 99") ==
            0);

    auto r1 = read_report(d1), r2 = read_report(d2);
    CHECK(r2.at("config").at("seed").get<long long>() == 99);
    CHECK(r1.at("results").at("y0").get<double>() != r2.at("results").at("y0").get<double>());
}

TEST_CASE("risk of a sure claim is its negative") {
    auto dir = fresh_dir("risk");
    auto cfg = dir / "config.json";
    write_file(cfg, R"({
      "horizon": 1.0, "steps": 8, "paths": 320, "seed": 3,
      "generator": {"tag": "zero"},
      "terminal": {"tag": "constant", "c": 5.0}
    })");
    CHECK(run(kExe + " risk --config " + cfg.string() + " --out " + dir.string()) == 0);
    auto report = read_report(dir);
    CHECK(report.at("command").get<std::string>() == "risk");
    CHECK(std::abs(report.at("results").at("y0").get<double>() + 5.0) <= 1e-12);
    CHECK(read_file(dir / "risk_slices.csv").rfind("t,meanRho,stdRho,mResidual\n", 0) == 0);
}

TEST_CASE("volatility-charging scenario prices near the closed form") {
    auto dir = fresh_dir("kappa");
    auto cfg = dir / "config.json";
    write_file(cfg, R"({
      "horizon": 1.0, "steps": 16, "paths": 2000, "seed": 7,
      "generator": {"tag": "kappa_abs_z", "kappa": 0.5},
      "terminal": {"tag": "linear", "a": -1.0, "b": 0.0}
    })");
    CHECK(run(kExe + " solve --config " + cfg.string() + " --out " + dir.string()) == 0);
    auto report = read_report(dir);
    CHECK(std::abs(report.at("results").at("y0").get<double>() - 0.5) <= 0.05);
}

TEST_CASE("schema violations exit with code 2 and name the field") {
    auto dir = fresh_dir("bad");

    auto expect2 = [&](const std::string& label, const std::string& body,
                       const std::string& subcommand) {
        auto cfg = dir / (label + ".json");
        write_file(cfg, body);
        CHECK_MESSAGE(run(kExe + " " + subcommand + " --config " + cfg.string() + " --out " +
                          dir.string()) == 2,
                      "case: " << label);
    };

    expect2("not_json", "{ this is not json", "solve");
    expect2("one_step", R"({"steps": 1, "paths": 320})", "solve");
    expect2("bad_tag", R"({"steps": 8, "paths": 320, "generator": {"tag": "warp"}})", "solve");
    expect2("bad_tag_risk", R"({"steps": 8, "paths": 320, "generator": {"tag": "warp"}})", "risk");
    expect2("few_paths", R"({"steps": 8, "paths": 12})", "solve");
    expect2("no_counter_c", R"({"steps": 8, "paths": 320, "counterexample": {}})", "counterexample");
    expect2("empty_battery", R"({"steps": 8, "paths": 320, "axioms": {"battery": []}})", "axioms");
    expect2("short_ladder",
            R"({"steps": 8, "paths": 320, "convergence": {"target": "bvie", "steps": [16]}})",
            "convergence");
    expect2("bvie_no_c", R"({"steps": 8, "paths": 320, "bvie": {"kernel": {"tag": "constant", "r": 1.0}}})",
            "bvie");
    expect2("bvie_nan_table",
            R"({"steps": 2, "paths": 320, "bvie": {"c": 1.0, "kernel": {"tag": "table",
                "values": [[1.0, 1.0, 1.0], [1.0, null, 1.0], [1.0, 1.0, 1.0]]}}})",
            "bvie");

    // The message names the offending field.
    auto cfg = dir / "named.json";
    write_file(cfg, R"({"steps": 1, "paths": 320})");
    const int status =
        std::system((kExe + " solve --config " + cfg.string() + " 2>" + (dir / "err.txt").string() +
                     " >/dev/null")
                        .c_str());
    CHECK(WEXITSTATUS(status) == 2);
    CHECK(read_file(dir / "err.txt").find("steps") != std::string::npos);

    CHECK(run(kExe + " solve --config " + (dir / "missing_file.json").string()) == 2);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run(kExe) == 2);                       // no subcommand
    CHECK(run(kExe + " solve") == 2);            // missing --config
    CHECK(run(kExe + " explode --config x") == 2);
    auto dir = fresh_dir("usage");
    auto cfg = dir / "config.json";
    write_file(cfg, kZeroConfig);
    CHECK(run(kExe + " solve --config " + cfg.string() + " --threads 0") == 2);
    CHECK(run(kExe + " --help") == 0);
}

TEST_CASE("a diverging iteration exits with code 3") {
    auto dir = fresh_dir("diverge");
    auto cfg = dir / "config.json";
    write_file(cfg, R"({
      "horizon": 1.0, "steps": 8, "paths": 320, "seed": 5,
      "generator": {"tag": "linear", "l1": 6.0, "l2": 0.0},
      "terminal": {"tag": "constant", "c": 1.0},
      "solver": {"beta": 0.0, "max_iter": 25}
    })");
    CHECK(run(kExe + " solve --config " + cfg.string() + " --out " + dir.string()) == 3);
}

TEST_CASE("axiom findings are results, strict mode turns them into failures") {
    auto dir = fresh_dir("axioms");
    auto cfg = dir / "config.json";
    write_file(cfg, R"({
      "horizon": 1.0, "steps": 16, "paths": 2000, "seed": 11,
      "axioms": {"battery": [
        {"form": "linear", "l1": 0.1, "l2": 0.2},
        {"form": "quadratic", "a": 1.0, "horizon": 0.5, "claim_scale": 0.5}
      ]}
    })");

    CHECK(run(kExe + " axioms --config " + cfg.string() + " --out " + dir.string()) == 0);
    auto report = read_report(dir);
    const auto& entries = report.at("results").at("entries");
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].at("all_pass").get<bool>());
    bool quadratic_flagged = false;
    for (const auto& check : entries[1].at("checks")) {
        if (check.at("axiom").get<std::string>() == "positive_homogeneity")
            quadratic_flagged = !check.at("pass").get<bool>();
    }
    CHECK(quadratic_flagged);
    CHECK(!entries[1].at("all_pass").get<bool>());

    CHECK(run(kExe + " axioms --config " + cfg.string() + " --out " + dir.string() + " --strict") ==
          4);
}

TEST_CASE("output directory falls back to the environment variable") {
    auto dir = fresh_dir("env");
    auto env_dir = fresh_dir("env_target");
    auto flag_dir = fresh_dir("flag_target");
    auto cfg = dir / "config.json";
    write_file(cfg, kZeroConfig);

    CHECK(run("BSVIE_OUT_DIR=" + env_dir.string() + " " + kExe + " solve --config " +
              cfg.string()) == 0);
    CHECK(fs::exists(env_dir / "report.json"));

    // An explicit flag wins over the environment.
    CHECK(run("BSVIE_OUT_DIR=" + env_dir.string() + " " + kExe + " risk --config " + cfg.string() +
              " --out " + flag_dir.string()) == 0);
    CHECK(fs::exists(flag_dir / "report.json"));
    CHECK(!fs::exists(env_dir / "risk_slices.csv"));
}

TEST_CASE("deterministic translation table matches the exponential") {
    auto dir = fresh_dir("bvie");
    auto cfg = dir / "config.json";
    write_file(cfg, R"({
      "horizon": 1.0, "steps": 64, "paths": 320, "seed": 1,
      "bvie": {"kernel": {"tag": "constant", "r": 1.0}, "c": 1.0}
    })");
    CHECK(run(kExe + " bvie --config " + cfg.string() + " --out " + dir.string()) == 0);
    auto report = read_report(dir);
    CHECK(std::abs(report.at("results").at("ystar0").get<double>() + std::exp(1.0)) <= 1e-3);
    CHECK(report.at("results").at("abs_error").get<double>() <= 1e-3);
    CHECK(read_file(dir / "bvie_table.csv").rfind("t,ystar\n", 0) == 0);
}

TEST_CASE("counterexample verdicts separate sure from random claims") {
    auto dir = fresh_dir("counter");
    auto cfg = dir / "config.json";
    write_file(cfg, R"({
      "horizon": 1.0, "steps": 16, "paths": 2000, "seed": 11,
      "counterexample": {"c": 1.0}
    })");
    CHECK(run(kExe + " counterexample --config " + cfg.string() + " --out " + dir.string()) == 0);
    CHECK(read_report(dir).at("results").at("verdict").get<std::string>() == "random");
    CHECK(fs::exists(dir / "counterexample_slices.csv"));

    auto cfg0 = dir / "config0.json";
    write_file(cfg0, R"({
      "horizon": 1.0, "steps": 16, "paths": 2000, "seed": 11,
      "counterexample": {"c": 0.0}
    })");
    auto dir0 = fresh_dir("counter0");
    CHECK(run(kExe + " counterexample --config " + cfg0.string() + " --out " + dir0.string()) == 0);
    CHECK(read_report(dir0).at("results").at("verdict").get<std::string>() == "deterministic");
}

TEST_CASE("refinement ladder shows first-order decay against the closed form") {
    auto dir = fresh_dir("conv");
    auto cfg = dir / "config.json";
    write_file(cfg, R"({
      "horizon": 1.0, "steps": 16, "paths": 500, "seed": 11,
      "generator": {"tag": "linear", "l1": 0.1, "l2": 0.0},
      "terminal": {"tag": "constant", "c": 1.0},
      "convergence": {"target": "solver", "steps": [8, 16, 32]}
    })");
    CHECK(run(kExe + " convergence --config " + cfg.string() + " --out " + dir.string()) == 0);
    auto report = read_report(dir);
    const auto errors = report.at("results").at("errors").get<std::vector<double>>();
    REQUIRE(errors.size() == 3);
    CHECK(errors[0] > errors[1]);
    CHECK(errors[1] > errors[2]);
    CHECK(errors[1] / errors[2] >= 1.4);
    CHECK(errors[1] / errors[2] <= 3.0);
    CHECK(report.at("results").at("reference_mode").get<std::string>() == "closed_form");

    const std::string csv = read_file(dir / "convergence.csv");
    CHECK(csv.rfind("steps,paths,y0,error,ratio\n", 0) == 0);
}
