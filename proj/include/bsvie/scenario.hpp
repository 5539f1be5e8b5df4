#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bsvie/bvie.hpp"
#include "bsvie/generator.hpp"
#include "bsvie/path_ensemble.hpp"
#include "bsvie/regression.hpp"
#include "bsvie/risk.hpp"
#include "bsvie/solver.hpp"
#include "bsvie/time_grid.hpp"

namespace bsvie {

// One experiment described by a JSON document. Parsing validates every field
// against the engine preconditions and throws ConfigError naming the field;
// `resolved` is the document with all defaults filled in, embedded verbatim in
// every report.
struct Scenario {
    double horizon = 1.0;
    int steps = 32;
    int paths = 4096;
    int brownian_dim = 1;
    std::uint64_t seed = 1;

    std::string generator_tag = "zero";
    std::string terminal_tag = "constant";
    GeneratorSpec generator;
    TerminalSpec terminal;
    RiskGenerator risk; // the same driver wrapped for the risk-measure entry points

    BasisSpec basis;
    PicardOptions solver;

    nlohmann::json raw;      // original document (command blocks parsed lazily)
    nlohmann::json resolved; // scenario-level fields with defaults applied

    TimeGrid grid() const;
    PathEnsemble sample() const;
};

Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);

// One battery run: a driver plus its own ensemble shape (the negative control
// runs at a reduced scale where its iteration still contracts).
struct BatteryEntry {
    RiskGenerator risk;
    double horizon = 1.0;
    int steps = 32;
    int paths = 4096;
    std::uint64_t seed = 1;
    BatteryConfig battery;
};

struct AxiomsCommand {
    std::vector<BatteryEntry> entries;
    nlohmann::json resolved;
};

struct BvieCommand {
    KernelSpec kernel;
    std::string kernel_tag = "constant";
    double c = 1.0;
    double tol = 1e-12;
    int max_iter = 200;
    std::optional<double> reference; // closed-form value at t = 0, when known
    nlohmann::json resolved;
};

struct CounterexampleCommand {
    double claim_level = 1.0;
    nlohmann::json resolved;
};

struct ConvergenceCommand {
    std::string target = "solver"; // "solver" | "bvie"
    std::vector<int> steps_ladder;
    std::vector<int> paths_ladder; // parallel to steps_ladder
    std::optional<double> reference;
    nlohmann::json resolved;
};

// Each reader pulls its block from scenario.raw; missing required fields throw
// ConfigError only when the corresponding command actually runs.
AxiomsCommand parse_axioms_command(const Scenario& scenario);
BvieCommand parse_bvie_command(const Scenario& scenario);
CounterexampleCommand parse_counterexample_command(const Scenario& scenario);
ConvergenceCommand parse_convergence_command(const Scenario& scenario);

} // namespace bsvie
