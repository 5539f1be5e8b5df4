#include "bsvie/scenario.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "bsvie/errors.hpp"

namespace bsvie {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
    throw ConfigError("config field '" + field + "': " + what);
}

std::string qual(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

const json* find(const json& parent, const std::string& key) {
    if (!parent.is_object()) return nullptr;
    const auto it = parent.find(key);
    return it == parent.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& field) {
    if (!v.is_number()) fail(field, "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(field, "must be finite");
    return d;
}

double require_number(const json& parent, const std::string& path, const std::string& key) {
    const json* v = find(parent, key);
    if (!v) fail(qual(path, key), "required");
    return as_number(*v, qual(path, key));
}

double number_or(const json& parent, const std::string& path, const std::string& key,
                 double fallback) {
    const json* v = find(parent, key);
    return v ? as_number(*v, qual(path, key)) : fallback;
}

long long as_integer(const json& v, const std::string& field) {
    if (v.is_number_integer() || v.is_number_unsigned()) return v.get<long long>();
    fail(field, "must be an integer");
}

int int_or(const json& parent, const std::string& path, const std::string& key, int fallback) {
    const json* v = find(parent, key);
    if (!v) return fallback;
    const long long n = as_integer(*v, qual(path, key));
    if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max())
        fail(qual(path, key), "out of range");
    return static_cast<int>(n);
}

std::uint64_t seed_or(const json& parent, const std::string& path, const std::string& key,
                      std::uint64_t fallback) {
    const json* v = find(parent, key);
    if (!v) return fallback;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer()) {
        const long long n = v->get<long long>();
        if (n < 0) fail(qual(path, key), "must be >= 0");
        return static_cast<std::uint64_t>(n);
    }
    fail(qual(path, key), "must be an integer");
}

std::string string_or(const json& parent, const std::string& path, const std::string& key,
                      const std::string& fallback) {
    const json* v = find(parent, key);
    if (!v) return fallback;
    if (!v->is_string()) fail(qual(path, key), "must be a string");
    return v->get<std::string>();
}

std::string require_string(const json& parent, const std::string& path, const std::string& key) {
    const json* v = find(parent, key);
    if (!v) fail(qual(path, key), "required");
    if (!v->is_string()) fail(qual(path, key), "must be a string");
    return v->get<std::string>();
}

// Tabulated coefficient on the (N+1) x (N+1) slice grid; continuous (t, s)
// arguments are snapped back to the nearest slice indices.
struct TableCoefficient {
    std::shared_ptr<const std::vector<double>> values;
    int steps = 1;
    double horizon = 1.0;

    int index_of(double t) const {
        long k = std::lround(t * steps / horizon);
        if (k < 0) k = 0;
        if (k > steps) k = steps;
        return static_cast<int>(k);
    }
    double at(double t, double s) const {
        return (*values)[static_cast<std::size_t>(index_of(t)) * (steps + 1) + index_of(s)];
    }
};

TableCoefficient parse_table(const json& parent, const std::string& field, int steps,
                             double horizon, bool required) {
    const json* v = parent.is_object() && parent.contains(field.substr(field.rfind('.') + 1))
                        ? &parent.at(field.substr(field.rfind('.') + 1))
                        : nullptr;
    auto values = std::make_shared<std::vector<double>>(
        static_cast<std::size_t>(steps + 1) * (steps + 1), 0.0);
    if (!v) {
        if (required) fail(field, "required");
        return TableCoefficient{values, steps, horizon};
    }
    if (!v->is_array() || static_cast<int>(v->size()) != steps + 1)
        fail(field, "must be an array of " + std::to_string(steps + 1) + " rows");
    for (int i = 0; i <= steps; ++i) {
        const json& row = (*v)[i];
        if (!row.is_array() || static_cast<int>(row.size()) != steps + 1)
            fail(field + "[" + std::to_string(i) + "]",
                 "must be an array of " + std::to_string(steps + 1) + " numbers");
        for (int j = 0; j <= steps; ++j) {
            const json& cell = row[j];
            const std::string where =
                field + "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
            if (!cell.is_number()) fail(where, "must be a number");
            const double d = cell.get<double>();
            if (!std::isfinite(d)) fail(where, "must be finite");
            (*values)[static_cast<std::size_t>(i) * (steps + 1) + j] = d;
        }
    }
    return TableCoefficient{values, steps, horizon};
}

double table_max_abs(const TableCoefficient& table) {
    double m = 0.0;
    for (double v : *table.values) m = std::max(m, std::abs(v));
    return m;
}

RiskGenerator make_kappa_abs_z_risk(double kappa) {
    RiskGenerator r;
    r.generator = GeneratorSpec::kappa_abs_z(kappa);
    r.name = "kappa_abs_z";
    r.linear = false;
    r.y_coefficient_deterministic = true;
    r.y_kernel = [](double, double) { return 0.0; };
    return r;
}

void parse_generator(const json& doc, Scenario& s) {
    const json* blockp = find(doc, "generator");
    if (blockp && !blockp->is_object()) fail("generator", "must be an object");
    const json block = blockp ? *blockp : json::object();
    const std::string tag = string_or(block, "generator", "tag", "zero");

    json resolved;
    resolved["tag"] = tag;
    if (tag == "zero") {
        s.risk = RiskGenerator::linear_form(0.0, 0.0);
        s.risk.name = "zero";
        s.generator = s.risk.generator;
    } else if (tag == "linear") {
        const double l1 = number_or(block, "generator", "l1", 0.0);
        const double l2 = number_or(block, "generator", "l2", 0.0);
        s.risk = RiskGenerator::linear_form(l1, l2);
        s.generator = s.risk.generator;
        resolved["l1"] = l1;
        resolved["l2"] = l2;
    } else if (tag == "rate") {
        const double r1 = number_or(block, "generator", "r1", 0.0);
        const double kappa = number_or(block, "generator", "kappa", 0.0);
        s.risk = RiskGenerator::rate_form(r1, kappa);
        s.generator = s.risk.generator;
        resolved["r1"] = r1;
        resolved["kappa"] = kappa;
    } else if (tag == "kappa_abs_z") {
        const double kappa = require_number(block, "generator", "kappa");
        s.risk = make_kappa_abs_z_risk(kappa);
        s.generator = s.risk.generator;
        resolved["kappa"] = kappa;
    } else if (tag == "quadratic") {
        const double a = number_or(block, "generator", "a", 1.0);
        s.risk = RiskGenerator::quadratic_form(a);
        s.generator = s.risk.generator;
        resolved["a"] = a;
    } else if (tag == "sin_modulated") {
        s.generator = sin_state_coefficient();
        s.risk = RiskGenerator::custom(s.generator, "sin_modulated");
    } else if (tag == "linear_table") {
        const TableCoefficient l1 =
            parse_table(block, "generator.l1_table", s.steps, s.horizon, true);
        const TableCoefficient l2 =
            parse_table(block, "generator.l2_table", s.steps, s.horizon, false);
        s.generator = GeneratorSpec::custom(
            [l1, l2](double t, double u, double y, std::span<const double> z,
                     std::span<const double>) {
                double zsum = 0.0;
                for (double v : z) zsum += v;
                return l1.at(t, u) * y + l2.at(t, u) * zsum;
            },
            table_max_abs(l1), table_max_abs(l2));
        s.risk = RiskGenerator::custom(s.generator, "linear_table");
        s.risk.linear = true;
        s.risk.y_coefficient_deterministic = true;
        s.risk.y_kernel = [l1](double t, double u) { return l1.at(t, u); };
        resolved["l1_table"] = block.value("l1_table", json::array());
        resolved["l2_table"] = block.value("l2_table", json::array());
    } else {
        fail("generator.tag", "unknown tag '" + tag + "'");
    }
    s.generator_tag = tag;
    s.resolved["generator"] = std::move(resolved);
}

void parse_terminal(const json& doc, Scenario& s) {
    const json* blockp = find(doc, "terminal");
    if (blockp && !blockp->is_object()) fail("terminal", "must be an object");
    const json block = blockp ? *blockp : json::object();
    const std::string tag = string_or(block, "terminal", "tag", "constant");

    json resolved;
    resolved["tag"] = tag;
    if (tag == "constant") {
        const double c = number_or(block, "terminal", "c", 1.0);
        s.terminal = TerminalSpec::constant(c);
        resolved["c"] = c;
    } else if (tag == "linear") {
        const double a = number_or(block, "terminal", "a", 1.0);
        const double b = number_or(block, "terminal", "b", 0.0);
        s.terminal = TerminalSpec::linear_terminal(a, b);
        resolved["a"] = a;
        resolved["b"] = b;
    } else if (tag == "call") {
        const double strike = number_or(block, "terminal", "strike", 0.0);
        s.terminal = TerminalSpec::call_on_w(strike);
        resolved["strike"] = strike;
    } else if (tag == "put") {
        const double strike = number_or(block, "terminal", "strike", 0.0);
        s.terminal = TerminalSpec::put_on_w(strike);
        resolved["strike"] = strike;
    } else {
        fail("terminal.tag", "unknown tag '" + tag + "'");
    }
    s.terminal_tag = tag;
    s.resolved["terminal"] = std::move(resolved);
}

void parse_solver(const json& doc, Scenario& s) {
    const json* blockp = find(doc, "solver");
    if (blockp && !blockp->is_object()) fail("solver", "must be an object");
    const json block = blockp ? *blockp : json::object();

    json resolved;
    if (const json* beta = find(block, "beta")) {
        const double b = as_number(*beta, "solver.beta");
        if (b < 0.0) fail("solver.beta", "must be >= 0");
        s.solver.beta = b;
        resolved["beta"] = b;
    } else {
        resolved["beta"] = nullptr;
    }
    s.solver.tol = number_or(block, "solver", "tol", 1e-4);
    if (!(s.solver.tol > 0.0)) fail("solver.tol", "must be > 0");
    s.solver.max_iter = int_or(block, "solver", "max_iter", 25);
    if (s.solver.max_iter < 1) fail("solver.max_iter", "must be >= 1");
    s.solver.forced_iterations = int_or(block, "solver", "forced_iterations", 0);
    if (s.solver.forced_iterations < 0) fail("solver.forced_iterations", "must be >= 0");
    s.solver.lipschitz_samples = int_or(block, "solver", "lipschitz_samples", 256);
    if (s.solver.lipschitz_samples < 0) fail("solver.lipschitz_samples", "must be >= 0");

    const std::string init = string_or(block, "solver", "init", "zero");
    if (init == "zero") {
        s.solver.init = InitialIterate::Zero;
    } else if (init == "terminal_propagated") {
        s.solver.init = InitialIterate::TerminalPropagated;
    } else {
        fail("solver.init", "must be 'zero' or 'terminal_propagated'");
    }

    s.basis.degree = int_or(block, "solver", "degree", 2);
    if (s.basis.degree < 0) fail("solver.degree", "must be >= 0");
    s.basis.ridge = number_or(block, "solver", "ridge", 1e-8);
    if (s.basis.ridge < 0.0) fail("solver.ridge", "must be >= 0");

    resolved["tol"] = s.solver.tol;
    resolved["max_iter"] = s.solver.max_iter;
    resolved["forced_iterations"] = s.solver.forced_iterations;
    resolved["lipschitz_samples"] = s.solver.lipschitz_samples;
    resolved["init"] = init;
    resolved["degree"] = s.basis.degree;
    resolved["ridge"] = s.basis.ridge;
    s.resolved["solver"] = std::move(resolved);
}

void check_paths_support_basis(int paths, int dim, int degree, const std::string& field) {
    const std::size_t p = polynomial_basis_size(dim, degree);
    if (p * 10 >= static_cast<std::size_t>(paths))
        fail(field, "must exceed 10x the regression basis size (basis has " +
                        std::to_string(p) + " functions)");
}

} // namespace

TimeGrid Scenario::grid() const { return TimeGrid(horizon, steps); }

PathEnsemble Scenario::sample() const { return sample_paths(grid(), paths, brownian_dim, seed); }

Scenario parse_scenario(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    Scenario s;
    s.raw = doc;

    s.horizon = number_or(doc, "", "horizon", 1.0);
    if (!(s.horizon > 0.0)) fail("horizon", "must be > 0");
    s.steps = int_or(doc, "", "steps", 32);
    if (s.steps < 2) fail("steps", "must be an integer >= 2");
    s.paths = int_or(doc, "", "paths", 4096);
    if (s.paths < 2) fail("paths", "must be an integer >= 2");
    s.brownian_dim = int_or(doc, "", "brownian_dim", 1);
    if (s.brownian_dim < 1) fail("brownian_dim", "must be an integer >= 1");
    s.seed = seed_or(doc, "", "seed", 1);

    s.resolved["horizon"] = s.horizon;
    s.resolved["steps"] = s.steps;
    s.resolved["paths"] = s.paths;
    s.resolved["brownian_dim"] = s.brownian_dim;
    s.resolved["seed"] = s.seed;

    parse_generator(doc, s);
    parse_terminal(doc, s);
    parse_solver(doc, s);
    check_paths_support_basis(s.paths, s.brownian_dim, s.basis.degree, "paths");
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_scenario(doc);
}

AxiomsCommand parse_axioms_command(const Scenario& scenario) {
    const json* block = find(scenario.raw, "axioms");
    if (!block) fail("axioms", "required for this command");
    if (!block->is_object()) fail("axioms", "must be an object");
    const json* list = find(*block, "battery");
    if (!list || !list->is_array() || list->empty())
        fail("axioms.battery", "must be a non-empty array of driver entries");

    BatteryConfig base;
    base.claim_scale = number_or(*block, "axioms", "claim_scale", 1.0);
    base.shift = number_or(*block, "axioms", "shift", 0.7);
    base.lambda = number_or(*block, "axioms", "lambda", 2.0);
    base.forced_iterations = int_or(*block, "axioms", "forced_iterations", 8);
    base.tolerance_multiplier = number_or(*block, "axioms", "tolerance_multiplier", 3.0);
    if (const json* t = find(*block, "tolerance"))
        base.tolerance_override = as_number(*t, "axioms.tolerance");
    base.from_slice = int_or(*block, "axioms", "from_slice", -1);

    AxiomsCommand cmd;
    cmd.resolved["claim_scale"] = base.claim_scale;
    cmd.resolved["shift"] = base.shift;
    cmd.resolved["lambda"] = base.lambda;
    cmd.resolved["forced_iterations"] = base.forced_iterations;
    cmd.resolved["tolerance_multiplier"] = base.tolerance_multiplier;
    cmd.resolved["battery"] = json::array();

    int k = 0;
    for (const json& entry : *list) {
        const std::string path = "axioms.battery[" + std::to_string(k) + "]";
        if (!entry.is_object()) fail(path, "must be an object");

        BatteryEntry be;
        be.horizon = number_or(entry, path, "horizon", scenario.horizon);
        if (!(be.horizon > 0.0)) fail(qual(path, "horizon"), "must be > 0");
        be.steps = int_or(entry, path, "steps", scenario.steps);
        if (be.steps < 2) fail(qual(path, "steps"), "must be an integer >= 2");
        be.paths = int_or(entry, path, "paths", scenario.paths);
        if (be.paths < 2) fail(qual(path, "paths"), "must be an integer >= 2");
        be.seed = seed_or(entry, path, "seed", scenario.seed);
        be.battery = base;
        be.battery.claim_scale = number_or(entry, path, "claim_scale", base.claim_scale);
        if (!(be.battery.claim_scale > 0.0)) fail(qual(path, "claim_scale"), "must be > 0");

        json resolved_entry;
        const std::string form = require_string(entry, path, "form");
        resolved_entry["form"] = form;
        if (form == "linear") {
            const double l1 = number_or(entry, path, "l1", 0.0);
            const double l2 = number_or(entry, path, "l2", 0.0);
            be.risk = RiskGenerator::linear_form(l1, l2);
            resolved_entry["l1"] = l1;
            resolved_entry["l2"] = l2;
        } else if (form == "rate") {
            const double r1 = number_or(entry, path, "r1", 0.0);
            const double kappa = number_or(entry, path, "kappa", 0.0);
            be.risk = RiskGenerator::rate_form(r1, kappa);
            resolved_entry["r1"] = r1;
            resolved_entry["kappa"] = kappa;
        } else if (form == "kappa_abs_z") {
            const double kappa = require_number(entry, path, "kappa");
            be.risk = make_kappa_abs_z_risk(kappa);
            resolved_entry["kappa"] = kappa;
        } else if (form == "quadratic") {
            const double a = number_or(entry, path, "a", 1.0);
            be.risk = RiskGenerator::quadratic_form(a);
            resolved_entry["a"] = a;
        } else {
            fail(qual(path, "form"), "unknown form '" + form + "'");
        }

        resolved_entry["horizon"] = be.horizon;
        resolved_entry["steps"] = be.steps;
        resolved_entry["paths"] = be.paths;
        resolved_entry["seed"] = be.seed;
        resolved_entry["claim_scale"] = be.battery.claim_scale;
        cmd.resolved["battery"].push_back(std::move(resolved_entry));
        cmd.entries.push_back(std::move(be));
        ++k;
    }
    return cmd;
}

BvieCommand parse_bvie_command(const Scenario& scenario) {
    const json* block = find(scenario.raw, "bvie");
    if (!block) fail("bvie", "required for this command");
    if (!block->is_object()) fail("bvie", "must be an object");

    BvieCommand cmd;
    cmd.c = require_number(*block, "bvie", "c");
    cmd.tol = number_or(*block, "bvie", "tol", 1e-12);
    if (!(cmd.tol > 0.0)) fail("bvie.tol", "must be > 0");
    cmd.max_iter = int_or(*block, "bvie", "max_iter", 200);
    if (cmd.max_iter < 1) fail("bvie.max_iter", "must be >= 1");

    const json* kernel = find(*block, "kernel");
    if (!kernel) fail("bvie.kernel", "required");
    if (!kernel->is_object()) fail("bvie.kernel", "must be an object");
    cmd.kernel_tag = require_string(*kernel, "bvie.kernel", "tag");
    cmd.resolved["kernel"]["tag"] = cmd.kernel_tag;
    if (cmd.kernel_tag == "constant") {
        const double r = require_number(*kernel, "bvie.kernel", "r");
        cmd.kernel = KernelSpec::constant(r);
        cmd.resolved["kernel"]["r"] = r;
        cmd.reference = closed_form_translation([r](double) { return r; }, cmd.c, 0.0,
                                                scenario.horizon);
    } else if (cmd.kernel_tag == "table") {
        const TableCoefficient table =
            parse_table(*kernel, "bvie.kernel.values", scenario.steps, scenario.horizon, true);
        cmd.kernel = KernelSpec::general([table](double t, double s) { return table.at(t, s); });
        cmd.resolved["kernel"]["values"] = kernel->value("values", json::array());
    } else {
        fail("bvie.kernel.tag", "unknown tag '" + cmd.kernel_tag + "'");
    }
    if (const json* ref = find(*block, "reference"))
        cmd.reference = as_number(*ref, "bvie.reference");

    cmd.resolved["c"] = cmd.c;
    cmd.resolved["tol"] = cmd.tol;
    cmd.resolved["max_iter"] = cmd.max_iter;
    if (cmd.reference)
        cmd.resolved["reference"] = *cmd.reference;
    else
        cmd.resolved["reference"] = nullptr;
    return cmd;
}

CounterexampleCommand parse_counterexample_command(const Scenario& scenario) {
    const json* block = find(scenario.raw, "counterexample");
    if (!block) fail("counterexample", "required for this command");
    if (!block->is_object()) fail("counterexample", "must be an object");
    CounterexampleCommand cmd;
    cmd.claim_level = require_number(*block, "counterexample", "c");
    cmd.resolved["c"] = cmd.claim_level;
    return cmd;
}

ConvergenceCommand parse_convergence_command(const Scenario& scenario) {
    const json* block = find(scenario.raw, "convergence");
    if (!block) fail("convergence", "required for this command");
    if (!block->is_object()) fail("convergence", "must be an object");

    ConvergenceCommand cmd;
    cmd.target = string_or(*block, "convergence", "target", "solver");
    if (cmd.target != "solver" && cmd.target != "bvie")
        fail("convergence.target", "must be 'solver' or 'bvie'");

    const json* steps = find(*block, "steps");
    if (!steps || !steps->is_array()) fail("convergence.steps", "must be an array of integers");
    if (steps->size() < 2) fail("convergence.steps", "ladder needs at least 2 rungs");
    int k = 0;
    for (const json& rung : *steps) {
        const std::string where = "convergence.steps[" + std::to_string(k) + "]";
        const long long n = as_integer(rung, where);
        if (n < 2) fail(where, "must be >= 2");
        cmd.steps_ladder.push_back(static_cast<int>(n));
        ++k;
    }

    if (const json* paths = find(*block, "paths")) {
        if (paths->is_array()) {
            if (paths->size() != cmd.steps_ladder.size())
                fail("convergence.paths", "must match the steps ladder length");
            int i = 0;
            for (const json& rung : *paths) {
                const std::string where = "convergence.paths[" + std::to_string(i) + "]";
                const long long m = as_integer(rung, where);
                if (m < 2) fail(where, "must be >= 2");
                cmd.paths_ladder.push_back(static_cast<int>(m));
                ++i;
            }
        } else {
            const long long m = as_integer(*paths, "convergence.paths");
            if (m < 2) fail("convergence.paths", "must be >= 2");
            cmd.paths_ladder.assign(cmd.steps_ladder.size(), static_cast<int>(m));
        }
    } else {
        cmd.paths_ladder.assign(cmd.steps_ladder.size(), scenario.paths);
    }

    if (const json* ref = find(*block, "reference"))
        cmd.reference = as_number(*ref, "convergence.reference");

    cmd.resolved["target"] = cmd.target;
    cmd.resolved["steps"] = cmd.steps_ladder;
    cmd.resolved["paths"] = cmd.paths_ladder;
    if (cmd.reference)
        cmd.resolved["reference"] = *cmd.reference;
    else
        cmd.resolved["reference"] = nullptr;
    return cmd;
}

} // namespace bsvie
