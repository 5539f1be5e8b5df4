// Command-line front end: scenario configs in, reports and CSV tables out.
// Exit codes: 0 ok, 2 config error, 3 solver divergence, 4 axiom failure
// under --strict.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"

#include "bsvie/bvie.hpp"
#include "bsvie/errors.hpp"
#include "bsvie/parallel.hpp"
#include "bsvie/report_io.hpp"
#include "bsvie/risk.hpp"
#include "bsvie/scenario.hpp"
#include "bsvie/solver.hpp"

namespace {

using bsvie::Scenario;

struct Options {
    std::string config;
    std::string out;
    std::optional<long long> seed;
    int threads = 1;
    bool strict = false;
};

std::string resolve_out_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("BSVIE_OUT_DIR"); env && *env) return env;
    return ".";
}

std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

nlohmann::json lipschitz_json(const bsvie::LipschitzReport& r) {
    nlohmann::json j;
    j["checked"] = r.checked;
    j["declared_y"] = r.declared_y;
    j["declared_z"] = r.declared_z;
    j["max_ratio_y"] = r.max_ratio_y;
    j["max_ratio_z"] = r.max_ratio_z;
    j["within_y"] = r.within_y;
    j["within_z"] = r.within_z;
    j["base_term_estimate"] = r.base_term_estimate;
    j["finite"] = r.finite;
    return j;
}

nlohmann::json solver_json(const bsvie::SolverReport& r) {
    nlohmann::json j;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["beta_used"] = r.beta_used;
    j["successive_norms"] = r.successive_norms;
    j["contraction_ratios"] = r.contraction_ratios;
    j["lipschitz"] = lipschitz_json(r.lipschitz);
    return j;
}

nlohmann::json check_json(const bsvie::AxiomCheck& c) {
    nlohmann::json j;
    j["axiom"] = c.axiom;
    j["pass"] = c.pass;
    j["statistic"] = c.statistic;
    j["tolerance"] = c.tolerance;
    j["detail"] = c.detail;
    return j;
}

// Per-slice cross-sectional summary shared by solve and risk output.
struct SliceStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

SliceStats slice_stats(const bsvie::AdaptedGrid& y) {
    const int slices = y.slices();
    const int paths = y.paths();
    SliceStats out;
    out.mean.resize(slices);
    out.stddev.resize(slices);
    for (int i = 0; i < slices; ++i) {
        const auto v = y.slice(i);
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= paths;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        out.mean[i] = mean;
        out.stddev[i] = paths > 1 ? std::sqrt(ss / (paths - 1)) : 0.0;
    }
    return out;
}

// Standard error of the time-zero value: spread of the final accumulator
// A_0 = psi(0, W(T)) + sum_j g(0, t_j, Y_j, Z(t_j, 0), W_j) dt whose plain
// mean the solver reports as Y(0).
double y0_standard_error(const bsvie::GeneratorSpec& generator,
                         const bsvie::TerminalSpec& terminal,
                         const bsvie::MSolutionEstimate& est,
                         const bsvie::PathEnsemble& ensemble) {
    const int n = ensemble.steps();
    const int paths = ensemble.paths();
    const int d = ensemble.dim();
    const double dt = ensemble.grid().dt();
    const auto wn = ensemble.state_slice(n);

    std::vector<double> a(paths, 0.0);
    for (int m = 0; m < paths; ++m) {
        const auto w_term = wn.subspan(static_cast<std::size_t>(m) * d, d);
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            const auto z = est.z.cell(j, 0).subspan(static_cast<std::size_t>(m) * d, d);
            const auto w = ensemble.state_slice(j).subspan(static_cast<std::size_t>(m) * d, d);
            acc += generator(0.0, ensemble.grid().time(j), est.y.value(m, j), z, w);
        }
        a[m] = terminal(0.0, w_term) + dt * acc;
    }
    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= paths;
    double ss = 0.0;
    for (double v : a) ss += (v - mean) * (v - mean);
    return paths > 1 ? std::sqrt(ss / (paths - 1) / paths) : 0.0;
}

void emit_value_artifacts(const Scenario& scenario, const bsvie::MSolutionEstimate& est,
                          const bsvie::PathEnsemble& ensemble, const std::string& command,
                          const std::string& value_name, const std::string& csv_name,
                          const std::string& outdir, const bsvie::GeneratorSpec& generator,
                          const bsvie::TerminalSpec& solved_terminal) {
    const int n = ensemble.steps();
    const SliceStats stats = slice_stats(est.y);
    const std::vector<double> residuals = bsvie::m_condition_residuals(est, ensemble);
    const double se = y0_standard_error(generator, solved_terminal, est, ensemble);

    bsvie::CsvTable csv;
    csv.header = {"t", "mean" + value_name, "std" + value_name, "mResidual"};
    for (int i = 0; i <= n; ++i)
        csv.rows.push_back({ensemble.grid().time(i), stats.mean[i], stats.stddev[i],
                            residuals[i]});
    bsvie::write_csv(join(outdir, csv_name), csv);

    double max_residual = 0.0;
    for (double r : residuals) max_residual = std::max(max_residual, r);

    nlohmann::json report = bsvie::report_envelope(command, scenario.resolved);
    nlohmann::json results;
    results["y0"] = est.y.value(0, 0);
    results["y0_standard_error"] = se;
    results["max_m_residual"] = max_residual;
    results["solver"] = solver_json(est.report);
    report["results"] = results;
    bsvie::write_report(join(outdir, "report.json"), report);

    std::printf("%s: %s(0) = %.10g +/- %.2g  (iterations %d, converged %s)\n", command.c_str(),
                value_name.c_str(), est.y.value(0, 0), se, est.report.iterations,
                est.report.converged ? "yes" : "no");
    std::printf("wrote %s and %s\n", join(outdir, "report.json").c_str(),
                join(outdir, csv_name).c_str());
}

int run_solve(const Scenario& scenario, const std::string& outdir) {
    const bsvie::PathEnsemble ensemble = scenario.sample();
    const bsvie::MSolutionEstimate est = bsvie::picard_solve(
        scenario.generator, scenario.terminal, ensemble, scenario.basis, scenario.solver);
    emit_value_artifacts(scenario, est, ensemble, "solve", "Y", "solve_slices.csv", outdir,
                         scenario.generator, scenario.terminal);
    return 0;
}

int run_risk(const Scenario& scenario, const std::string& outdir) {
    const bsvie::PathEnsemble ensemble = scenario.sample();
    const bsvie::MSolutionEstimate est =
        bsvie::rho(scenario.risk, scenario.terminal, ensemble, scenario.basis, scenario.solver);
    emit_value_artifacts(scenario, est, ensemble, "risk", "Rho", "risk_slices.csv", outdir,
                         scenario.risk.generator, scenario.terminal.negated());
    return 0;
}

int run_axioms(const Scenario& scenario, const std::string& outdir, bool strict) {
    const bsvie::AxiomsCommand cmd = bsvie::parse_axioms_command(scenario);

    std::map<std::tuple<double, int, int, std::uint64_t>, std::shared_ptr<bsvie::PathEnsemble>>
        ensembles;
    auto ensemble_for = [&](const bsvie::BatteryEntry& e) {
        const auto key = std::make_tuple(e.horizon, e.steps, e.paths, e.seed);
        auto it = ensembles.find(key);
        if (it == ensembles.end()) {
            auto ens = std::make_shared<bsvie::PathEnsemble>(bsvie::sample_paths(
                bsvie::TimeGrid(e.horizon, e.steps), e.paths, scenario.brownian_dim, e.seed));
            it = ensembles.emplace(key, std::move(ens)).first;
        }
        return it->second;
    };

    nlohmann::json entries = nlohmann::json::array();
    bool all_pass = true;
    std::printf("%-14s %-30s %-7s %-13s %-13s\n", "driver", "axiom", "result", "statistic",
                "tolerance");
    for (const bsvie::BatteryEntry& entry : cmd.entries) {
        const auto ensemble = ensemble_for(entry);
        const bsvie::CoherenceReport rep =
            bsvie::coherence_report(entry.risk, *ensemble, scenario.basis, entry.battery);
        nlohmann::json jentry;
        jentry["driver"] = rep.generator_name;
        jentry["tolerance"] = rep.tolerance;
        jentry["rmse_y"] = rep.rmse_y;
        jentry["rmse_z"] = rep.rmse_z;
        jentry["all_pass"] = rep.all_pass;
        jentry["checks"] = nlohmann::json::array();
        for (const bsvie::AxiomCheck& c : rep.checks) {
            jentry["checks"].push_back(check_json(c));
            std::printf("%-14s %-30s %-7s %-13.6g %-13.6g\n", rep.generator_name.c_str(),
                        c.axiom.c_str(), c.pass ? "pass" : "FAIL", c.statistic, c.tolerance);
        }
        jentry["translation_curve"] = rep.translation.shift_curve;
        jentry["translation_reference"] = rep.translation.reference;
        entries.push_back(std::move(jentry));
        all_pass = all_pass && rep.all_pass;
    }

    nlohmann::json config = scenario.resolved;
    config["axioms"] = cmd.resolved;
    nlohmann::json report = bsvie::report_envelope("axioms", config);
    report["results"]["entries"] = entries;
    report["results"]["all_pass"] = all_pass;
    bsvie::write_report(join(outdir, "report.json"), report);
    std::printf("wrote %s\n", join(outdir, "report.json").c_str());

    if (!all_pass && strict) {
        std::fprintf(stderr, "axiom check failed and --strict is set\n");
        return 4;
    }
    return 0;
}

int run_bvie(const Scenario& scenario, const std::string& outdir) {
    const bsvie::BvieCommand cmd = bsvie::parse_bvie_command(scenario);
    const bsvie::TimeGrid grid = scenario.grid();
    const std::vector<double> y =
        bsvie::solve_bvie(cmd.kernel, cmd.c, grid, cmd.tol, cmd.max_iter);

    bsvie::CsvTable csv;
    csv.header = {"t", "ystar"};
    for (int i = 0; i <= grid.steps(); ++i) csv.rows.push_back({grid.time(i), y[i]});
    bsvie::write_csv(join(outdir, "bvie_table.csv"), csv);

    nlohmann::json config = scenario.resolved;
    config["bvie"] = cmd.resolved;
    nlohmann::json report = bsvie::report_envelope("bvie", config);
    report["results"]["ystar0"] = y.front();
    if (cmd.reference) {
        report["results"]["reference"] = *cmd.reference;
        report["results"]["abs_error"] = std::abs(y.front() - *cmd.reference);
    } else {
        report["results"]["reference"] = nullptr;
    }
    bsvie::write_report(join(outdir, "report.json"), report);

    std::printf("bvie: Y*(0) = %.10g", y.front());
    if (cmd.reference) std::printf("  (reference %.10g)", *cmd.reference);
    std::printf("\nwrote %s and %s\n", join(outdir, "report.json").c_str(),
                join(outdir, "bvie_table.csv").c_str());
    return 0;
}

int run_counterexample(const Scenario& scenario, const std::string& outdir) {
    const bsvie::CounterexampleCommand cmd = bsvie::parse_counterexample_command(scenario);
    const bsvie::PathEnsemble ensemble = scenario.sample();
    const bsvie::CounterexampleReport rep =
        bsvie::sin_counterexample(cmd.claim_level, ensemble, scenario.basis, scenario.solver);

    const int n = ensemble.steps();
    bsvie::CsvTable csv;
    csv.header = {"t", "mean", "variance", "standardError"};
    for (int i = 0; i <= n; ++i)
        csv.rows.push_back({ensemble.grid().time(i), rep.mean[i], rep.variance[i],
                            rep.standard_error[i]});
    bsvie::write_csv(join(outdir, "counterexample_slices.csv"), csv);

    const std::string verdict =
        rep.random_at_mid ? "random" : (rep.certain_at_mid ? "deterministic" : "inconclusive");

    nlohmann::json config = scenario.resolved;
    config["counterexample"] = cmd.resolved;
    nlohmann::json report = bsvie::report_envelope("counterexample", config);
    nlohmann::json results;
    results["claim_level"] = rep.claim_level;
    results["mid_variance"] = rep.mid_variance;
    results["mid_standard_error"] = rep.mid_standard_error;
    results["verdict"] = verdict;
    results["z_proxy"] = rep.z_proxy;
    results["solver"] = solver_json(rep.solver);
    report["results"] = results;
    bsvie::write_report(join(outdir, "report.json"), report);

    std::printf("counterexample: c = %g, mid-slice variance %.6g (SE %.6g) -> %s\n",
                rep.claim_level, rep.mid_variance, rep.mid_standard_error, verdict.c_str());
    std::printf("wrote %s and %s\n", join(outdir, "report.json").c_str(),
                join(outdir, "counterexample_slices.csv").c_str());
    return 0;
}

int run_convergence(const Scenario& scenario, const std::string& outdir) {
    const bsvie::ConvergenceCommand cmd = bsvie::parse_convergence_command(scenario);

    std::optional<bsvie::BvieCommand> bvie;
    if (cmd.target == "bvie") bvie = bsvie::parse_bvie_command(scenario);

    std::vector<double> y0(cmd.steps_ladder.size(), 0.0);
    for (std::size_t k = 0; k < cmd.steps_ladder.size(); ++k) {
        const bsvie::TimeGrid grid(scenario.horizon, cmd.steps_ladder[k]);
        if (cmd.target == "solver") {
            const bsvie::PathEnsemble ensemble = bsvie::sample_paths(
                grid, cmd.paths_ladder[k], scenario.brownian_dim, scenario.seed);
            const bsvie::MSolutionEstimate est = bsvie::picard_solve(
                scenario.generator, scenario.terminal, ensemble, scenario.basis,
                scenario.solver);
            y0[k] = est.y.value(0, 0);
        } else {
            y0[k] = bsvie::solve_bvie(bvie->kernel, bvie->c, grid, bvie->tol,
                                      bvie->max_iter).front();
        }
    }

    std::optional<double> reference = cmd.reference;
    std::string reference_mode = "explicit";
    if (!reference && cmd.target == "bvie" && bvie->reference) {
        reference = bvie->reference;
        reference_mode = "closed_form";
    }
    if (!reference && cmd.target == "solver" && scenario.terminal_tag == "constant" &&
        (scenario.generator_tag == "zero" || scenario.generator_tag == "linear")) {
        // A nonrandom claim has no integrand, so only the y coefficient acts.
        const double c = scenario.resolved["terminal"]["c"].get<double>();
        const double l1 = scenario.generator_tag == "linear"
                              ? scenario.resolved["generator"]["l1"].get<double>()
                              : 0.0;
        reference = c * std::exp(l1 * scenario.horizon);
        reference_mode = "closed_form";
    }
    if (!reference) {
        reference = y0.back();
        reference_mode = "finest_rung";
    }

    bsvie::CsvTable csv;
    csv.header = {"steps", "paths", "y0", "error", "ratio"};
    std::vector<double> errors(y0.size(), 0.0);
    for (std::size_t k = 0; k < y0.size(); ++k) errors[k] = std::abs(y0[k] - *reference);
    for (std::size_t k = 0; k < y0.size(); ++k) {
        const double ratio =
            k > 0 && errors[k] > 0.0 ? errors[k - 1] / errors[k]
                                     : std::numeric_limits<double>::quiet_NaN();
        const int paths = cmd.target == "solver" ? cmd.paths_ladder[k] : 0;
        csv.rows.push_back({static_cast<double>(cmd.steps_ladder[k]),
                            static_cast<double>(paths), y0[k], errors[k], ratio});
    }
    bsvie::write_csv(join(outdir, "convergence.csv"), csv);

    nlohmann::json config = scenario.resolved;
    config["convergence"] = cmd.resolved;
    nlohmann::json report = bsvie::report_envelope("convergence", config);
    report["results"]["y0"] = y0;
    report["results"]["errors"] = errors;
    report["results"]["reference"] = *reference;
    report["results"]["reference_mode"] = reference_mode;
    bsvie::write_report(join(outdir, "report.json"), report);

    std::printf("convergence (%s): reference %.10g (%s)\n", cmd.target.c_str(), *reference,
                reference_mode.c_str());
    for (std::size_t k = 0; k < y0.size(); ++k)
        std::printf("  steps %5d: y0 = %.10g, error = %.3g\n", cmd.steps_ladder[k], y0[k],
                    errors[k]);
    std::printf("wrote %s and %s\n", join(outdir, "report.json").c_str(),
                join(outdir, "convergence.csv").c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adapted-solution engine for backward stochastic Volterra equations"};
    app.require_subcommand(1);

    Options opt;
    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opt.config, "path to the JSON scenario file")->required();
        cmd->add_option("--out", opt.out,
                        "output directory (default: $BSVIE_OUT_DIR, then the working directory)");
        cmd->add_option("--seed", opt.seed, "override the config seed");
        cmd->add_option("--threads", opt.threads, "worker thread count (never changes results)")
            ->check(CLI::Range(1, 1024));
        cmd->add_flag("--strict", opt.strict, "exit 4 when an axiom check fails");
        return cmd;
    };

    CLI::App* solve = add_common(app.add_subcommand("solve", "solve one scenario"));
    CLI::App* risk = add_common(app.add_subcommand("risk", "risk values of the claim"));
    CLI::App* axioms = add_common(app.add_subcommand("axioms", "coherence property battery"));
    CLI::App* bvie = add_common(
        app.add_subcommand("bvie", "deterministic Volterra translation table"));
    CLI::App* counterexample = add_common(
        app.add_subcommand("counterexample", "random risk of a deterministic claim"));
    CLI::App* convergence = add_common(
        app.add_subcommand("convergence", "grid refinement study"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2; // malformed invocation is a config error
    }

    try {
        bsvie::parallel::set_thread_count(opt.threads);
        Scenario scenario = bsvie::load_scenario(opt.config);
        if (opt.seed) {
            if (*opt.seed < 0) throw bsvie::ConfigError("--seed must be >= 0");
            scenario.seed = static_cast<std::uint64_t>(*opt.seed);
            scenario.resolved["seed"] = scenario.seed;
        }
        const std::string outdir = resolve_out_dir(opt.out);

        if (solve->parsed()) return run_solve(scenario, outdir);
        if (risk->parsed()) return run_risk(scenario, outdir);
        if (axioms->parsed()) return run_axioms(scenario, outdir, opt.strict);
        if (bvie->parsed()) return run_bvie(scenario, outdir);
        if (counterexample->parsed()) return run_counterexample(scenario, outdir);
        if (convergence->parsed()) return run_convergence(scenario, outdir);
        std::fprintf(stderr, "no subcommand selected\n");
        return 1;
    } catch (const bsvie::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const bsvie::ValidationError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const bsvie::DivergenceError& e) {
        std::fprintf(stderr, "solver diverged: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
