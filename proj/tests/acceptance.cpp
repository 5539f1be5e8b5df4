// Acceptance gate: one line per criterion, exit status = number of failures.
//
// Every tolerance is pinned in this file next to the check it guards. The
// whole battery runs three times — twice on one worker, once on eight — and
// the final criterion compares the serialized numeric digests byte for byte.

#include <cmath>
#include <cstdio>
#include <cstddef>
#include <string>
#include <vector>

#include "bsvie/bvie.hpp"
#include "bsvie/generator.hpp"
#include "bsvie/grids.hpp"
#include "bsvie/parallel.hpp"
#include "bsvie/path_ensemble.hpp"
#include "bsvie/regression.hpp"
#include "bsvie/report_io.hpp"
#include "bsvie/risk.hpp"
#include "bsvie/solver.hpp"
#include "bsvie/time_grid.hpp"

using namespace bsvie;

namespace {

const BasisSpec kBasis{2, 1e-8};

struct CriterionResult {
    int id = 0;
    std::string label;
    bool pass = false;
    std::string detail;
};

struct Digest {
    std::string blob;
    void tag(const std::string& name) { blob += "# " + name + "\n"; }
    void add(double v) {
        blob += format_g17(v);
        blob += '\n';
    }
    void add(const std::vector<double>& vs) {
        for (double v : vs) add(v);
    }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Max over slices of the cross-path RMS gap between the estimate and a
// per-path reference.
template <typename Ref>
double max_slice_rms(const AdaptedGrid& y, Ref&& reference) {
    double worst = 0.0;
    for (int i = 0; i < y.slices(); ++i) {
        double acc = 0.0;
        for (int m = 0; m < y.paths(); ++m) {
            const double d = y.value(m, i) - reference(m, i);
            acc += d * d;
        }
        worst = std::max(worst, std::sqrt(acc / y.paths()));
    }
    return worst;
}

struct ResidualCase {
    std::string name;
    double max_residual = 0.0;
    double limit = 0.0;
};

double max_residual(const MSolutionEstimate& est, const PathEnsemble& ens) {
    double worst = 0.0;
    for (double r : m_condition_residuals(est, ens)) worst = std::max(worst, r);
    return worst;
}

std::vector<CriterionResult> run_all(Digest& digest) {
    std::vector<CriterionResult> results;
    std::vector<ResidualCase> residual_cases;

    // ---- criterion 1: martingale identity claim -------------------------
    {
        digest.tag("criterion 1");
        TimeGrid grid(1.0, 32);
        auto ens = PathEnsemble::sample(grid, 20000, 1, 101);
        auto est = picard_solve(GeneratorSpec::zero(), TerminalSpec::linear_terminal(1.0, 0.0), ens,
                                kBasis);

        const double worst_y =
            max_slice_rms(est.y, [&](int m, int i) { return ens.state(m, i, 0); });

        // Integrand read of a unit loading: RMS against 1 pooled over each
        // region — the equation side (j >= i) and the extension (j < i). No
        // per-cell max works at this path count (its pure-noise floor sits
        // above 0.1 by extreme-value statistics alone); the pooled reads still
        // trip on any row, column, or region that is wired wrong.
        double upper_acc = 0.0, lower_acc = 0.0;
        std::size_t upper_n = 0, lower_n = 0;
        for (int i = 0; i <= 32; ++i)
            for (int j = 0; j < 32; ++j) {
                double acc = 0.0;
                for (int m = 0; m < 20000; ++m) {
                    const double d = est.z.value(m, i, j, 0) - 1.0;
                    acc += d * d;
                }
                (j >= i ? upper_acc : lower_acc) += acc;
                (j >= i ? upper_n : lower_n) += 20000;
            }
        const double upper_rms = std::sqrt(upper_acc / upper_n);
        const double lower_rms = std::sqrt(lower_acc / lower_n);
        const double worst_z = std::max(upper_rms, lower_rms);

        digest.add(worst_y);
        digest.add({upper_rms, lower_rms});
        digest.add(est.y.value(0, 0));
        for (int i = 0; i <= 32; i += 4) digest.add(est.y.value(12345, i));
        for (int i = 0; i <= 32; i += 4)
            for (int j = 0; j < 32; j += 4) digest.add(est.z.value(777, i, j, 0));

        residual_cases.push_back({"identity claim", max_residual(est, ens),
                                  [&] {
                                      const auto cal = martingale_calibration(ens, kBasis);
                                      return 5.0 * cal.rmse_z * cal.rmse_z;
                                  }()});

        CriterionResult r{1, "martingale identity claim", worst_y <= 0.05 && worst_z <= 0.1,
                          "max slice RMS(Y-W) " + fmt(worst_y) +
                              " (limit 0.05); integrand RMS vs 1: equation side " + fmt(upper_rms) +
                              ", extension side " + fmt(lower_rms) + " (limit 0.1 each)"};
        results.push_back(r);
    }

    // ---- criterion 2: deterministic linear oracle ------------------------
    {
        digest.tag("criterion 2");
        const auto solve_at = [&](int steps) {
            TimeGrid grid(1.0, steps);
            auto ens = PathEnsemble::sample(grid, 512, 1, 102);
            PicardOptions opt;
            opt.tol = 1e-10;
            opt.max_iter = 60;
            auto est = picard_solve(GeneratorSpec::linear(0.1, 0.0), TerminalSpec::constant(1.0),
                                    ens, kBasis, opt);
            if (steps == 32)
                residual_cases.push_back({"linear sure claim", max_residual(est, ens),
                                          [&] {
                                              const auto cal = martingale_calibration(ens, kBasis);
                                              return 5.0 * cal.rmse_z * cal.rmse_z;
                                          }()});
            return est.y.value(0, 0);
        };
        const double y32 = solve_at(32);
        const double y64 = solve_at(64);
        const double truth = std::exp(0.1);
        const double e32 = std::abs(y32 - truth);
        const double e64 = std::abs(y64 - truth);
        const double ratio = e32 / e64;
        digest.add({y32, y64});

        results.push_back({2, "sure-claim exponential oracle",
                           e32 <= 5e-3 && ratio >= 1.7 && ratio <= 2.3,
                           "|Y(0)-e^0.1| = " + fmt(e32) + " at 32 steps (limit 5e-3); halving ratio " +
                               fmt(ratio) + " (limits [1.7, 2.3])"});
    }

    // ---- criterion 3: integrand-column coupling oracle -------------------
    {
        digest.tag("criterion 3");
        TimeGrid grid(1.0, 32);
        auto ens = PathEnsemble::sample(grid, 8192, 1, 103);
        auto est = picard_solve(GeneratorSpec::kappa_abs_z(0.5),
                                TerminalSpec::linear_terminal(-1.0, 0.0), ens, kBasis);
        const double y0 = est.y.value(0, 0);
        digest.add(y0);
        residual_cases.push_back({"volatility charge", max_residual(est, ens),
                                  [&] {
                                      const auto cal = martingale_calibration(ens, kBasis);
                                      return 5.0 * cal.rmse_z * cal.rmse_z;
                                  }()});
        results.push_back({3, "integrand-column coupling oracle", std::abs(y0 - 0.5) <= 0.05,
                           "Y(0) = " + fmt(y0) + " vs 0.5 (limit 0.05)"});
    }

    // ---- criterion 4: reconstruction residuals ---------------------------
    {
        digest.tag("criterion 4");
        bool pass = true;
        std::string detail;
        for (const auto& c : residual_cases) {
            pass = pass && c.max_residual <= c.limit;
            if (!detail.empty()) detail += "; ";
            detail += c.name + " " + fmt(c.max_residual) + " (limit " + fmt(c.limit) + ")";
            digest.add({c.max_residual, c.limit});
        }
        results.push_back({4, "reconstruction residual bound", pass, detail});
    }

    // ---- criteria 5 and 6: contraction and uniqueness surrogate ----------
    {
        digest.tag("criteria 5-6");
        TimeGrid grid(1.0, 32);
        auto ens = PathEnsemble::sample(grid, 8192, 1, 105);
        const auto gen = GeneratorSpec::linear(0.2, 0.2);
        const auto psi = TerminalSpec::call_on_w(0.0);

        PicardOptions opt; // tol 1e-4, default weight
        auto a = picard_solve(gen, psi, ens, kBasis, opt);
        double worst_ratio = 0.0;
        for (double r : a.report.contraction_ratios) worst_ratio = std::max(worst_ratio, r);
        digest.add(a.y.value(0, 0));
        digest.add(a.report.successive_norms);
        results.push_back({5, "weighted-norm contraction",
                           a.report.converged && a.report.iterations <= 12 && worst_ratio <= 0.9,
                           "iterations " + std::to_string(a.report.iterations) +
                               " (limit 12); worst successive ratio " + fmt(worst_ratio) +
                               " (limit 0.9)"});

        PicardOptions opt2;
        opt2.init = InitialIterate::TerminalPropagated;
        auto b = picard_solve(gen, psi, ens, kBasis, opt2);
        AdaptedGrid dy(8192, 33);
        TwoTimeField dz(8192, 32, 1);
        for (int i = 0; i <= 32; ++i)
            for (int m = 0; m < 8192; ++m) dy.value(m, i) = a.y.value(m, i) - b.y.value(m, i);
        for (int i = 0; i <= 32; ++i)
            for (int j = 0; j < 32; ++j)
                for (int m = 0; m < 8192; ++m)
                    dz.value(m, i, j, 0) = a.z.value(m, i, j, 0) - b.z.value(m, i, j, 0);
        const double gap = beta_norm(dy, dz, a.report.beta_used, grid);
        // For this driver g(t, s, 0, 0) = 0, so the propagated start equals the
        // zero start's first sweep: the two orbits merge and the gap is exactly
        // zero. The check still guards any driver or stopping-rule change that
        // breaks the merge.
        digest.add(gap);
        results.push_back({6, "initial-iterate independence", gap <= 2.0 * opt.tol,
                           "weighted gap between starts " + fmt(gap) + " (limit " +
                               fmt(2.0 * opt.tol) + ")"});
    }

    // ---- criterion 7: deterministic Volterra oracle ----------------------
    {
        digest.tag("criterion 7");
        const double truth = -std::exp(1.0);
        const double y64 = solve_bvie(KernelSpec::constant(1.0), 1.0, TimeGrid(1.0, 64))[0];
        const double y128 = solve_bvie(KernelSpec::constant(1.0), 1.0, TimeGrid(1.0, 128))[0];
        const double e64 = std::abs(y64 - truth);
        const double e128 = std::abs(y128 - truth);
        const double ratio = e64 / e128;
        digest.add({y64, y128});
        results.push_back({7, "deterministic Volterra oracle",
                           e64 <= 1e-3 && ratio >= 3.0 && ratio <= 5.0,
                           "|Y*(0)+e| = " + fmt(e64) + " at 64 steps (limit 1e-3); doubling ratio " +
                               fmt(ratio) + " (limits [3, 5])"});
    }

    // ---- criterion 8: coherence battery with negative control ------------
    {
        digest.tag("criterion 8");
        TimeGrid grid(1.0, 16);
        auto ens = PathEnsemble::sample(grid, 4000, 1, 11);
        auto lin = coherence_report(RiskGenerator::linear_form(0.1, 0.2), ens, kBasis);
        auto rate = coherence_report(RiskGenerator::rate_form(0.1, 0.5), ens, kBasis);

        TimeGrid half(0.5, 16);
        auto ens_half = PathEnsemble::sample(half, 4000, 1, 11);
        BatteryConfig reduced;
        reduced.claim_scale = 0.5;
        auto quad = coherence_report(RiskGenerator::quadratic_form(1.0), ens_half, kBasis, reduced);

        bool quad_flagged = false;
        for (const auto& c : quad.checks)
            if (c.axiom == "positive_homogeneity") quad_flagged = !c.pass && c.statistic > c.tolerance;

        for (const auto* rep : {&lin, &rate, &quad})
            for (const auto& c : rep->checks) digest.add({c.statistic, c.tolerance});

        results.push_back({8, "coherence battery + negative control",
                           lin.all_pass && rate.all_pass && quad_flagged && !quad.all_pass,
                           std::string("additive battery ") + (lin.all_pass ? "pass" : "FAIL") +
                               ", volatility-charge battery " + (rate.all_pass ? "pass" : "FAIL") +
                               ", quadratic control homogeneity " +
                               (quad_flagged ? "flagged" : "NOT flagged")});
    }

    // ---- criterion 9: generalized translation ----------------------------
    {
        digest.tag("criterion 9");
        TimeGrid grid(1.0, 32);
        auto ens = PathEnsemble::sample(grid, 4000, 1, 109);
        const double tol = default_axiom_tolerance(ens, kBasis);

        auto det = RiskGenerator::linear_form(0.1, 0.0);
        auto tc = check_translation(det, TerminalSpec::constant(0.0), 1.0, ens, kBasis, tol);
        const double d0 = tc.shift_curve.front();
        const double d0_err = std::abs(d0 + std::exp(0.1));

        auto random_coeff = RiskGenerator::custom(
            GeneratorSpec::custom(
                [](double, double, double y, std::span<const double>, std::span<const double> w) {
                    double s = 0.0;
                    for (double v : w) s += v;
                    return 0.1 * (1.0 + std::sin(s)) * y;
                },
                0.2, 0.0),
            "state_modulated_rate");
        auto indep = check_translation_claim_independence(random_coeff, TerminalSpec::constant(0.0),
                                                          TerminalSpec::call_on_w(0.0), 1.0, ens,
                                                          kBasis, tol);
        digest.add(tc.shift_curve);
        digest.add({d0, indep.statistic, indep.tolerance});
        results.push_back({9, "generalized translation curve",
                           tc.check.pass && d0_err <= 5e-3 && indep.pass,
                           "|D(0)+e^0.1| = " + fmt(d0_err) +
                               " (limit 5e-3); claim dependence " + fmt(indep.statistic) +
                               " (limit " + fmt(indep.tolerance) + ")"});
    }

    // ---- criterion 10: sure claim with random risk -----------------------
    {
        digest.tag("criterion 10");
        TimeGrid grid(1.0, 16);
        auto ens = PathEnsemble::sample(grid, 4000, 1, 11);
        auto random_case = sin_counterexample(1.0, ens, kBasis);
        auto sure_case = sin_counterexample(0.0, ens, kBasis);
        digest.add(random_case.variance);
        digest.add({random_case.mid_variance, random_case.mid_standard_error,
                    sure_case.mid_variance, sure_case.mid_standard_error});
        results.push_back(
            {10, "randomness of the shifted sure claim",
             random_case.random_at_mid && sure_case.certain_at_mid,
             "variance " + fmt(random_case.mid_variance) + " vs 5*SE = " +
                 fmt(5.0 * random_case.mid_standard_error) + " at level 1; variance " +
                 fmt(sure_case.mid_variance) + " vs 2*SE = " +
                 fmt(2.0 * sure_case.mid_standard_error) + " at level 0"});
    }

    return results;
}

} // namespace

int main() {
    parallel::set_thread_count(1);
    Digest first, second, third;
    auto results = run_all(first);
    run_all(second);
    parallel::set_thread_count(8);
    run_all(third);
    parallel::set_thread_count(1);

    const bool rerun_stable = first.blob == second.blob;
    const bool thread_stable = first.blob == third.blob;
    results.push_back({11, "byte-stable reruns and worker counts", rerun_stable && thread_stable,
                       std::string("same-seed rerun ") + (rerun_stable ? "identical" : "DIFFERS") +
                           "; workers 1 vs 8 " + (thread_stable ? "identical" : "DIFFERS")});

    int failures = 0;
    for (const auto& r : results) {
        std::printf("[%s] criterion %2d: %s — %s\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.label.c_str(), r.detail.c_str());
        if (!r.pass) ++failures;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failures,
                results.size());
    return failures;
}
