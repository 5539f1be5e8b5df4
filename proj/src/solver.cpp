#include "bsvie/solver.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "bsvie/errors.hpp"
#include "bsvie/parallel.hpp"

namespace bsvie {

namespace {

// A_i[m] = psi(t_i, W_T[m]) + dt * sum_{j=i}^{N-1} g(t_i, t_j, y[m][j], z[m][j][i], W[m][j]).
// Column i of the frozen field carries the values of Z(t_j, t_i) for j >= i:
// the extension region of the frozen iterate, which is what the generator
// consumes. Parallel over t-slices; each (i, m) cell is written once.
void accumulate_frozen(const GeneratorSpec& generator, const TerminalSpec& terminal,
                       const AdaptedGrid& y, const TwoTimeField& z, const PathEnsemble& ensemble,
                       AdaptedGrid& a) {
    const int n = ensemble.steps();
    const int m = ensemble.paths();
    const int d = ensemble.dim();
    const double dt = ensemble.grid().dt();
    const auto terminal_states = ensemble.state_slice(n);

    parallel::for_each_task(static_cast<std::size_t>(n) + 1, [&](std::size_t task) {
        const int i = static_cast<int>(task);
        const double ti = ensemble.grid().time(i);
        auto out = a.slice(i);
        for (int row = 0; row < m; ++row) out[static_cast<std::size_t>(row)] = 0.0;
        for (int j = i; j < n; ++j) {
            const double tj = ensemble.grid().time(j);
            const auto yj = y.slice(j);
            const auto zji = z.cell(j, i);
            const auto states = ensemble.state_slice(j);
            for (int row = 0; row < m; ++row) {
                const std::size_t r = static_cast<std::size_t>(row);
                const double gv = generator(ti, tj, yj[r],
                                            zji.subspan(r * d, static_cast<std::size_t>(d)),
                                            states.subspan(r * d, static_cast<std::size_t>(d)));
                if (!std::isfinite(gv))
                    throw ValidationError("solver: generator returned a non-finite value at t-slice " +
                                          std::to_string(i) + ", s-slice " + std::to_string(j) +
                                          ", path " + std::to_string(row));
                out[r] += gv;
            }
        }
        for (int row = 0; row < m; ++row) {
            const std::size_t r = static_cast<std::size_t>(row);
            const double psi = terminal(ti, terminal_states.subspan(r * d, static_cast<std::size_t>(d)));
            if (!std::isfinite(psi))
                throw ValidationError("solver: terminal returned a non-finite value at slice " +
                                      std::to_string(i) + ", path " + std::to_string(row));
            out[r] = psi + dt * out[r];
        }
    });
}

// Projects the accumulators onto the grid: Y slices (terminal row copied
// verbatim) and the on-or-above-diagonal cells of Z. Updates y and z in place;
// when track_norm is set, returns the squared weighted norm of the update
// relative to the previous contents.
double apply_projections(const AdaptedGrid& a, const RegressionPlan& plan, double beta,
                         AdaptedGrid& y, TwoTimeField& z, bool track_norm) {
    const PathEnsemble& ensemble = plan.ensemble();
    const int n = ensemble.steps();
    const int m = ensemble.paths();
    const int d = ensemble.dim();
    const double dt = ensemble.grid().dt();
    const double inv_m = 1.0 / m;

    double diff2 = 0.0;
    std::vector<double> new_y(static_cast<std::size_t>(m));
    std::vector<double> new_z(static_cast<std::size_t>(m) * d);

    for (int i = 0; i <= n; ++i) {
        auto yi = y.slice(i);
        if (i == n) {
            const auto an = a.slice(n);
            std::memcpy(yi.data(), an.data(), static_cast<std::size_t>(m) * sizeof(double));
            break;
        }
        const double weight = std::exp(beta * ensemble.grid().time(i));
        plan.project_into(a.slice(i), i, new_y);
        if (track_norm) {
            double s = 0.0;
            for (int row = 0; row < m; ++row) {
                const double dy = new_y[static_cast<std::size_t>(row)] - yi[static_cast<std::size_t>(row)];
                s += dy * dy;
            }
            diff2 += weight * dt * s * inv_m;
        }
        std::memcpy(yi.data(), new_y.data(), static_cast<std::size_t>(m) * sizeof(double));

        for (int j = i; j < n; ++j) {
            auto cell = z.cell(i, j);
            plan.martingale_into(a.slice(i), j, new_z);
            if (track_norm) {
                double s = 0.0;
                for (std::size_t idx = 0; idx < new_z.size(); ++idx) {
                    const double dz = new_z[idx] - cell[idx];
                    s += dz * dz;
                }
                diff2 += weight * dt * dt * s * inv_m;
            }
            std::memcpy(cell.data(), new_z.data(), new_z.size() * sizeof(double));
        }
    }
    return diff2;
}

double blocked_mean(std::span<const double> values) {
    return parallel::block_sum(values.size(),
                               [&](std::size_t b, std::size_t e) {
                                   double s = 0.0;
                                   for (std::size_t r = b; r < e; ++r) s += values[r];
                                   return s;
                               }) /
           static_cast<double>(values.size());
}

std::uint64_t mix_seed(std::uint64_t x) {
    x ^= 0xD1B54A32D192ED03ull;
    x *= 0xAEF17502108EF2D9ull;
    return x ^ (x >> 32);
}

} // namespace

double default_beta(const GeneratorSpec& generator) {
    const double ly = generator.lipschitz_y;
    const double lz = generator.lipschitz_z;
    return 8.0 * std::max({ly * ly, lz, 1.0});
}

std::pair<AdaptedGrid, TwoTimeField> freeze_step(const GeneratorSpec& generator,
                                                 const TerminalSpec& terminal,
                                                 const AdaptedGrid& frozen_y,
                                                 const TwoTimeField& frozen_z,
                                                 const PathEnsemble& ensemble,
                                                 const RegressionPlan& plan) {
    const int n = ensemble.steps();
    const int m = ensemble.paths();
    if (frozen_y.paths() != m || frozen_y.slices() != n + 1)
        throw ValidationError("freeze step: frozen y shape mismatch");
    if (frozen_z.paths() != m || frozen_z.rows() != n + 1 || frozen_z.dim() != ensemble.dim())
        throw ValidationError("freeze step: frozen z shape mismatch");
    AdaptedGrid a(m, n + 1);
    accumulate_frozen(generator, terminal, frozen_y, frozen_z, ensemble, a);
    AdaptedGrid y(m, n + 1);
    TwoTimeField z(m, n, ensemble.dim());
    apply_projections(a, plan, 0.0, y, z, false);
    return {std::move(y), std::move(z)};
}

void m_extend(const AdaptedGrid& y, const RegressionPlan& plan, TwoTimeField& z) {
    const PathEnsemble& ensemble = plan.ensemble();
    const int n = ensemble.steps();
    if (y.paths() != ensemble.paths() || y.slices() != n + 1)
        throw ValidationError("m_extend: y shape mismatch");
    if (z.paths() != ensemble.paths() || z.rows() != n + 1 || z.dim() != ensemble.dim())
        throw ValidationError("m_extend: z shape mismatch");
    for (int i = 1; i <= n; ++i)
        for (int j = 0; j < i; ++j) plan.martingale_into(y.slice(i), j, z.cell(i, j));
}

double beta_norm(const AdaptedGrid& y, const TwoTimeField& z, double beta, const TimeGrid& grid) {
    const int n = grid.steps();
    const int m = y.paths();
    const int d = z.dim();
    if (y.slices() != n + 1 || z.rows() != n + 1 || z.paths() != m)
        throw ValidationError("beta norm: shape mismatch");
    const double dt = grid.dt();
    const double total = parallel::block_sum(static_cast<std::size_t>(m), [&](std::size_t b, std::size_t e) {
        double s = 0.0;
        for (std::size_t row = b; row < e; ++row) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                const double w = std::exp(beta * grid.time(i));
                const double yv = y.value(static_cast<int>(row), i);
                acc += w * yv * yv * dt;
                double zsq = 0.0;
                for (int j = i; j < n; ++j) {
                    const auto cell = z.cell(i, j);
                    for (int k = 0; k < d; ++k) {
                        const double zv = cell[row * static_cast<std::size_t>(d) + k];
                        zsq += zv * zv;
                    }
                }
                acc += w * zsq * dt * dt;
            }
            s += acc;
        }
        return s;
    });
    return std::sqrt(total / m);
}

LipschitzReport check_lipschitz(const GeneratorSpec& generator, const PathEnsemble& ensemble,
                                int sample_count) {
    LipschitzReport report;
    report.checked = true;
    report.declared_y = generator.lipschitz_y;
    report.declared_z = generator.lipschitz_z;
    report.samples = sample_count;

    const int n = ensemble.steps();
    const int m = ensemble.paths();
    const int d = ensemble.dim();
    const double dt = ensemble.grid().dt();

    std::mt19937_64 rng(mix_seed(ensemble.seed()));
    std::normal_distribution<double> normal(0.0, 2.0);
    std::uniform_int_distribution<int> pick_path(0, m - 1);
    std::uniform_int_distribution<int> pick_slice(0, n - 1);
    const double scales[3] = {1e-4, 0.1, 1.0};

    std::vector<double> z0(static_cast<std::size_t>(d)), z1(static_cast<std::size_t>(d));
    for (int s = 0; s < sample_count; ++s) {
        const int path = pick_path(rng);
        const int i = pick_slice(rng);
        std::uniform_int_distribution<int> pick_later(i, n - 1);
        const int j = pick_later(rng);
        const double ti = ensemble.grid().time(i);
        const double tj = ensemble.grid().time(j);
        const auto state = ensemble.state_slice(j).subspan(
            static_cast<std::size_t>(path) * d, static_cast<std::size_t>(d));
        const double y0 = normal(rng);
        for (int k = 0; k < d; ++k) z0[static_cast<std::size_t>(k)] = normal(rng);
        const double scale = scales[s % 3];

        const double dy = scale * (std::abs(normal(rng)) + 1e-8);
        const double base = generator(ti, tj, y0, z0, state);
        const double bumped_y = generator(ti, tj, y0 + dy, z0, state);
        if (!std::isfinite(base) || !std::isfinite(bumped_y)) report.finite = false;
        report.max_ratio_y = std::max(report.max_ratio_y, std::abs(bumped_y - base) / dy);

        double eta2 = 0.0;
        for (int k = 0; k < d; ++k) {
            const double eta = scale * normal(rng);
            z1[static_cast<std::size_t>(k)] = z0[static_cast<std::size_t>(k)] + eta;
            eta2 += eta * eta;
        }
        if (eta2 > 0.0) {
            const double bumped_z = generator(ti, tj, y0, z1, state);
            if (!std::isfinite(bumped_z)) report.finite = false;
            report.max_ratio_z =
                std::max(report.max_ratio_z, std::abs(bumped_z - base) / std::sqrt(eta2));
        }
    }
    report.within_y = report.max_ratio_y <= report.declared_y + 1e-9;
    report.within_z = report.max_ratio_z <= report.declared_z + 1e-9;

    // Quadrature + Monte Carlo estimate of int_0^T ( int_t^T |g(t,s,0,0)| ds )^2 dt
    // averaged over paths, plus an independent coarse grid/path subsample.
    const std::vector<double> zeros(static_cast<std::size_t>(d), 0.0);
    report.base_term_estimate =
        parallel::block_sum(static_cast<std::size_t>(m),
                            [&](std::size_t b, std::size_t e) {
                                double s = 0.0;
                                for (std::size_t row = b; row < e; ++row) {
                                    double outer = 0.0;
                                    for (int i = 0; i < n; ++i) {
                                        double inner = 0.0;
                                        for (int j = i; j < n; ++j) {
                                            const auto st = ensemble.state_slice(j).subspan(
                                                row * static_cast<std::size_t>(d),
                                                static_cast<std::size_t>(d));
                                            inner += std::abs(generator(ensemble.grid().time(i),
                                                                        ensemble.grid().time(j), 0.0,
                                                                        zeros, st));
                                        }
                                        outer += (inner * dt) * (inner * dt) * dt;
                                    }
                                    s += outer;
                                }
                                return s;
                            }) /
        m;
    const int coarse_paths = std::max(1, m / 8);
    double coarse = 0.0;
    for (int row = 0; row < coarse_paths; ++row) {
        double outer = 0.0;
        for (int i = 0; i < n; i += 2) {
            double inner = 0.0;
            for (int j = i; j < n; j += 2) {
                const auto st = ensemble.state_slice(j).subspan(
                    static_cast<std::size_t>(row) * d, static_cast<std::size_t>(d));
                inner += std::abs(generator(ensemble.grid().time(i), ensemble.grid().time(j), 0.0,
                                            zeros, st));
            }
            outer += (inner * 2.0 * dt) * (inner * 2.0 * dt) * 2.0 * dt;
        }
        coarse += outer;
    }
    report.base_term_coarse = coarse / coarse_paths;
    if (!std::isfinite(report.base_term_estimate) || !std::isfinite(report.base_term_coarse))
        report.finite = false;
    return report;
}

MSolutionEstimate picard_solve(const GeneratorSpec& generator, const TerminalSpec& terminal,
                               const PathEnsemble& ensemble, const BasisSpec& basis,
                               const PicardOptions& options) {
    if (!generator.eval) throw ValidationError("solver: generator has no callable");
    if (!terminal.eval) throw ValidationError("solver: terminal has no callable");
    if (!(options.tol > 0.0)) throw ValidationError("solver: tol must be > 0");
    if (options.max_iter < 1) throw ValidationError("solver: max_iter must be >= 1");
    if (options.forced_iterations < 0)
        throw ValidationError("solver: forced_iterations must be >= 0");
    const double beta = options.beta.value_or(default_beta(generator));
    if (!std::isfinite(beta) || beta < 0.0)
        throw ValidationError("solver: beta must be finite and >= 0");

    const int n = ensemble.steps();
    const int m = ensemble.paths();
    RegressionPlan plan(ensemble, basis);

    MSolutionEstimate estimate{AdaptedGrid(m, n + 1), TwoTimeField(m, n, ensemble.dim()),
                               ensemble.grid(), SolverReport{}};
    SolverReport& report = estimate.report;
    report.beta_used = beta;
    if (options.lipschitz_samples > 0)
        report.lipschitz = check_lipschitz(generator, ensemble, options.lipschitz_samples);

    AdaptedGrid accumulators(m, n + 1);
    if (options.init == InitialIterate::TerminalPropagated) {
        accumulate_frozen(GeneratorSpec::zero(), terminal, estimate.y, estimate.z, ensemble,
                          accumulators);
        apply_projections(accumulators, plan, beta, estimate.y, estimate.z, false);
        m_extend(estimate.y, plan, estimate.z);
    }

    const int sweeps = options.forced_iterations > 0 ? options.forced_iterations : options.max_iter;
    int growth_streak = 0;
    for (int it = 1; it <= sweeps; ++it) {
        accumulate_frozen(generator, terminal, estimate.y, estimate.z, ensemble, accumulators);
        const double diff2 =
            apply_projections(accumulators, plan, beta, estimate.y, estimate.z, true);
        m_extend(estimate.y, plan, estimate.z);

        const double norm = std::sqrt(diff2);
        report.iterations = it;
        if (!report.successive_norms.empty()) {
            const double prev = report.successive_norms.back();
            const double ratio = prev > 0.0 ? norm / prev : 0.0;
            report.contraction_ratios.push_back(ratio);
            growth_streak = ratio > 1.0 ? growth_streak + 1 : 0;
        }
        report.successive_norms.push_back(norm);

        if (options.forced_iterations == 0 && growth_streak >= 3)
            throw DivergenceError(
                "solver: successive norms grew over 3 consecutive sweeps (beta=" +
                std::to_string(beta) + ", horizon=" + std::to_string(ensemble.grid().horizon()) +
                "); increase beta or reduce the horizon");
        if (options.forced_iterations == 0 && norm <= options.tol) {
            report.converged = true;
            break;
        }
    }
    if (options.forced_iterations > 0)
        report.converged = !report.successive_norms.empty() &&
                           report.successive_norms.back() <= options.tol;
    return estimate;
}

std::vector<double> m_condition_residuals(const MSolutionEstimate& estimate,
                                          const PathEnsemble& ensemble) {
    const int n = ensemble.steps();
    const int m = ensemble.paths();
    const int d = ensemble.dim();
    if (estimate.y.paths() != m || estimate.y.slices() != n + 1)
        throw ValidationError("m_condition_residuals: estimate shape mismatch");
    std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
    for (int i = 0; i <= n; ++i) {
        const double mean = blocked_mean(estimate.y.slice(i));
        out[static_cast<std::size_t>(i)] =
            parallel::block_sum(static_cast<std::size_t>(m),
                                [&](std::size_t b, std::size_t e) {
                                    double s = 0.0;
                                    for (std::size_t row = b; row < e; ++row) {
                                        double r = estimate.y.value(static_cast<int>(row), i) - mean;
                                        for (int j = 0; j < i; ++j) {
                                            const auto cell = estimate.z.cell(i, j);
                                            const auto inc = ensemble.increment_slice(j);
                                            for (int k = 0; k < d; ++k)
                                                r -= cell[row * static_cast<std::size_t>(d) + k] *
                                                     inc[row * static_cast<std::size_t>(d) + k];
                                        }
                                        s += r * r;
                                    }
                                    return s;
                                }) /
            m;
    }
    return out;
}

} // namespace bsvie
