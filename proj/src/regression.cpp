#include "bsvie/regression.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "bsvie/errors.hpp"
#include "bsvie/parallel.hpp"

namespace bsvie {

namespace {

// Monomial exponent tuples in graded lexicographic order; the first entry is
// the constant.
std::vector<std::vector<int>> monomial_exponents(int dim, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> current(static_cast<std::size_t>(dim), 0);
    for (int total = 0; total <= degree; ++total) {
        // enumerate all tuples with sum == total, lexicographically
        std::function<void(int, int)> rec = [&](int pos, int remaining) {
            if (pos == dim - 1) {
                current[static_cast<std::size_t>(pos)] = remaining;
                out.push_back(current);
                return;
            }
            for (int e = remaining; e >= 0; --e) {
                current[static_cast<std::size_t>(pos)] = e;
                rec(pos + 1, remaining - e);
            }
        };
        rec(0, total);
    }
    return out;
}

void check_targets(std::span<const double> targets, int paths) {
    if (targets.size() != static_cast<std::size_t>(paths))
        throw ValidationError("regression: targets size must equal the path count");
    for (double v : targets)
        if (std::isnan(v)) throw ValidationError("regression: targets contain NaN");
}

} // namespace

std::size_t polynomial_basis_size(int dim, int degree) {
    // C(dim + degree, degree)
    std::size_t n = 1;
    for (int i = 1; i <= degree; ++i) n = n * static_cast<std::size_t>(dim + i) / static_cast<std::size_t>(i);
    return n;
}

struct RegressionPlan::Impl {
    const PathEnsemble* ensemble;
    BasisSpec basis;
    std::size_t p;
    std::vector<std::vector<int>> exponents;
    // Row-major design matrix per slice (row = path); empty for slice 0.
    std::vector<std::vector<double>> design;
    std::vector<Eigen::ColPivHouseholderQR<Eigen::MatrixXd>> factor;

    Impl(const PathEnsemble& ens, const BasisSpec& b) : ensemble(&ens), basis(b) {
        if (b.degree < 0) throw ValidationError("regression: basis degree must be >= 0");
        if (!(b.ridge >= 0.0)) throw ValidationError("regression: ridge must be >= 0");
        p = polynomial_basis_size(ens.dim(), b.degree);
        const std::size_t m = static_cast<std::size_t>(ens.paths());
        if (p * 10 >= m)
            throw ValidationError("regression: basis size " + std::to_string(p) +
                                  " must be < paths/10 = " + std::to_string(m / 10));
        exponents = monomial_exponents(ens.dim(), b.degree);
        const int n = ens.steps();
        design.resize(static_cast<std::size_t>(n) + 1);
        factor.resize(static_cast<std::size_t>(n) + 1);
        for (int i = 1; i <= n; ++i) build_slice(i);
    }

    void build_slice(int i) {
        const std::size_t m = static_cast<std::size_t>(ensemble->paths());
        const int d = ensemble->dim();
        const int deg = basis.degree;
        auto& phi = design[static_cast<std::size_t>(i)];
        phi.assign(m * p, 0.0);
        const auto states = ensemble->state_slice(i);
        parallel::for_each_chunk(m, [&](std::size_t begin, std::size_t end) {
            std::vector<double> powers(static_cast<std::size_t>(d) * (deg + 1), 1.0);
            for (std::size_t row = begin; row < end; ++row) {
                for (int k = 0; k < d; ++k) {
                    const double w = states[row * d + k];
                    double acc = 1.0;
                    for (int e = 0; e <= deg; ++e) {
                        powers[static_cast<std::size_t>(k) * (deg + 1) + e] = acc;
                        acc *= w;
                    }
                }
                double* dst = phi.data() + row * p;
                for (std::size_t b = 0; b < p; ++b) {
                    double v = 1.0;
                    const auto& expo = exponents[b];
                    for (int k = 0; k < d; ++k)
                        v *= powers[static_cast<std::size_t>(k) * (deg + 1) + expo[static_cast<std::size_t>(k)]];
                    dst[b] = v;
                }
            }
        });

        // Normal equations with ridge on the non-constant coefficients,
        // accumulated in a fixed block order.
        std::vector<double> gbuf(p * p, 0.0);
        parallel::block_sum_vec(
            m, p * p,
            [&](std::size_t begin, std::size_t end, double* acc) {
                for (std::size_t row = begin; row < end; ++row) {
                    const double* f = phi.data() + row * p;
                    for (std::size_t a = 0; a < p; ++a)
                        for (std::size_t b = a; b < p; ++b) acc[a * p + b] += f[a] * f[b];
                }
            },
            gbuf.data());
        Eigen::MatrixXd gram(p, p);
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = a; b < p; ++b) {
                const double v = gbuf[a * p + b];
                gram(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
                gram(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
            }
        for (std::size_t b = 1; b < p; ++b)
            gram(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b)) += basis.ridge;

        auto& qr = factor[static_cast<std::size_t>(i)];
        qr.compute(gram);
        if (basis.ridge == 0.0 && qr.rank() < static_cast<Eigen::Index>(p))
            throw RegressionError("regression: singular normal equations at slice " +
                                  std::to_string(i) + " (rank " + std::to_string(qr.rank()) +
                                  " < " + std::to_string(p) + "); set ridge > 0");
    }

    void project(std::span<const double> targets, int slice, std::span<double> values,
                 std::vector<double>* coefficients) const {
        const int m = ensemble->paths();
        check_targets(targets, m);
        if (slice < 0 || slice > ensemble->steps())
            throw ValidationError("regression: slice out of range");
        if (values.size() != static_cast<std::size_t>(m))
            throw ValidationError("regression: values size must equal the path count");

        if (slice == 0) {
            const double mean = parallel::block_sum(static_cast<std::size_t>(m),
                                                    [&](std::size_t b, std::size_t e) {
                                                        double s = 0.0;
                                                        for (std::size_t r = b; r < e; ++r) s += targets[r];
                                                        return s;
                                                    }) /
                                m;
            for (int r = 0; r < m; ++r) values[static_cast<std::size_t>(r)] = mean;
            if (coefficients) {
                coefficients->assign(p, 0.0);
                (*coefficients)[0] = mean;
            }
            return;
        }

        const auto& phi = design[static_cast<std::size_t>(slice)];
        Eigen::VectorXd rhs(p);
        parallel::block_sum_vec(
            static_cast<std::size_t>(m), p,
            [&](std::size_t begin, std::size_t end, double* acc) {
                for (std::size_t row = begin; row < end; ++row) {
                    const double* f = phi.data() + row * p;
                    const double y = targets[row];
                    for (std::size_t b = 0; b < p; ++b) acc[b] += f[b] * y;
                }
            },
            rhs.data());
        const Eigen::VectorXd coef = factor[static_cast<std::size_t>(slice)].solve(rhs);
        parallel::for_each_chunk(static_cast<std::size_t>(m), [&](std::size_t begin, std::size_t end) {
            for (std::size_t row = begin; row < end; ++row) {
                const double* f = phi.data() + row * p;
                double v = 0.0;
                for (std::size_t b = 0; b < p; ++b) v += f[b] * coef[static_cast<Eigen::Index>(b)];
                values[row] = v;
            }
        });
        if (coefficients) coefficients->assign(coef.data(), coef.data() + p);
    }

    void martingale(std::span<const double> targets, int slice, std::span<double> values,
                    std::vector<double>* coefficients) const {
        const int m = ensemble->paths();
        const int d = ensemble->dim();
        check_targets(targets, m);
        if (slice < 0 || slice >= ensemble->steps())
            throw ValidationError("regression: martingale slice must be in [0, steps)");
        if (values.size() != static_cast<std::size_t>(m) * d)
            throw ValidationError("regression: values size must equal paths*dim");

        const double inv_dt = 1.0 / ensemble->grid().dt();
        const auto inc = ensemble->increment_slice(slice);
        if (coefficients) coefficients->assign(p * static_cast<std::size_t>(d), 0.0);
        std::vector<double> products(static_cast<std::size_t>(m));
        std::vector<double> fitted(static_cast<std::size_t>(m));
        std::vector<double> comp_coef;
        for (int k = 0; k < d; ++k) {
            parallel::for_each_chunk(static_cast<std::size_t>(m), [&](std::size_t b, std::size_t e) {
                for (std::size_t row = b; row < e; ++row)
                    products[row] = targets[row] * inc[row * d + k] * inv_dt;
            });
            project(products, slice, fitted, coefficients ? &comp_coef : nullptr);
            for (int row = 0; row < m; ++row)
                values[static_cast<std::size_t>(row) * d + k] = fitted[static_cast<std::size_t>(row)];
            if (coefficients)
                for (std::size_t b = 0; b < p; ++b)
                    (*coefficients)[b * static_cast<std::size_t>(d) + k] = comp_coef[b];
        }
    }
};

RegressionPlan::RegressionPlan(const PathEnsemble& ensemble, const BasisSpec& basis)
    : impl_(std::make_unique<Impl>(ensemble, basis)) {}
RegressionPlan::~RegressionPlan() = default;
RegressionPlan::RegressionPlan(RegressionPlan&&) noexcept = default;
RegressionPlan& RegressionPlan::operator=(RegressionPlan&&) noexcept = default;

const PathEnsemble& RegressionPlan::ensemble() const noexcept { return *impl_->ensemble; }
const BasisSpec& RegressionPlan::basis() const noexcept { return impl_->basis; }
std::size_t RegressionPlan::basis_size() const noexcept { return impl_->p; }

void RegressionPlan::project_into(std::span<const double> targets, int slice, std::span<double> values,
                                  std::vector<double>* coefficients) const {
    impl_->project(targets, slice, values, coefficients);
}

ConditionalEstimate RegressionPlan::project(std::span<const double> targets, int slice) const {
    ConditionalEstimate out;
    out.slice = slice;
    out.values.resize(static_cast<std::size_t>(impl_->ensemble->paths()));
    impl_->project(targets, slice, out.values, &out.coefficients);
    return out;
}

void RegressionPlan::martingale_into(std::span<const double> targets, int slice, std::span<double> values,
                                     std::vector<double>* coefficients) const {
    impl_->martingale(targets, slice, values, coefficients);
}

MartingaleEstimate RegressionPlan::martingale(std::span<const double> targets, int slice) const {
    MartingaleEstimate out;
    out.slice = slice;
    out.dim = impl_->ensemble->dim();
    out.values.resize(static_cast<std::size_t>(impl_->ensemble->paths()) * out.dim);
    impl_->martingale(targets, slice, out.values, &out.coefficients);
    return out;
}

ConditionalEstimate regress_conditional(std::span<const double> targets, const PathEnsemble& ensemble,
                                        int slice, const BasisSpec& basis) {
    RegressionPlan plan(ensemble, basis);
    return plan.project(targets, slice);
}

MartingaleEstimate martingale_coefficient(std::span<const double> targets, const PathEnsemble& ensemble,
                                          int slice, const BasisSpec& basis) {
    RegressionPlan plan(ensemble, basis);
    return plan.martingale(targets, slice);
}

CalibrationResult martingale_calibration(const PathEnsemble& ensemble, const BasisSpec& basis) {
    RegressionPlan plan(ensemble, basis);
    const int m = ensemble.paths();
    const int n = ensemble.steps();
    const int d = ensemble.dim();
    std::vector<double> targets(static_cast<std::size_t>(m));
    const auto terminal = ensemble.state_slice(n);
    for (int row = 0; row < m; ++row) targets[static_cast<std::size_t>(row)] = terminal[static_cast<std::size_t>(row) * d];

    CalibrationResult out;
    std::vector<double> fitted(static_cast<std::size_t>(m));
    double sum_y = 0.0;
    for (int i = 1; i < n; ++i) {
        plan.project_into(targets, i, fitted, nullptr);
        const auto states = ensemble.state_slice(i);
        sum_y += parallel::block_sum(static_cast<std::size_t>(m), [&](std::size_t b, std::size_t e) {
            double s = 0.0;
            for (std::size_t row = b; row < e; ++row) {
                const double err = fitted[row] - states[row * d];
                s += err * err;
            }
            return s;
        });
    }
    out.rmse_y = std::sqrt(sum_y / (static_cast<double>(m) * (n - 1)));

    std::vector<double> loadings(static_cast<std::size_t>(m) * d);
    double sum_z = 0.0;
    for (int j = 0; j < n; ++j) {
        plan.martingale_into(targets, j, loadings, nullptr);
        sum_z += parallel::block_sum(static_cast<std::size_t>(m), [&](std::size_t b, std::size_t e) {
            double s = 0.0;
            for (std::size_t row = b; row < e; ++row)
                for (int k = 0; k < d; ++k) {
                    const double err = loadings[row * d + k] - (k == 0 ? 1.0 : 0.0);
                    s += err * err;
                }
            return s;
        });
    }
    out.rmse_z = std::sqrt(sum_z / (static_cast<double>(m) * n * d));
    return out;
}

} // namespace bsvie
