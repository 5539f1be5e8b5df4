#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <utility>

namespace bsvie {

// Driver g(t, s, y, z, state) of the backward equation. z is the d-vector of
// integrand values fed back through the generator; state is W(s) on the same
// path, available to coefficient processes. Declared Lipschitz bounds in y and
// z are carried alongside for diagnostics and the default contraction weight.
struct GeneratorSpec {
    enum class Tag { Zero, Linear, KappaAbsZ, Custom };
    using Fn = std::function<double(double t, double s, double y, std::span<const double> z,
                                    std::span<const double> state)>;

    Tag tag = Tag::Zero;
    Fn eval;
    double lipschitz_y = 0.0;
    double lipschitz_z = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
    double kappa = 0.0;

    static GeneratorSpec zero();
    // g = l1*y + l2*sum_k z_k
    static GeneratorSpec linear(double l1, double l2);
    // g = kappa*|z| (Euclidean norm)
    static GeneratorSpec kappa_abs_z(double kappa);
    static GeneratorSpec custom(Fn fn, double lipschitz_y, double lipschitz_z);

    double operator()(double t, double s, double y, std::span<const double> z,
                      std::span<const double> state) const {
        return eval(t, s, y, z, state);
    }
};

inline GeneratorSpec GeneratorSpec::zero() {
    GeneratorSpec g;
    g.tag = Tag::Zero;
    g.eval = [](double, double, double, std::span<const double>, std::span<const double>) {
        return 0.0;
    };
    return g;
}

inline GeneratorSpec GeneratorSpec::linear(double l1, double l2) {
    GeneratorSpec g;
    g.tag = Tag::Linear;
    g.l1 = l1;
    g.l2 = l2;
    g.lipschitz_y = std::abs(l1);
    g.lipschitz_z = std::abs(l2);
    g.eval = [l1, l2](double, double, double y, std::span<const double> z,
                      std::span<const double>) {
        double zsum = 0.0;
        for (double v : z) zsum += v;
        return l1 * y + l2 * zsum;
    };
    return g;
}

inline GeneratorSpec GeneratorSpec::kappa_abs_z(double kappa) {
    GeneratorSpec g;
    g.tag = Tag::KappaAbsZ;
    g.kappa = kappa;
    g.lipschitz_y = 0.0;
    g.lipschitz_z = std::abs(kappa);
    g.eval = [kappa](double, double, double, std::span<const double> z, std::span<const double>) {
        double sq = 0.0;
        for (double v : z) sq += v * v;
        return kappa * std::sqrt(sq);
    };
    return g;
}

inline GeneratorSpec GeneratorSpec::custom(Fn fn, double lipschitz_y, double lipschitz_z) {
    GeneratorSpec g;
    g.tag = Tag::Custom;
    g.eval = std::move(fn);
    g.lipschitz_y = lipschitz_y;
    g.lipschitz_z = lipschitz_z;
    return g;
}

// Terminal data psi(t, W(T)): a process indexed by the running time t whose
// randomness enters through the terminal state only.
struct TerminalSpec {
    enum class Tag { Constant, LinearTerminal, CallOnW, PutOnW, Custom };
    using Fn = std::function<double(double t, std::span<const double> terminal_state)>;

    Tag tag = Tag::Constant;
    Fn eval;
    double c = 0.0;
    double a = 0.0;
    double b = 0.0;
    double strike = 0.0;

    static TerminalSpec constant(double c);
    // a*sum_k W_T[k] + b
    static TerminalSpec linear_terminal(double a, double b);
    // max(sum_k W_T[k] - strike, 0)
    static TerminalSpec call_on_w(double strike);
    // max(strike - sum_k W_T[k], 0)
    static TerminalSpec put_on_w(double strike);
    static TerminalSpec custom(Fn fn);

    double operator()(double t, std::span<const double> terminal_state) const {
        return eval(t, terminal_state);
    }

    TerminalSpec negated() const;
    TerminalSpec shifted(double delta) const;
    TerminalSpec scaled(double factor) const;
    static TerminalSpec sum(const TerminalSpec& x, const TerminalSpec& y);
};

namespace detail {
inline double state_sum(std::span<const double> w) {
    double s = 0.0;
    for (double v : w) s += v;
    return s;
}
} // namespace detail

inline TerminalSpec TerminalSpec::constant(double c) {
    TerminalSpec t;
    t.tag = Tag::Constant;
    t.c = c;
    t.eval = [c](double, std::span<const double>) { return c; };
    return t;
}

inline TerminalSpec TerminalSpec::linear_terminal(double a, double b) {
    TerminalSpec t;
    t.tag = Tag::LinearTerminal;
    t.a = a;
    t.b = b;
    t.eval = [a, b](double, std::span<const double> w) { return a * detail::state_sum(w) + b; };
    return t;
}

inline TerminalSpec TerminalSpec::call_on_w(double strike) {
    TerminalSpec t;
    t.tag = Tag::CallOnW;
    t.strike = strike;
    t.eval = [strike](double, std::span<const double> w) {
        return std::max(detail::state_sum(w) - strike, 0.0);
    };
    return t;
}

inline TerminalSpec TerminalSpec::put_on_w(double strike) {
    TerminalSpec t;
    t.tag = Tag::PutOnW;
    t.strike = strike;
    t.eval = [strike](double, std::span<const double> w) {
        return std::max(strike - detail::state_sum(w), 0.0);
    };
    return t;
}

inline TerminalSpec TerminalSpec::custom(Fn fn) {
    TerminalSpec t;
    t.tag = Tag::Custom;
    t.eval = std::move(fn);
    return t;
}

inline TerminalSpec TerminalSpec::negated() const {
    TerminalSpec out;
    out.tag = Tag::Custom;
    out.eval = [inner = eval](double t, std::span<const double> w) { return -inner(t, w); };
    return out;
}

inline TerminalSpec TerminalSpec::shifted(double delta) const {
    TerminalSpec out;
    out.tag = Tag::Custom;
    out.eval = [inner = eval, delta](double t, std::span<const double> w) {
        return inner(t, w) + delta;
    };
    return out;
}

inline TerminalSpec TerminalSpec::scaled(double factor) const {
    TerminalSpec out;
    out.tag = Tag::Custom;
    out.eval = [inner = eval, factor](double t, std::span<const double> w) {
        return factor * inner(t, w);
    };
    return out;
}

inline TerminalSpec TerminalSpec::sum(const TerminalSpec& x, const TerminalSpec& y) {
    TerminalSpec out;
    out.tag = Tag::Custom;
    out.eval = [fx = x.eval, fy = y.eval](double t, std::span<const double> w) {
        return fx(t, w) + fy(t, w);
    };
    return out;
}

} // namespace bsvie
