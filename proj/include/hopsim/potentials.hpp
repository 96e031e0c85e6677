#ifndef HOPSIM_POTENTIALS_HPP
#define HOPSIM_POTENTIALS_HPP

#include <hopsim/errors.hpp>
#include <hopsim/types.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hopsim {

/// Values of alpha, beta, gamma and their gradients at one point, where
///   V(q) = alpha(q) Id + [[beta(q), gamma(q)], [gamma(q), -beta(q)]].
template <std::size_t D>
struct PotentialSample {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    Vec<D> d_alpha{};
    Vec<D> d_beta{};
    Vec<D> d_gamma{};
};

/// Anything with a static `dim` and `evaluate(q) -> PotentialSample<dim>`.
template <class P>
concept TwoLevelPotential = requires(const P& pot, const Vec<P::dim>& q) {
    { pot.evaluate(q) } -> std::same_as<PotentialSample<P::dim>>;
};

struct EigenData {
    double lambda_plus = 0.0;
    double lambda_minus = 0.0;
    double gap = 0.0;
    double r = 0.0;
    Mat2 proj_plus{};
    Mat2 proj_minus{};
};

// ---------------------------------------------------------------------------
// Quantities derived from a single sample. The trajectory code evaluates the
// potential once per point and reuses the sample for force, gap and slope.

template <std::size_t D>
inline double coupling_radius(const PotentialSample<D>& s) noexcept {
    return std::hypot(s.beta, s.gamma);
}

template <std::size_t D>
inline double gap_of(const PotentialSample<D>& s) noexcept {
    return 2.0 * coupling_radius(s);
}

template <std::size_t D>
inline double checked_radius(const PotentialSample<D>& s) {
    const double r = coupling_radius(s);
    if (!(r > 0.0)) throw DegenerateGap("beta^2 + gamma^2 vanishes: conical point reached");
    return r;
}

/// grad g = 2 (beta grad beta + gamma grad gamma) / r
template <std::size_t D>
inline Vec<D> grad_gap_of(const PotentialSample<D>& s) {
    const double r = checked_radius(s);
    Vec<D> g{};
    for (std::size_t i = 0; i < D; ++i) g[i] = 2.0 * (s.beta * s.d_beta[i] + s.gamma * s.d_gamma[i]) / r;
    return g;
}

/// -grad lambda^level = -grad alpha -/+ (1/2) grad g
template <std::size_t D>
inline Vec<D> force_of(const PotentialSample<D>& s, Level level) {
    const Vec<D> dg = grad_gap_of(s);
    const double half = 0.5 * sign(level);
    Vec<D> f{};
    for (std::size_t i = 0; i < D; ++i) f[i] = -s.d_alpha[i] - half * dg[i];
    return f;
}

template <std::size_t D>
inline double eigenvalue_of(const PotentialSample<D>& s, Level level) noexcept {
    return s.alpha + sign(level) * coupling_radius(s);
}

template <std::size_t D>
inline EigenData eigen_of(const PotentialSample<D>& s) {
    const double r = checked_radius(s);
    EigenData e;
    e.r = r;
    e.gap = 2.0 * r;
    e.lambda_plus = s.alpha + r;
    e.lambda_minus = s.alpha - r;
    const double b = s.beta / r;
    const double c = s.gamma / r;
    e.proj_plus = {{{0.5 * (1.0 + b), 0.5 * c}, {0.5 * c, 0.5 * (1.0 - b)}}};
    e.proj_minus = {{{0.5 * (1.0 - b), -0.5 * c}, {-0.5 * c, 0.5 * (1.0 + b)}}};
    return e;
}

/// |det(p . grad V0)|^{1/2}. The matrix p . grad V0 = [[p.db, p.dc], [p.dc, -p.db]]
/// has determinant -((p.db)^2 + (p.dc)^2).
template <std::size_t D>
inline double lz_determinant_factor(const PotentialSample<D>& s, const Vec<D>& p) noexcept {
    return std::hypot(dot(p, s.d_beta), dot(p, s.d_gamma));
}

// ---------------------------------------------------------------------------
// Operations on a potential.

template <TwoLevelPotential P>
PotentialSample<P::dim> evaluate(const P& pot, const Vec<P::dim>& q) {
    return pot.evaluate(q);
}

template <TwoLevelPotential P>
EigenData eigen(const P& pot, const Vec<P::dim>& q) {
    return eigen_of(pot.evaluate(q));
}

template <TwoLevelPotential P>
Vec<P::dim> grad_gap(const P& pot, const Vec<P::dim>& q) {
    return grad_gap_of(pot.evaluate(q));
}

template <TwoLevelPotential P>
Vec<P::dim> force(const P& pot, const Vec<P::dim>& q, Level level) {
    return force_of(pot.evaluate(q), level);
}

// ---------------------------------------------------------------------------
// Type-erased potential, used for runtime model selection and user fields.

template <std::size_t D>
class DiabaticPotential {
public:
    static constexpr std::size_t dim = D;
    using Evaluator = std::function<PotentialSample<D>(const Vec<D>&)>;

    DiabaticPotential() = default;
    DiabaticPotential(std::string name, Evaluator eval) : name_(std::move(name)), eval_(std::move(eval)) {}

    template <TwoLevelPotential P>
        requires(P::dim == D && !std::same_as<P, DiabaticPotential>)
    explicit DiabaticPotential(P model, std::string name = {})
        : name_(std::move(name)), eval_([m = std::move(model)](const Vec<D>& q) { return m.evaluate(q); }) {}

    PotentialSample<D> evaluate(const Vec<D>& q) const { return eval_(q); }
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
    Evaluator eval_;
};

template <std::size_t D>
using ScalarField = std::function<double(const Vec<D>&)>;

/// Central difference with step 1e-6 max(1, |q_i|).
template <std::size_t D>
Vec<D> central_gradient(const ScalarField<D>& f, const Vec<D>& q) {
    Vec<D> g{};
    for (std::size_t i = 0; i < D; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(q[i]));
        Vec<D> qp = q;
        Vec<D> qm = q;
        qp[i] += h;
        qm[i] -= h;
        g[i] = (f(qp) - f(qm)) / (2.0 * h);
    }
    return g;
}

/// Potential from three scalar fields; gradients by central differences.
template <std::size_t D>
DiabaticPotential<D> from_fields(std::string name, ScalarField<D> alpha, ScalarField<D> beta, ScalarField<D> gamma) {
    return DiabaticPotential<D>(std::move(name), [alpha = std::move(alpha), beta = std::move(beta),
                                                  gamma = std::move(gamma)](const Vec<D>& q) {
        PotentialSample<D> s;
        s.alpha = alpha(q);
        s.beta = beta(q);
        s.gamma = gamma(q);
        s.d_alpha = central_gradient(alpha, q);
        s.d_beta = central_gradient(beta, q);
        s.d_gamma = central_gradient(gamma, q);
        return s;
    });
}

// ---------------------------------------------------------------------------
// Built-in one-dimensional avoided crossings.

namespace models {

/// sgn with sgn(0) = 0
inline double sgn(double x) noexcept { return static_cast<double>((x > 0.0) - (x < 0.0)); }

/// beta = A sgn(q)(1 - exp(-B|q|)), gamma = delta0 exp(-C q^2), alpha = 0
struct SimpleCrossing {
    static constexpr std::size_t dim = 1;
    double delta0 = 0.005;
    double beta_amp = 0.01;
    double beta_rate = 1.6;
    double gamma_rate = 1.0;

    PotentialSample<1> evaluate(const Vec<1>& qv) const noexcept {
        const double q = qv[0];
        const double e = std::exp(-beta_rate * std::abs(q));
        PotentialSample<1> s;
        s.beta = beta_amp * sgn(q) * (1.0 - e);
        s.d_beta[0] = beta_amp * beta_rate * e;
        s.gamma = delta0 * std::exp(-gamma_rate * q * q);
        s.d_gamma[0] = -2.0 * gamma_rate * q * s.gamma;
        return s;
    }
};

/// beta = A exp(-B q^2) - C, gamma = delta0 exp(-E q^2), alpha = -beta
struct DualCrossing {
    static constexpr std::size_t dim = 1;
    double delta0 = 0.015;
    double beta_amp = 0.05;
    double beta_rate = 0.28;
    double beta_shift = 0.025;
    double gamma_rate = 0.06;

    PotentialSample<1> evaluate(const Vec<1>& qv) const noexcept {
        const double q = qv[0];
        const double e = beta_amp * std::exp(-beta_rate * q * q);
        PotentialSample<1> s;
        s.beta = e - beta_shift;
        s.d_beta[0] = -2.0 * beta_rate * q * e;
        s.alpha = -s.beta;
        s.d_alpha[0] = -s.d_beta[0];
        s.gamma = delta0 * std::exp(-gamma_rate * q * q);
        s.d_gamma[0] = -2.0 * gamma_rate * q * s.gamma;
        return s;
    }
};

/// beta = delta0, gamma = A sgn(q)(1 - exp(-B|q|)) + A, alpha = 0
struct ExtendedCrossing {
    static constexpr std::size_t dim = 1;
    double delta0 = 6e-4;
    double gamma_amp = 0.1;
    double gamma_rate = 0.9;

    PotentialSample<1> evaluate(const Vec<1>& qv) const noexcept {
        const double q = qv[0];
        const double e = std::exp(-gamma_rate * std::abs(q));
        PotentialSample<1> s;
        s.beta = delta0;
        s.gamma = gamma_amp * sgn(q) * (1.0 - e) + gamma_amp;
        s.d_gamma[0] = gamma_amp * gamma_rate * e;
        return s;
    }
};

/// beta = arctan(q), gamma = delta0, alpha = 0
struct ArctangentCrossing {
    static constexpr std::size_t dim = 1;
    double delta0 = 0.031622776601683791;  // 10^{-3/2}

    PotentialSample<1> evaluate(const Vec<1>& qv) const noexcept {
        const double q = qv[0];
        PotentialSample<1> s;
        s.beta = std::atan(q);
        s.d_beta[0] = 1.0 / (1.0 + q * q);
        s.gamma = delta0;
        return s;
    }
};

}  // namespace models

/// Experiment defaults attached to a named model.
struct ModelDefaults {
    double eps = 0.0;
    double delta0 = 0.0;
    Level initial_level = Level::plus;
    double q0 = 0.0;
    double p0 = 0.0;
    double t_fin = 0.0;
    double dt = 0.01;           // classical step (upper bound)
    double domain_min = -20.0;  // reference grid
    double domain_max = 30.0;
    std::size_t grid_points = 8192;
};

struct ModelSpec {
    std::string name;
    DiabaticPotential<1> potential;
    ModelDefaults defaults;
    std::map<std::string, double> coefficients;  // resolved, including delta0
};

inline const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names{"simple", "dual", "extended", "arctangent"};
    return names;
}

namespace detail {

inline void apply_coefficients(const std::string& model, const std::map<std::string, double>& overrides,
                               std::map<std::string, double>& coefs) {
    for (const auto& [key, value] : overrides) {
        auto it = coefs.find(key);
        if (it == coefs.end()) throw ValidationError("coef." + key, "model '" + model + "' has no such coefficient");
        it->second = value;
    }
}

}  // namespace detail

/// Named model with its default experiment. `delta0` and `coefficients` override the defaults.
inline ModelSpec builtin(const std::string& name, std::optional<double> delta0 = std::nullopt,
                         const std::map<std::string, double>& coefficients = {}) {
    ModelSpec spec;
    spec.name = name;
    ModelDefaults& d = spec.defaults;
    auto& c = spec.coefficients;
    const double tully_eps = 1.0 / std::sqrt(2000.0);

    if (name == "simple") {
        models::SimpleCrossing m;
        c = {{"beta_amp", m.beta_amp}, {"beta_rate", m.beta_rate}, {"gamma_rate", m.gamma_rate}};
        detail::apply_coefficients(name, coefficients, c);
        m.delta0 = delta0.value_or(m.delta0);
        m.beta_amp = c["beta_amp"];
        m.beta_rate = c["beta_rate"];
        m.gamma_rate = c["gamma_rate"];
        d = {tully_eps, m.delta0, Level::minus, -5.0, 1.0, 10.0, 0.01, -20.0, 30.0, 8192};
        spec.potential = DiabaticPotential<1>(m, name);
    } else if (name == "dual") {
        models::DualCrossing m;
        c = {{"beta_amp", m.beta_amp},
             {"beta_rate", m.beta_rate},
             {"beta_shift", m.beta_shift},
             {"gamma_rate", m.gamma_rate}};
        detail::apply_coefficients(name, coefficients, c);
        m.delta0 = delta0.value_or(m.delta0);
        m.beta_amp = c["beta_amp"];
        m.beta_rate = c["beta_rate"];
        m.beta_shift = c["beta_shift"];
        m.gamma_rate = c["gamma_rate"];
        d = {tully_eps, m.delta0, Level::minus, -5.0, 1.0, 10.0, 0.01, -20.0, 30.0, 8192};
        spec.potential = DiabaticPotential<1>(m, name);
    } else if (name == "extended") {
        models::ExtendedCrossing m;
        c = {{"gamma_amp", m.gamma_amp}, {"gamma_rate", m.gamma_rate}};
        detail::apply_coefficients(name, coefficients, c);
        m.delta0 = delta0.value_or(m.delta0);
        m.gamma_amp = c["gamma_amp"];
        m.gamma_rate = c["gamma_rate"];
        d = {tully_eps, m.delta0, Level::plus, 0.0, -1.0, 10.0, 0.01, -20.0, 30.0, 8192};
        spec.potential = DiabaticPotential<1>(m, name);
    } else if (name == "arctangent") {
        models::ArctangentCrossing m;
        detail::apply_coefficients(name, coefficients, c);
        m.delta0 = delta0.value_or(m.delta0);
        d = {1e-3, m.delta0, Level::plus, -1.0, 1.0, 2.0, 0.001, -4.0, 4.0, 8192};
        spec.potential = DiabaticPotential<1>(m, name);
    } else {
        throw UnknownModel(name);
    }
    c["delta0"] = d.delta0;
    return spec;
}

}  // namespace hopsim

#endif
