#ifndef HOPSIM_LZMODEL_HPP
#define HOPSIM_LZMODEL_HPP

#include <hopsim/errors.hpp>
#include <hopsim/potentials.hpp>
#include <hopsim/types.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace hopsim::lz {

using cplx = std::complex<double>;
using Spinor = std::array<cplx, 2>;

/// (eps/i) dv/ds = [[s, eta], [eta, -s]] v on [-s_max, s_max].
struct LZProblem {
    double eta = 0.0;
    double eps = 1.0;
    double s_max = 10.0;
    double ds = 0.0;  // 0: eps / (10 s_max)

    double step() const noexcept { return ds > 0.0 ? ds : eps / (10.0 * s_max); }
};

/// exp(-(pi / eps) eta^2), the asymptotic adiabatic transition probability.
inline double lz_formula(double eta, double eps) { return std::exp(-std::numbers::pi * eta * eta / eps); }

/// Unit eigenvector of [[s, eta], [eta, -s]] for the upper (+1) or lower (-1) eigenvalue.
inline std::array<double, 2> adiabatic_vector(double s, double eta, Level level) {
    const double r = std::hypot(s, eta);
    if (r == 0.0) return level == Level::plus ? std::array<double, 2>{1.0, 0.0} : std::array<double, 2>{0.0, 1.0};
    const double sg = sign(level);
    // Projector 1/2 (Id +/- H/r); take its larger column.
    const double p00 = 0.5 * (1.0 + sg * s / r);
    const double p11 = 0.5 * (1.0 - sg * s / r);
    const double p01 = 0.5 * sg * eta / r;
    std::array<double, 2> v = p00 >= p11 ? std::array<double, 2>{p00, p01} : std::array<double, 2>{p01, p11};
    const double n = std::hypot(v[0], v[1]);
    return {v[0] / n, v[1] / n};
}

namespace detail {

/// One fourth-order Magnus step from s to s + h. The exponent is
/// i (a sz + b sx + c sy), so the step is exactly unitary.
inline Spinor magnus4_step(const Spinor& v, double s, double h, double eta, double eps) {
    constexpr double off = 0.28867513459481287;  // sqrt(3)/6
    const double s1 = s + (0.5 - off) * h;
    const double s2 = s + (0.5 + off) * h;
    const double a = h * (s1 + s2) / (2.0 * eps);
    const double b = h * eta / eps;
    const double c = -std::sqrt(3.0) * h * h * eta * (s2 - s1) / (6.0 * eps * eps);
    const double theta = std::sqrt(a * a + b * b + c * c);
    const double cs = std::cos(theta);
    const double sn = theta > 0.0 ? std::sin(theta) / theta : 1.0;
    const cplx i(0.0, 1.0);
    // exp(i n.sigma) = cos|n| Id + i sin|n| (n.sigma)/|n|
    const cplx m00 = cs + i * sn * a;
    const cplx m11 = cs - i * sn * a;
    const cplx m01 = i * sn * cplx(b, -c);  // sx - i sy component
    const cplx m10 = i * sn * cplx(b, c);
    return {m00 * v[0] + m01 * v[1], m10 * v[0] + m11 * v[1]};
}

}  // namespace detail

struct LZSolution {
    double transition = 0.0;  // population on the opposite adiabatic branch at +s_max
    double norm = 0.0;        // |v(s_max)|
    std::size_t steps = 0;
};

/// Integrates from the upper adiabatic state at -s_max and measures the final
/// population of the lower adiabatic state at +s_max.
inline LZSolution integrate_lz_detailed(const LZProblem& prob, double initial_phase = 0.0) {
    if (!(prob.eps > 0.0)) throw ValidationError("eps", "must be positive");
    if (prob.s_max < 10.0 * std::max(std::sqrt(prob.eps), std::abs(prob.eta)) * (1.0 - 1e-12))
        throw ValidationError("s_max", "must be at least 10 max(sqrt(eps), |eta|)");
    const double h_max = prob.step();
    if (prob.s_max * h_max / prob.eps > 0.1 * (1.0 + 1e-12))
        throw StepTooLarge("phase per step s_max ds / eps = " + std::to_string(prob.s_max * h_max / prob.eps) +
                           " exceeds 0.1 rad");
    const auto steps = static_cast<std::size_t>(std::ceil(2.0 * prob.s_max / h_max));
    const double h = 2.0 * prob.s_max / static_cast<double>(steps);
    const auto e0 = adiabatic_vector(-prob.s_max, prob.eta, Level::plus);
    const cplx phase = std::polar(1.0, initial_phase);
    Spinor v{phase * e0[0], phase * e0[1]};
    for (std::size_t k = 0; k < steps; ++k) {
        const double s = -prob.s_max + static_cast<double>(k) * h;
        v = detail::magnus4_step(v, s, h, prob.eta, prob.eps);
    }
    const auto e1 = adiabatic_vector(prob.s_max, prob.eta, Level::minus);
    LZSolution sol;
    sol.transition = std::norm(e1[0] * v[0] + e1[1] * v[1]);
    sol.norm = std::sqrt(std::norm(v[0]) + std::norm(v[1]));
    sol.steps = steps;
    return sol;
}

inline double integrate_lz(const LZProblem& prob) { return integrate_lz_detailed(prob).transition; }

struct ConvergedLZ {
    double transition = 0.0;
    double s_max = 0.0;
    double last_change = 0.0;
    bool converged = false;
};

/// Doubles s_max from 10 max(sqrt(eps), eta) until two successive measurements
/// differ by less than rel_tol * T.
inline ConvergedLZ converged_lz(double eta, double eps, double rel_tol = 1e-3, std::size_t max_doublings = 8) {
    ConvergedLZ out;
    double s_max = 10.0 * std::max(std::sqrt(eps), std::abs(eta));
    double prev = integrate_lz(LZProblem{eta, eps, s_max, 0.0});
    for (std::size_t k = 0; k < max_doublings; ++k) {
        s_max *= 2.0;
        const double cur = integrate_lz(LZProblem{eta, eps, s_max, 0.0});
        out.transition = cur;
        out.s_max = s_max;
        out.last_change = std::abs(cur - prev);
        if (out.last_change < rel_tol * std::max(cur, 1e-300)) {
            out.converged = true;
            break;
        }
        prev = cur;
    }
    return out;
}

struct CrossCheck {
    double formula = 0.0;
    double oracle = 0.0;
    double eta = 0.0;
};

/// Maps a gap minimum (q*, p*) onto the scalar model with
/// eta^2 = g^2 / (4 |det(p . grad V0)|^{1/2}) and evaluates both routes.
template <TwoLevelPotential P>
CrossCheck cross_check_T(const P& pot, const Vec<P::dim>& q, const Vec<P::dim>& p, double eps) {
    const auto sample = pot.evaluate(q);
    const double g = gap_of(sample);
    CrossCheck cc;
    if (g == 0.0) {
        cc.formula = 1.0;
        cc.oracle = integrate_lz(LZProblem{0.0, eps, 10.0 * std::sqrt(eps), 0.0});
        return cc;
    }
    const double det = lz_determinant_factor(sample, p);
    if (det < 1e-12) throw ZeroMomentumAtCrossing("determinant factor vanishes at the crossing point");
    cc.eta = std::sqrt(g * g / (4.0 * det));
    cc.formula = std::exp(-std::numbers::pi / (4.0 * eps) * g * g / det);
    cc.oracle = converged_lz(cc.eta, eps).transition;
    return cc;
}

}  // namespace hopsim::lz

#endif
