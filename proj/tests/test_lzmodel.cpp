#include <hopsim/lzmodel.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace hopsim;
using namespace hopsim::lz;

namespace {

struct LinearCrossing {
    static constexpr std::size_t dim = 1;
    double slope = 1.0;
    double c = 0.05;
    PotentialSample<1> evaluate(const Vec<1>& q) const {
        PotentialSample<1> s;
        s.beta = slope * q[0];
        s.d_beta[0] = slope;
        s.gamma = c;
        return s;
    }
};

double eta_for_exponent(double x, double eps) { return std::sqrt(x * eps / std::numbers::pi); }

}  // namespace

TEST(LZ, UncoupledCrossingIsTotalTransition) {
    EXPECT_NEAR(integrate_lz(LZProblem{0.0, 0.01, 1.0, 0.0}), 1.0, 1e-14);
}

TEST(LZ, HalfTransitionApproachedWithGrowingRange) {
    const double eps = 0.01;
    const double eta = eta_for_exponent(std::numbers::ln2, eps);
    const double base = 10.0 * std::max(std::sqrt(eps), eta);
    const double e1 = std::abs(integrate_lz(LZProblem{eta, eps, base, 0.0}) - 0.5);
    const double e4 = std::abs(integrate_lz(LZProblem{eta, eps, 4.0 * base, 0.0}) - 0.5);
    const double e16 = std::abs(integrate_lz(LZProblem{eta, eps, 16.0 * base, 0.0}) - 0.5);
    EXPECT_LT(e1, 0.01);
    // At least as fast as 1/s_max.
    EXPECT_LT(e4, e1 / 4.0 * 1.05);
    EXPECT_LT(e16, e4 / 4.0 * 1.05);
    EXPECT_LT(e16, 1e-4);
}

TEST(LZ, NormConservedAndPhaseIndependent) {
    const LZProblem prob{0.07, 0.01, 3.0, 0.0};
    const auto a = integrate_lz_detailed(prob, 0.0);
    const auto b = integrate_lz_detailed(prob, 1.234);
    EXPECT_NEAR(a.norm, 1.0, 1e-10);
    EXPECT_NEAR(a.transition, b.transition, 1e-13);
}

TEST(LZ, LogTransitionLinearInEtaSquared) {
    const double eps = 0.005;
    // Least-squares slope of ln T against eta^2 over [0.1 eps, 2 eps].
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = 8;
    for (int i = 0; i < n; ++i) {
        const double x = eps * (0.1 + 1.9 * i / (n - 1));
        const double y = std::log(converged_lz(std::sqrt(x), eps, 1e-4).transition);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    EXPECT_NEAR(slope / (-std::numbers::pi / eps), 1.0, 0.01);
}

TEST(LZ, SweepWithinTwoPercent) {
    for (double eps : {1e-3, 1.0 / std::sqrt(2000.0)}) {
        for (int i = 0; i < 10; ++i) {
            const double x = 0.2 + 2.8 * i / 9.0;
            const double eta = eta_for_exponent(x, eps);
            const auto c = converged_lz(eta, eps);
            EXPECT_TRUE(c.converged);
            EXPECT_NEAR(c.transition / std::exp(-x), 1.0, 0.02) << "eps " << eps << " x " << x;
        }
    }
}

TEST(LZ, InputValidation) {
    EXPECT_THROW(integrate_lz(LZProblem{0.1, 0.01, 0.5, 0.0}), ValidationError);
    EXPECT_THROW(integrate_lz(LZProblem{0.01, 0.01, 1.0, 0.01}), StepTooLarge);
    EXPECT_THROW(integrate_lz(LZProblem{0.01, 0.0, 1.0, 0.0}), ValidationError);
}

TEST(CrossCheck, ArctangentCrossing) {
    const auto pot = builtin("arctangent").potential;
    const double eps = 1e-3;
    const double p_star = std::sqrt(2.0 * (0.5 + std::sqrt(std::pow(std::numbers::pi / 4, 2) + eps) - std::sqrt(eps)));
    const auto cc = cross_check_T(pot, Vec<1>{0.0}, Vec<1>{p_star}, eps);
    EXPECT_NEAR(cc.formula, 0.1376, 5e-5);
    EXPECT_NEAR(cc.oracle / cc.formula, 1.0, 0.02);
}

TEST(CrossCheck, ConicalPointIsOneOnBothSides) {
    const auto cc = cross_check_T(LinearCrossing{1.0, 0.0}, Vec<1>{0.0}, Vec<1>{1.0}, 0.01);
    EXPECT_EQ(cc.formula, 1.0);
    EXPECT_NEAR(cc.oracle, 1.0, 1e-14);
}

TEST(CrossCheck, DoublingCouplingQuadruplesLogRate) {
    const double eps = 0.02;
    const auto a = cross_check_T(LinearCrossing{1.0, 0.02}, Vec<1>{0.0}, Vec<1>{1.0}, eps);
    const auto b = cross_check_T(LinearCrossing{1.0, 0.04}, Vec<1>{0.0}, Vec<1>{1.0}, eps);
    EXPECT_NEAR(std::log(b.formula) / std::log(a.formula), 4.0, 1e-12);
    EXPECT_NEAR(std::log(b.oracle) / std::log(a.oracle), 4.0, 0.04);
}

TEST(CrossCheck, EtaMapping) {
    // beta = s q, gamma = c: g = 2c and |det|^{1/2} = s |p|, so eta^2 = c^2 / (s |p|).
    const auto cc = cross_check_T(LinearCrossing{2.0, 0.03}, Vec<1>{0.0}, Vec<1>{1.5}, 0.01);
    EXPECT_NEAR(cc.eta * cc.eta, 0.03 * 0.03 / 3.0, 1e-15);
    EXPECT_NEAR(cc.formula, lz_formula(cc.eta, 0.01), 1e-14);
}
