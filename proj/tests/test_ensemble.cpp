#include <hopsim/ensemble.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numeric>

using namespace hopsim;

namespace {

bool same_bits(const std::vector<Vec<1>>& a, const std::vector<Vec<1>>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(Vec<1>)) == 0;
}

EnsembleConfig<1> config_for(const std::string& model, std::size_t n) {
    const auto d = builtin(model).defaults;
    EnsembleConfig<1> c;
    c.initial = {{d.q0}, {d.p0}, d.eps};
    c.initial_level = d.initial_level;
    c.n = n;
    c.dt = d.dt;
    c.t_fin = d.t_fin;
    c.seed = 77;
    c.output_times = 50;
    c.threads = 1;
    return c;
}

}  // namespace

TEST(Wigner, MomentsOfLargeSample) {
    const WignerGaussian<1> wg{{-1.0}, {1.0}, 1e-3};
    const std::size_t n = 100000;
    const auto pts = sample_wigner(wg, n, 5);
    double mq = 0, mp = 0, vq = 0, vp = 0;
    for (const auto& pt : pts) {
        mq += pt.q[0];
        mp += pt.p[0];
    }
    mq /= n;
    mp /= n;
    for (const auto& pt : pts) {
        vq += (pt.q[0] - mq) * (pt.q[0] - mq);
        vp += (pt.p[0] - mp) * (pt.p[0] - mp);
    }
    vq /= n - 1;
    vp /= n - 1;
    const double sigma = std::sqrt(wg.eps / 2.0);
    EXPECT_NEAR(mq, -1.0, 4.0 * sigma / std::sqrt(double(n)));
    EXPECT_NEAR(mp, 1.0, 4.0 * sigma / std::sqrt(double(n)));
    EXPECT_NEAR(vq / (wg.eps / 2.0), 1.0, 0.05);
    EXPECT_NEAR(vp / (wg.eps / 2.0), 1.0, 0.05);
}

TEST(Wigner, PointDependsOnlyOnSeedAndIndex) {
    const WignerGaussian<2> wg{{0.0, 1.0}, {2.0, 3.0}, 0.01};
    const auto a = sample_point(wg, 9, 123);
    const auto b = sample_point(wg, 9, 123);
    EXPECT_EQ(a.q, b.q);
    EXPECT_EQ(a.p, b.p);
    EXPECT_EQ(sample_wigner(wg, 200, 9)[123].q, a.q);
    EXPECT_NE(sample_point(wg, 10, 123).q, a.q);
}

TEST(Ensemble, PopulationsSumToOneAndStartOnInitialLevel) {
    auto c = config_for("simple", 500);
    const auto s = run_ensemble(builtin("simple").potential, c);
    ASSERT_EQ(s.times.size(), 50u);
    EXPECT_EQ(s.pop_minus[0], 1.0);
    EXPECT_EQ(s.pop_plus[0], 0.0);
    for (std::size_t k = 0; k < s.times.size(); ++k) EXPECT_DOUBLE_EQ(s.pop_plus[k] + s.pop_minus[k], 1.0);
    EXPECT_NEAR(s.mean_q_minus[0][0], -5.0, 4.0 * s.mean_q_minus_stderr[0][0]);
    EXPECT_NEAR(s.mean_p_minus[0][0], 1.0, 4.0 * s.mean_p_minus_stderr[0][0]);
    EXPECT_TRUE(std::isnan(s.mean_q_plus[0][0]));
    EXPECT_EQ(s.n_used, 500u);
}

TEST(Ensemble, PopulationStderrIsSampleStdOverSqrtN) {
    auto c = config_for("arctangent", 640);
    c.keep_final_states = true;
    const auto s = run_ensemble(builtin("arctangent").potential, c);
    const double n = 640.0;
    double plus = 0;
    for (const auto& f : s.final_states) plus += f.level == Level::plus;
    const double mean = plus / n;
    const double var = (plus - plus * plus / n) / (n - 1.0);
    EXPECT_DOUBLE_EQ(s.pop_plus.back(), mean);
    EXPECT_NEAR(s.pop_plus_stderr.back(), std::sqrt(var / n), 1e-15);
}

TEST(Ensemble, ExtendedGatedNeverLeavesUpperLevel) {
    const auto s = run_ensemble(builtin("extended").potential, config_for("extended", 300));
    for (double p : s.pop_plus) EXPECT_EQ(p, 1.0);
}

TEST(Ensemble, ArctangentFinalPopulationMatchesMeanRate) {
    const auto spec = builtin("arctangent");
    auto c = config_for("arctangent", 10000);
    const auto s = run_ensemble(spec.potential, c);
    // Oracle: mean over the same initial samples of the rate at each trajectory's gap minimum.
    const TimeGrid grid(c.t_fin, c.output_times, c.dt);
    double mean_rate = 0.0;
    for (std::size_t i = 0; i < c.n; ++i) {
        const auto pt = sample_point(c.initial, c.seed, i);
        TrajectoryState<1> s0;
        s0.q = pt.q;
        s0.p = pt.p;
        s0.level = Level::plus;
        const auto minima = gap_minima_along(s0, spec.potential, grid, c.eps());
        ASSERT_EQ(minima.size(), 1u);
        mean_rate += transition_probability(spec.potential, minima[0].q, minima[0].p, c.eps());
    }
    mean_rate /= static_cast<double>(c.n);
    EXPECT_NEAR(mean_rate, 0.14, 0.01);
    EXPECT_NEAR(s.pop_plus.back(), 1.0 - mean_rate, 4.0 * s.pop_plus_stderr.back());
}

TEST(Ensemble, IndependentOfWorkerCount) {
    const auto pot = builtin("dual").potential;
    auto c = config_for("dual", 700);
    c.keep_events = true;
    c.threads = 1;
    const auto a = run_ensemble(pot, c);
    for (unsigned t : {4u, 16u}) {
        c.threads = t;
        const auto b = run_ensemble(pot, c);
        EXPECT_EQ(a.pop_plus, b.pop_plus);
        EXPECT_EQ(a.pop_plus_stderr, b.pop_plus_stderr);
        EXPECT_EQ(a.mean_p_minus, b.mean_p_minus);
        EXPECT_TRUE(same_bits(a.mean_q_plus_stderr, b.mean_q_plus_stderr));
        EXPECT_TRUE(same_bits(a.mean_q_plus, b.mean_q_plus));
        EXPECT_EQ(a.n_hops, b.n_hops);
        ASSERT_EQ(a.events.size(), b.events.size());
        for (std::size_t i = 0; i < a.events.size(); ++i) {
            EXPECT_EQ(a.events[i].trajectory, b.events[i].trajectory);
            EXPECT_EQ(a.events[i].event.t_star, b.events[i].event.t_star);
        }
    }
}

TEST(Ensemble, SeedChangesResult) {
    const auto pot = builtin("simple").potential;
    auto c = config_for("simple", 300);
    const auto a = run_ensemble(pot, c);
    c.seed = 78;
    EXPECT_NE(a.pop_plus.back(), run_ensemble(pot, c).pop_plus.back());
}

TEST(Ensemble, UnconstrainedRuleTransfersOnExtended) {
    auto c = config_for("extended", 300);
    c.hop_rule = HopRule::unconstrained;
    const auto s = run_ensemble(builtin("extended").potential, c);
    EXPECT_LT(s.pop_plus.back(), 1.0);
}

TEST(Ensemble, ZeroTrajectoriesRejected) {
    auto c = config_for("simple", 1);
    c.n = 0;
    EXPECT_THROW(run_ensemble(builtin("simple").potential, c), ValidationError);
}

TEST(Branching, SinglePassageGivesTwoLeaves) {
    const auto spec = builtin("arctangent");
    auto c = config_for("arctangent", 1);
    c.keep_final_states = true;
    const auto s = run_branching(spec.potential, c);
    ASSERT_EQ(s.final_states.size(), 2u);
    const double w0 = s.final_states[0].weight, w1 = s.final_states[1].weight;
    EXPECT_NEAR(w0 + w1, 1.0, 1e-15);
    const auto& plus = s.final_states[0].level == Level::plus ? s.final_states[0] : s.final_states[1];
    const auto pt = sample_point(c.initial, c.seed, 0);
    TrajectoryState<1> s0;
    s0.q = pt.q;
    s0.p = pt.p;
    s0.level = Level::plus;
    const auto m = gap_minima_along(s0, spec.potential, TimeGrid(c.t_fin, c.output_times, c.dt), c.eps());
    ASSERT_EQ(m.size(), 1u);
    EXPECT_NEAR(plus.weight, 1.0 - transition_probability(spec.potential, m[0].q, m[0].p, c.eps()), 1e-12);
}

TEST(Branching, ExtendedHasSingleLeaf) {
    auto c = config_for("extended", 3);
    c.keep_final_states = true;
    const auto s = run_branching(builtin("extended").potential, c);
    ASSERT_EQ(s.final_states.size(), 3u);
    for (const auto& f : s.final_states) EXPECT_EQ(f.weight, 1.0);
}

TEST(Branching, DualWeightsConserved) {
    auto c = config_for("dual", 64);
    c.keep_final_states = true;
    const auto s = run_branching(builtin("dual").potential, c);
    EXPECT_GE(s.final_states.size(), 64u);
    EXPECT_LE(s.final_states.size(), 4u * 64u);
    EXPECT_GT(s.final_states.size(), 64u * 2u);
    const double total = std::accumulate(s.final_states.begin(), s.final_states.end(), 0.0,
                                         [](double a, const auto& f) { return a + f.weight; });
    EXPECT_NEAR(total, 64.0, 1e-12);
    for (std::size_t k = 0; k < s.times.size(); ++k) EXPECT_NEAR(s.pop_plus[k] + s.pop_minus[k], 1.0, 1e-12);
}

TEST(Branching, OverflowIsReported) {
    auto c = config_for("dual", 4);
    c.max_branches = 1;
    EXPECT_THROW(run_branching(builtin("dual").potential, c), BranchOverflow);
}

TEST(Branching, UnconstrainedRuleRejected) {
    auto c = config_for("simple", 4);
    c.hop_rule = HopRule::unconstrained;
    EXPECT_THROW(run_branching(builtin("simple").potential, c), ValidationError);
}

TEST(Observable, ConstantOnesGiveTwo) {
    std::vector<TrajectoryState<1>> states(10);
    for (std::size_t i = 0; i < states.size(); ++i) states[i].level = i % 3 ? Level::plus : Level::minus;
    const auto one = [](const Vec<1>&, const Vec<1>&) { return 1.0; };
    const auto est = estimate_observable<1>(states, one, one);
    EXPECT_DOUBLE_EQ(est.value, 2.0);
    EXPECT_NEAR(est.stderr, 0.0, 1e-15);
}

TEST(Observable, MomentumAtStart) {
    auto c = config_for("arctangent", 2000);
    std::vector<TrajectoryState<1>> states;
    for (std::size_t i = 0; i < c.n; ++i) states.push_back(detail::initial_state(c, i));
    const auto est = estimate_observable<1>(
        states, [](const Vec<1>&, const Vec<1>& p) { return p[0]; }, [](const Vec<1>&, const Vec<1>&) { return 0.0; });
    EXPECT_NEAR(est.value, 1.0, 4.0 * est.stderr);
    EXPECT_NEAR(est.stderr, std::sqrt(c.eps() / 2.0 / 2000.0), 0.2 * est.stderr);
    EXPECT_TRUE(est.empty_minus);
    EXPECT_FALSE(est.empty_plus);
}

TEST(Observable, IndicatorGivesFraction) {
    std::vector<TrajectoryState<1>> states(8);
    for (std::size_t i = 0; i < 8; ++i) {
        states[i].q = {static_cast<double>(i)};
        states[i].level = i < 4 ? Level::plus : Level::minus;
    }
    const auto in_box = [](const Vec<1>& q, const Vec<1>&) { return q[0] >= 1.0 && q[0] <= 2.5 ? 1.0 : 0.0; };
    const auto zero = [](const Vec<1>&, const Vec<1>&) { return 0.0; };
    EXPECT_DOUBLE_EQ(estimate_observable<1>(states, in_box, zero).value, 0.5);
}
