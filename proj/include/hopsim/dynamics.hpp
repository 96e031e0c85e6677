#ifndef HOPSIM_DYNAMICS_HPP
#define HOPSIM_DYNAMICS_HPP

#include <hopsim/errors.hpp>
#include <hopsim/potentials.hpp>
#include <hopsim/random.hpp>
#include <hopsim/types.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

namespace hopsim {

/// Phase-space point on one eigenvalue surface. Momentum is mass scaled, so the
/// kinetic energy is |p|^2/2.
template <std::size_t D>
struct TrajectoryState {
    Vec<D> q{};
    Vec<D> p{};
    Level level = Level::plus;
    double weight = 1.0;
    double t = 0.0;
    double slope_prev = 0.0;  // p . grad g at (q, p)
    bool armed = true;        // eligible to hop at the next detected minimum
};

template <std::size_t D>
struct HopEvent {
    double t_star = 0.0;
    Vec<D> q_star{};
    Vec<D> p_star{};
    double gap_star = 0.0;
    double rate = 0.0;
    bool accepted = false;
    bool frustrated = false;
    Vec<D> p_out{};
    Level level_in = Level::plus;
};

/// Refined local minimum of t -> g(q(t)).
template <std::size_t D>
struct GapMinimum {
    double t = 0.0;
    Vec<D> q{};
    Vec<D> p{};
    double gap = 0.0;
};

enum class HopRule {
    gated,          // hop attempts only at local gap minima with g <= R sqrt(eps)
    unconstrained,  // hop attempt at every step with the instantaneous rate
    disabled,       // pure classical transport
};

/// Default jump-set scale R = eps^{-1/8}.
inline double default_gate_scale(double eps, double exponent = 0.125) { return std::pow(eps, -exponent); }

// ---------------------------------------------------------------------------

template <TwoLevelPotential P>
double classical_energy(const TrajectoryState<P::dim>& s, const P& pot) {
    return 0.5 * norm2(s.p) + eigenvalue_of(pot.evaluate(s.q), s.level);
}

template <TwoLevelPotential P>
double gap_slope(const P& pot, const Vec<P::dim>& q, const Vec<P::dim>& p) {
    return dot(p, grad_gap_of(pot.evaluate(q)));
}

/// Computes the gap slope and arms the latch if the gap is decreasing.
template <TwoLevelPotential P>
TrajectoryState<P::dim> prepared(TrajectoryState<P::dim> s, const P& pot) {
    s.slope_prev = gap_slope(pot, s.q, s.p);
    s.armed = s.slope_prev < 0.0;
    return s;
}

namespace detail {

/// Velocity Verlet step reusing the sample at the start point. Returns the
/// sample at the end point through `sample`.
template <TwoLevelPotential P>
TrajectoryState<P::dim> verlet_cached(const TrajectoryState<P::dim>& s, PotentialSample<P::dim>& sample, const P& pot,
                                      double dt) {
    constexpr std::size_t D = P::dim;
    TrajectoryState<D> n = s;
    const Vec<D> f0 = force_of(sample, s.level);
    for (std::size_t i = 0; i < D; ++i) {
        n.p[i] += 0.5 * dt * f0[i];
        n.q[i] += dt * n.p[i];
    }
    sample = pot.evaluate(n.q);
    const Vec<D> f1 = force_of(sample, s.level);
    for (std::size_t i = 0; i < D; ++i) n.p[i] += 0.5 * dt * f1[i];
    n.t = s.t + dt;
    return n;
}

template <std::size_t D>
double rate_of(const PotentialSample<D>& sample, const Vec<D>& p, double eps) {
    const double g = gap_of(sample);
    if (g == 0.0) return 1.0;
    const double det = lz_determinant_factor(sample, p);
    if (norm(p) < 1e-12 || det < 1e-12)
        throw ZeroMomentumAtCrossing("transversality violated at gap minimum: |p| = " + std::to_string(norm(p)) +
                                     ", |det(p.grad V0)|^{1/2} = " + std::to_string(det));
    return std::exp(-std::numbers::pi / (4.0 * eps) * g * g / det);
}

}  // namespace detail

/// One Stoermer-Verlet step on |p|^2/2 + lambda^level(q). Level and weight are unchanged.
template <TwoLevelPotential P>
TrajectoryState<P::dim> verlet_step(const TrajectoryState<P::dim>& s, const P& pot, double dt) {
    auto sample = pot.evaluate(s.q);
    return detail::verlet_cached(s, sample, pot, dt);
}

/// Landau-Zener rate exp(-(pi / 4 eps) g^2 / |det(p . grad V0)|^{1/2}).
template <TwoLevelPotential P>
double transition_probability(const P& pot, const Vec<P::dim>& q, const Vec<P::dim>& p, double eps) {
    return detail::rate_of(pot.evaluate(q), p, eps);
}

/// Energy preserving post-hop momentum p + j g p/|p|^2, or nullopt for a
/// frustrated upward hop (1 - g/|p|^2 <= 0).
template <std::size_t D>
std::optional<Vec<D>> drift_momentum_for_gap(const Vec<D>& p, Level level_in, double gap) {
    const double p2 = norm2(p);
    if (!(p2 > 0.0)) throw ZeroMomentumAtCrossing("drift undefined for zero momentum");
    const double factor = 1.0 + sign(level_in) * gap / p2;
    if (factor <= 0.0) return std::nullopt;
    return scaled(factor, p);
}

template <TwoLevelPotential P>
std::optional<Vec<P::dim>> drift_momentum(const Vec<P::dim>& q, const Vec<P::dim>& p, Level level_in, const P& pot) {
    return drift_momentum_for_gap(p, level_in, gap_of(pot.evaluate(q)));
}

namespace detail {

template <TwoLevelPotential P>
std::optional<GapMinimum<P::dim>> detect_with_sample(const TrajectoryState<P::dim>& before,
                                                     TrajectoryState<P::dim>& after,
                                                     const PotentialSample<P::dim>& after_sample, const P& pot,
                                                     double eps, double gate_scale) {
    const double h0 = before.slope_prev;
    const double h1 = dot(after.p, grad_gap_of(after_sample));
    after.slope_prev = h1;
    if (!(before.armed && h0 < 0.0 && h1 >= 0.0)) {
        after.armed = before.armed || h1 < 0.0;
        return std::nullopt;
    }
    after.armed = false;
    const double tau = (after.t - before.t) * h0 / (h0 - h1);
    const auto star = verlet_step(before, pot, tau);
    const double g = gap_of(pot.evaluate(star.q));
    if (g > gate_scale * std::sqrt(eps)) return std::nullopt;
    return GapMinimum<P::dim>{star.t, star.q, star.p, g};
}

}  // namespace detail

/// Looks for a local gap minimum inside the step before -> after.
///
/// `before.slope_prev` must hold the gap slope at `before`; `after.slope_prev`
/// and `after.armed` are updated. A minimum is reported when the slope goes
/// from negative to non-negative while armed and the refined gap satisfies
/// g(q*) <= R sqrt(eps). The refined time comes from one secant step on the
/// slope followed by a partial Verlet step. Detection clears the latch; it
/// re-arms at a later step end with negative slope.
template <TwoLevelPotential P>
std::optional<GapMinimum<P::dim>> detect_minimum(const TrajectoryState<P::dim>& before, TrajectoryState<P::dim>& after,
                                                 const P& pot, double eps, double gate_scale) {
    return detail::detect_with_sample(before, after, pot.evaluate(after.q), pot, eps, gate_scale);
}

template <std::size_t D>
struct HopOutcome {
    TrajectoryState<D> state;
    HopEvent<D> event;
};

/// Accept-reject hop at a detected minimum with uniform draw `zeta`.
template <TwoLevelPotential P>
HopOutcome<P::dim> attempt_hop(const TrajectoryState<P::dim>& s, const GapMinimum<P::dim>& m, const P& pot, double eps,
                               double zeta) {
    HopOutcome<P::dim> out{s, {}};
    HopEvent<P::dim>& ev = out.event;
    ev.t_star = m.t;
    ev.q_star = m.q;
    ev.p_star = m.p;
    ev.gap_star = m.gap;
    ev.level_in = s.level;
    ev.rate = transition_probability(pot, m.q, m.p, eps);
    if (!(ev.rate > zeta)) return out;
    const auto p_out = drift_momentum_for_gap(m.p, s.level, m.gap);
    if (!p_out) {
        ev.frustrated = true;
        return out;
    }
    ev.accepted = true;
    ev.p_out = *p_out;
    TrajectoryState<P::dim>& n = out.state;
    n.q = m.q;
    n.p = *p_out;
    n.level = flipped(s.level);
    n.t = m.t;
    n.slope_prev = m.gap > 0.0 ? gap_slope(pot, n.q, n.p) : 0.0;
    n.armed = false;
    return out;
}

// ---------------------------------------------------------------------------
// Time grid shared by trajectories, ensembles and the reference solver.

/// Uniform output grid over [0, t_fin] with an integer number of equal
/// propagation steps per output interval.
struct TimeGrid {
    double t_fin = 0.0;
    std::size_t count = 0;
    std::size_t steps_per_interval = 1;
    double dt = 0.0;

    TimeGrid() = default;
    TimeGrid(double t_final, std::size_t output_count, double dt_max) : t_fin(t_final), count(output_count) {
        if (!(t_final > 0.0)) throw ValidationError("t_fin", "must be positive");
        if (output_count < 2) throw ValidationError("output_times", "need at least 2 output times");
        if (!(dt_max > 0.0)) throw ValidationError("dt", "must be positive");
        const double interval = spacing();
        steps_per_interval = static_cast<std::size_t>(std::ceil(interval / dt_max * (1.0 - 1e-12)));
        if (steps_per_interval == 0) steps_per_interval = 1;
        dt = interval / static_cast<double>(steps_per_interval);
    }

    double spacing() const noexcept { return t_fin / static_cast<double>(count - 1); }
    double time(std::size_t k) const noexcept {
        return k + 1 == count ? t_fin : static_cast<double>(k) * spacing();
    }
    /// End time of step `step` inside interval k -> k+1.
    double step_end(std::size_t k, std::size_t step) const noexcept {
        return step + 1 == steps_per_interval ? time(k + 1) : time(k) + static_cast<double>(step + 1) * dt;
    }
    std::vector<double> times() const {
        std::vector<double> ts(count);
        for (std::size_t k = 0; k < count; ++k) ts[k] = time(k);
        return ts;
    }
};

struct TrajectoryConfig {
    double eps = 1e-3;
    double gate_scale = default_gate_scale(1e-3);  // R
    HopRule hop_rule = HopRule::gated;
    bool branching = false;  // split weights instead of drawing
};

namespace detail {

/// Propagates `cur` from inside step `step` of interval `k` to t_fin.
///
/// The sink receives `record(k, state)` at every output time after the start,
/// `event(HopEvent)` for every hop attempt and, in branching mode,
/// `split(child, k, step)` for a hopped copy that resumes at step `step`
/// of interval k (step may equal steps_per_interval).
template <TwoLevelPotential P, class Sink>
TrajectoryState<P::dim> run_segment(const P& pot, const TrajectoryConfig& cfg, const TimeGrid& grid,
                                    TrajectoryState<P::dim> cur, std::size_t k, std::size_t step, Stream& stream,
                                    Sink& sink) {
    constexpr std::size_t D = P::dim;
    auto sample = pot.evaluate(cur.q);
    for (; k + 1 < grid.count; ++k, step = 0) {
        for (; step < grid.steps_per_interval; ++step) {
            const double t_end = grid.step_end(k, step);
            TrajectoryState<D> next = verlet_cached(cur, sample, pot, t_end - cur.t);
            next.t = t_end;

            if (cfg.hop_rule == HopRule::gated) {
                const auto m = detect_with_sample(cur, next, sample, pot, cfg.eps, cfg.gate_scale);
                if (m) {
                    auto hop = attempt_hop(cur, *m, pot, cfg.eps, cfg.branching ? 0.0 : stream.uniform());
                    sink.event(hop.event);
                    if (hop.event.accepted) {
                        // The hopped copy finishes the current step on its new level.
                        auto hop_sample = pot.evaluate(hop.state.q);
                        TrajectoryState<D> moved = verlet_cached(hop.state, hop_sample, pot, t_end - hop.state.t);
                        moved.t = t_end;
                        moved.slope_prev = dot(moved.p, grad_gap_of(hop_sample));
                        moved.armed = false;
                        if (cfg.branching) {
                            moved.weight = cur.weight * hop.event.rate;
                            next.weight = cur.weight * (1.0 - hop.event.rate);
                            sink.split(moved, k, step + 1);
                        } else {
                            next = moved;
                            sample = hop_sample;
                        }
                    }
                }
            } else if (cfg.hop_rule == HopRule::unconstrained) {
                const double g = gap_of(sample);
                const double det = lz_determinant_factor(sample, next.p);
                double rate = 0.0;
                if (g == 0.0) {
                    rate = 1.0;
                } else if (det > 1e-12) {
                    rate = std::exp(-std::numbers::pi / (4.0 * cfg.eps) * g * g / det);
                }
                const double zeta = stream.uniform();
                if (rate > zeta) {
                    HopEvent<D> ev;
                    ev.t_star = t_end;
                    ev.q_star = next.q;
                    ev.p_star = next.p;
                    ev.gap_star = g;
                    ev.rate = rate;
                    ev.level_in = next.level;
                    if (const auto p_out = drift_momentum_for_gap(next.p, next.level, g)) {
                        ev.accepted = true;
                        ev.p_out = *p_out;
                        next.p = *p_out;
                        next.level = flipped(next.level);
                    } else {
                        ev.frustrated = true;
                    }
                    sink.event(ev);
                }
            }
            cur = next;
        }
        sink.record(k + 1, cur);
    }
    return cur;
}

}  // namespace detail

template <std::size_t D>
struct TrajectoryResult {
    TrajectoryState<D> final_state;
    std::vector<HopEvent<D>> events;
    std::vector<TrajectoryState<D>> samples;  // one per output time
};

/// Single trajectory (probabilistic hops) from t = 0 to grid.t_fin. Hop draws
/// come from `stream`, so the result is a pure function of its inputs.
template <TwoLevelPotential P>
TrajectoryResult<P::dim> propagate_trajectory(const TrajectoryState<P::dim>& state0, const P& pot,
                                              const TrajectoryConfig& cfg, const TimeGrid& grid, Stream stream) {
    constexpr std::size_t D = P::dim;
    struct Collector {
        TrajectoryResult<D>* out;
        void record(std::size_t, const TrajectoryState<D>& s) { out->samples.push_back(s); }
        void event(const HopEvent<D>& e) { out->events.push_back(e); }
        void split(const TrajectoryState<D>&, std::size_t, std::size_t) {}
    };
    TrajectoryConfig probabilistic = cfg;
    probabilistic.branching = false;
    TrajectoryResult<D> result;
    result.samples.reserve(grid.count);
    Collector sink{&result};
    TrajectoryState<D> s = cfg.hop_rule == HopRule::gated ? prepared(state0, pot) : state0;
    s.t = 0.0;
    result.samples.push_back(s);
    result.final_state = detail::run_segment(pot, probabilistic, grid, s, 0, 0, stream, sink);
    return result;
}

/// Every local gap minimum met by the hop-free classical trajectory from
/// `state0` over the grid, regardless of the gap size.
template <TwoLevelPotential P>
std::vector<GapMinimum<P::dim>> gap_minima_along(const TrajectoryState<P::dim>& state0, const P& pot,
                                                 const TimeGrid& grid, double eps) {
    std::vector<GapMinimum<P::dim>> out;
    TrajectoryState<P::dim> cur = prepared(state0, pot);
    cur.t = 0.0;
    for (std::size_t k = 0; k + 1 < grid.count; ++k) {
        for (std::size_t step = 0; step < grid.steps_per_interval; ++step) {
            const double t_end = grid.step_end(k, step);
            TrajectoryState<P::dim> next = verlet_step(cur, pot, t_end - cur.t);
            next.t = t_end;
            if (auto m = detect_minimum(cur, next, pot, eps, std::numeric_limits<double>::infinity()))
                out.push_back(*m);
            cur = next;
        }
    }
    return out;
}

}  // namespace hopsim

#endif
