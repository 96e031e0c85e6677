#ifndef HOPSIM_ENSEMBLE_HPP
#define HOPSIM_ENSEMBLE_HPP

#include <hopsim/dynamics.hpp>
#include <hopsim/errors.hpp>
#include <hopsim/potentials.hpp>
#include <hopsim/random.hpp>
#include <hopsim/types.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <thread>
#include <utility>
#include <vector>

namespace hopsim {

/// Wigner function of a Gaussian packet: (pi eps)^{-d} exp(-|(q,p) - (q0,p0)|^2 / eps),
/// i.e. a normal law with covariance (eps/2) Id.
template <std::size_t D>
struct WignerGaussian {
    Vec<D> center_q{};
    Vec<D> center_p{};
    double eps = 1e-3;
};

template <std::size_t D>
struct PhasePoint {
    Vec<D> q{};
    Vec<D> p{};
};

/// Draw `index` of the sample set; depends only on (seed, index).
template <std::size_t D>
PhasePoint<D> sample_point(const WignerGaussian<D>& wg, std::uint64_t seed, std::uint64_t index) {
    Stream stream(seed, index, StreamPurpose::sampling);
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * wg.eps));
    PhasePoint<D> pt;
    for (std::size_t i = 0; i < D; ++i) pt.q[i] = wg.center_q[i] + normal(stream);
    for (std::size_t i = 0; i < D; ++i) pt.p[i] = wg.center_p[i] + normal(stream);
    return pt;
}

template <std::size_t D>
std::vector<PhasePoint<D>> sample_wigner(const WignerGaussian<D>& wg, std::size_t n, std::uint64_t seed) {
    std::vector<PhasePoint<D>> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pts.push_back(sample_point(wg, seed, i));
    return pts;
}

template <std::size_t D>
struct EnsembleConfig {
    WignerGaussian<D> initial{};
    Level initial_level = Level::plus;
    std::size_t n = 1000;
    double dt = 0.01;
    double t_fin = 1.0;
    std::uint64_t seed = 1;
    HopRule hop_rule = HopRule::gated;
    double r_exponent = 0.125;
    std::size_t output_times = 200;
    unsigned threads = 0;  // 0: all hardware threads
    std::size_t max_branches = 64;
    bool keep_final_states = false;
    bool keep_events = false;

    double eps() const noexcept { return initial.eps; }
    double gate_scale() const { return default_gate_scale(initial.eps, r_exponent); }
};

template <std::size_t D>
struct IndexedEvent {
    std::size_t trajectory = 0;
    HopEvent<D> event;
};

/// Populations and level-conditional means at the output times.
/// Level means are weight-normalized; they are NaN where a level is empty.
template <std::size_t D>
struct EnsembleSeries {
    std::vector<double> times;
    std::vector<double> pop_plus, pop_minus;
    std::vector<double> pop_plus_stderr, pop_minus_stderr;
    std::vector<Vec<D>> mean_q_plus, mean_p_plus, mean_q_minus, mean_p_minus;
    std::vector<Vec<D>> mean_q_plus_stderr, mean_p_plus_stderr, mean_q_minus_stderr, mean_p_minus_stderr;
    std::vector<std::size_t> n_hops;  // n_hops[k]: trajectories with k accepted hops (splits in branching mode)
    std::size_t n_used = 0;
    std::size_t n_failed = 0;
    std::vector<TrajectoryState<D>> final_states;  // leaves with weights in branching mode
    std::vector<IndexedEvent<D>> events;
};

namespace detail {

inline constexpr std::size_t kBlockSize = 64;

/// Per-sample contributions: weight and weighted q, p on each level at each output time.
template <std::size_t D>
struct SampleTally {
    explicit SampleTally(std::size_t times) : w(2 * times), wq(2 * times), wp(2 * times) {}
    void clear() {
        std::fill(w.begin(), w.end(), 0.0);
        std::fill(wq.begin(), wq.end(), Vec<D>{});
        std::fill(wp.begin(), wp.end(), Vec<D>{});
    }
    static std::size_t slot(std::size_t k, Level level) { return 2 * k + (level == Level::plus ? 0 : 1); }
    void add(std::size_t k, const TrajectoryState<D>& s) {
        const std::size_t i = slot(k, s.level);
        w[i] += s.weight;
        wq[i] = axpy(s.weight, s.q, wq[i]);
        wp[i] = axpy(s.weight, s.p, wp[i]);
    }
    std::vector<double> w;
    std::vector<Vec<D>> wq, wp;
};

/// Sums over samples needed for means and delta-method standard errors.
template <std::size_t D>
struct Moments {
    explicit Moments(std::size_t times)
        : sw(2 * times), sw2(2 * times), sx(2 * times), sx2(2 * times), sxw(2 * times), sy(2 * times),
          sy2(2 * times), syw(2 * times) {}

    void add(const SampleTally<D>& t) {
        for (std::size_t i = 0; i < sw.size(); ++i) {
            const double w = t.w[i];
            sw[i] += w;
            sw2[i] += w * w;
            for (std::size_t d = 0; d < D; ++d) {
                const double x = t.wq[i][d];
                const double y = t.wp[i][d];
                sx[i][d] += x;
                sx2[i][d] += x * x;
                sxw[i][d] += x * w;
                sy[i][d] += y;
                sy2[i][d] += y * y;
                syw[i][d] += y * w;
            }
        }
        ++count;
    }

    void merge(const Moments& o) {
        for (std::size_t i = 0; i < sw.size(); ++i) {
            sw[i] += o.sw[i];
            sw2[i] += o.sw2[i];
            for (std::size_t d = 0; d < D; ++d) {
                sx[i][d] += o.sx[i][d];
                sx2[i][d] += o.sx2[i][d];
                sxw[i][d] += o.sxw[i][d];
                sy[i][d] += o.sy[i][d];
                sy2[i][d] += o.sy2[i][d];
                syw[i][d] += o.syw[i][d];
            }
        }
        count += o.count;
    }

    std::vector<double> sw, sw2;
    std::vector<Vec<D>> sx, sx2, sxw, sy, sy2, syw;
    std::size_t count = 0;
};

template <std::size_t D>
struct BlockResult {
    explicit BlockResult(std::size_t times) : moments(times) {}
    Moments<D> moments;
    std::size_t failed = 0;
    std::vector<std::size_t> hop_counts;  // per successful sample
    std::vector<TrajectoryState<D>> finals;
    std::vector<IndexedEvent<D>> events;
    std::exception_ptr error;
};

inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Runs `body(block)` for every block index on `threads` workers.
template <class Body>
void parallel_blocks(std::size_t blocks, unsigned threads, Body&& body) {
    threads = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(blocks, 1)));
    if (threads <= 1) {
        for (std::size_t b = 0; b < blocks; ++b) body(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (unsigned w = 0; w < threads; ++w)
        workers.emplace_back([&] {
            for (std::size_t b = next.fetch_add(1); b < blocks; b = next.fetch_add(1)) body(b);
        });
}

inline double stderr_of_mean(double sum, double sum_sq, std::size_t n) {
    if (n < 2) return 0.0;
    const double nd = static_cast<double>(n);
    const double var = std::max(0.0, (sum_sq - sum * sum / nd) / (nd - 1.0));
    return std::sqrt(var / nd);
}

/// Ratio estimator m = sum x / sum w with delta-method error.
inline std::pair<double, double> ratio_estimate(double sx, double sx2, double sxw, double sw, double sw2) {
    if (!(sw > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    const double m = sx / sw;
    const double ss = std::max(0.0, sx2 - 2.0 * m * sxw + m * m * sw2);
    return {m, std::sqrt(ss) / sw};
}

template <std::size_t D>
EnsembleSeries<D> finalize(const TimeGrid& grid, std::vector<BlockResult<D>>& blocks, bool keep_finals,
                           bool keep_events) {
    const std::size_t times = grid.count;
    Moments<D> total(times);
    EnsembleSeries<D> out;
    for (auto& b : blocks) {
        if (b.error) std::rethrow_exception(b.error);
        total.merge(b.moments);
        out.n_failed += b.failed;
        for (std::size_t h : b.hop_counts) {
            if (out.n_hops.size() <= h) out.n_hops.resize(h + 1, 0);
            ++out.n_hops[h];
        }
        if (keep_finals) out.final_states.insert(out.final_states.end(), b.finals.begin(), b.finals.end());
        if (keep_events) out.events.insert(out.events.end(), b.events.begin(), b.events.end());
    }
    out.n_used = total.count;
    const double n = static_cast<double>(std::max<std::size_t>(total.count, 1));
    out.times = grid.times();
    auto resize = [times](auto&... v) { (v.resize(times), ...); };
    resize(out.pop_plus, out.pop_minus, out.pop_plus_stderr, out.pop_minus_stderr, out.mean_q_plus, out.mean_p_plus,
           out.mean_q_minus, out.mean_p_minus, out.mean_q_plus_stderr, out.mean_p_plus_stderr, out.mean_q_minus_stderr,
           out.mean_p_minus_stderr);
    for (std::size_t k = 0; k < times; ++k) {
        const std::size_t ip = SampleTally<D>::slot(k, Level::plus);
        const std::size_t im = SampleTally<D>::slot(k, Level::minus);
        out.pop_plus[k] = total.sw[ip] / n;
        out.pop_minus[k] = total.sw[im] / n;
        out.pop_plus_stderr[k] = stderr_of_mean(total.sw[ip], total.sw2[ip], total.count);
        out.pop_minus_stderr[k] = stderr_of_mean(total.sw[im], total.sw2[im], total.count);
        for (std::size_t d = 0; d < D; ++d) {
            std::tie(out.mean_q_plus[k][d], out.mean_q_plus_stderr[k][d]) =
                ratio_estimate(total.sx[ip][d], total.sx2[ip][d], total.sxw[ip][d], total.sw[ip], total.sw2[ip]);
            std::tie(out.mean_p_plus[k][d], out.mean_p_plus_stderr[k][d]) =
                ratio_estimate(total.sy[ip][d], total.sy2[ip][d], total.syw[ip][d], total.sw[ip], total.sw2[ip]);
            std::tie(out.mean_q_minus[k][d], out.mean_q_minus_stderr[k][d]) =
                ratio_estimate(total.sx[im][d], total.sx2[im][d], total.sxw[im][d], total.sw[im], total.sw2[im]);
            std::tie(out.mean_p_minus[k][d], out.mean_p_minus_stderr[k][d]) =
                ratio_estimate(total.sy[im][d], total.sy2[im][d], total.syw[im][d], total.sw[im], total.sw2[im]);
        }
    }
    return out;
}

template <std::size_t D>
TrajectoryState<D> initial_state(const EnsembleConfig<D>& cfg, std::size_t index) {
    const auto pt = sample_point(cfg.initial, cfg.seed, index);
    TrajectoryState<D> s;
    s.q = pt.q;
    s.p = pt.p;
    s.level = cfg.initial_level;
    return s;
}

template <std::size_t D>
TrajectoryConfig trajectory_config(const EnsembleConfig<D>& cfg, bool branching) {
    TrajectoryConfig tc;
    tc.eps = cfg.eps();
    tc.gate_scale = cfg.gate_scale();
    tc.hop_rule = cfg.hop_rule;
    tc.branching = branching;
    return tc;
}

template <std::size_t D>
struct TallySink {
    SampleTally<D>* tally;
    std::vector<IndexedEvent<D>>* events;  // null when not kept
    std::vector<std::pair<TrajectoryState<D>, std::pair<std::size_t, std::size_t>>>* pending;  // branching only
    std::size_t index = 0;
    std::size_t accepted = 0;

    void record(std::size_t k, const TrajectoryState<D>& s) { tally->add(k, s); }
    void event(const HopEvent<D>& e) {
        if (e.accepted) ++accepted;
        if (events) events->push_back({index, e});
    }
    void split(const TrajectoryState<D>& child, std::size_t k, std::size_t step) {
        if (pending) pending->push_back({child, {k, step}});
    }
};

template <TwoLevelPotential P>
EnsembleSeries<P::dim> run(const P& pot, const EnsembleConfig<P::dim>& cfg, bool branching) {
    constexpr std::size_t D = P::dim;
    if (cfg.n < 1) throw ValidationError("N", "must be at least 1");
    if (!(cfg.eps() > 0.0)) throw ValidationError("eps", "must be positive");
    if (branching && cfg.hop_rule == HopRule::unconstrained)
        throw ValidationError("hop_rule", "branching requires gated or disabled hopping");
    const TimeGrid grid(cfg.t_fin, cfg.output_times, cfg.dt);
    const TrajectoryConfig tc = trajectory_config(cfg, branching);
    const std::size_t n_blocks = (cfg.n + kBlockSize - 1) / kBlockSize;
    std::vector<BlockResult<D>> blocks(n_blocks, BlockResult<D>(grid.count));

    parallel_blocks(n_blocks, cfg.threads, [&](std::size_t b) {
        BlockResult<D>& res = blocks[b];
        SampleTally<D> tally(grid.count);
        std::vector<IndexedEvent<D>> events;
        std::vector<std::pair<TrajectoryState<D>, std::pair<std::size_t, std::size_t>>> pending;
        std::vector<TrajectoryState<D>> finals;
        try {
            const std::size_t end = std::min(cfg.n, (b + 1) * kBlockSize);
            for (std::size_t i = b * kBlockSize; i < end; ++i) {
                tally.clear();
                events.clear();
                pending.clear();
                finals.clear();
                TallySink<D> sink{&tally, cfg.keep_events ? &events : nullptr, branching ? &pending : nullptr, i, 0};
                Stream hop_stream(cfg.seed, i, StreamPurpose::hopping);
                try {
                    TrajectoryState<D> s = initial_state(cfg, i);
                    if (cfg.hop_rule == HopRule::gated) s = prepared(s, pot);
                    tally.add(0, s);
                    finals.push_back(detail::run_segment(pot, tc, grid, s, 0, 0, hop_stream, sink));
                    std::size_t leaves = 1;
                    while (!pending.empty()) {
                        auto [child, at] = pending.back();
                        pending.pop_back();
                        if (++leaves > cfg.max_branches)
                            throw BranchOverflow("trajectory " + std::to_string(i) + " exceeded " +
                                                 std::to_string(cfg.max_branches) + " branches");
                        finals.push_back(
                            detail::run_segment(pot, tc, grid, child, at.first, at.second, hop_stream, sink));
                    }
                } catch (const DegenerateGap&) {
                    ++res.failed;
                    continue;
                } catch (const ZeroMomentumAtCrossing&) {
                    ++res.failed;
                    continue;
                }
                res.moments.add(tally);
                res.hop_counts.push_back(sink.accepted);
                if (cfg.keep_final_states) res.finals.insert(res.finals.end(), finals.begin(), finals.end());
                if (cfg.keep_events) res.events.insert(res.events.end(), events.begin(), events.end());
            }
        } catch (...) {
            res.error = std::current_exception();
        }
    });
    return finalize(grid, blocks, cfg.keep_final_states, cfg.keep_events);
}

}  // namespace detail

/// Probabilistic surface hopping ensemble: unit weights, hops decided by uniform draws.
/// Results depend only on (potential, config), never on the worker count.
template <TwoLevelPotential P>
EnsembleSeries<P::dim> run_ensemble(const P& pot, const EnsembleConfig<P::dim>& cfg) {
    return detail::run(pot, cfg, false);
}

/// Deterministic branching: each accepted minimum splits a trajectory into
/// weights (1 - T) and T. Uses the same initial samples as run_ensemble.
template <TwoLevelPotential P>
EnsembleSeries<P::dim> run_branching(const P& pot, const EnsembleConfig<P::dim>& cfg) {
    return detail::run(pot, cfg, true);
}

struct ObservableEstimate {
    double value = 0.0;
    double stderr = 0.0;
    bool empty_plus = false;
    bool empty_minus = false;
};

/// (1/N+) sum a+(q_j, p_j) + (1/N-) sum a-(q_j, p_j) over the states of each
/// level (weighted when weights differ from 1), with a jackknife error.
/// An empty level contributes zero and is flagged.
template <std::size_t D>
ObservableEstimate estimate_observable(const std::vector<TrajectoryState<D>>& states,
                                       const std::function<double(const Vec<D>&, const Vec<D>&)>& a_plus,
                                       const std::function<double(const Vec<D>&, const Vec<D>&)>& a_minus) {
    const std::size_t n = states.size();
    std::vector<double> a(n);
    double w_sum[2] = {0.0, 0.0};
    double wa_sum[2] = {0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
        const auto& s = states[j];
        const int l = s.level == Level::plus ? 0 : 1;
        a[j] = l == 0 ? a_plus(s.q, s.p) : a_minus(s.q, s.p);
        w_sum[l] += s.weight;
        wa_sum[l] += s.weight * a[j];
    }
    auto combine = [](const double* w, const double* wa) {
        double v = 0.0;
        for (int l = 0; l < 2; ++l)
            if (w[l] > 0.0) v += wa[l] / w[l];
        return v;
    };
    ObservableEstimate est;
    est.value = combine(w_sum, wa_sum);
    est.empty_plus = !(w_sum[0] > 0.0);
    est.empty_minus = !(w_sum[1] > 0.0);
    if (n < 2) return est;
    std::vector<double> loo(n);
    double loo_mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const auto& s = states[j];
        const int l = s.level == Level::plus ? 0 : 1;
        double w[2] = {w_sum[0], w_sum[1]};
        double wa[2] = {wa_sum[0], wa_sum[1]};
        w[l] -= s.weight;
        wa[l] -= s.weight * a[j];
        if (w[l] <= 1e-300 * (1.0 + w_sum[l])) w[l] = 0.0;
        loo[j] = combine(w, wa);
        loo_mean += loo[j];
    }
    loo_mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
    est.stderr = std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n) * ss);
    return est;
}

}  // namespace hopsim

#endif
