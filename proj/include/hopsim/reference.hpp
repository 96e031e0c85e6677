#ifndef HOPSIM_REFERENCE_HPP
#define HOPSIM_REFERENCE_HPP

#include <hopsim/dynamics.hpp>
#include <hopsim/errors.hpp>
#include <hopsim/potentials.hpp>
#include <hopsim/types.hpp>

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

namespace hopsim {

using cplx = std::complex<double>;

/// Uniform periodic grid on [a, b) with n points.
struct Grid {
    double a = -1.0;
    double b = 1.0;
    std::size_t n = 1024;

    double length() const noexcept { return b - a; }
    double dq() const noexcept { return length() / static_cast<double>(n); }
    double q(std::size_t j) const noexcept { return a + static_cast<double>(j) * dq(); }
    /// Signed angular wavenumber of FFT mode m.
    double k(std::size_t m) const noexcept {
        const auto mm = static_cast<double>(m < n / 2 ? static_cast<long long>(m)
                                                       : static_cast<long long>(m) - static_cast<long long>(n));
        return 2.0 * std::numbers::pi * mm / length();
    }
};

inline bool is_power_of_two(std::size_t n) noexcept { return n > 0 && (n & (n - 1)) == 0; }

/// Two-component wavefunction sampled on a grid.
struct GridWavefunction {
    Grid grid;
    std::vector<cplx> c0, c1;
    double eps = 1e-3;
    double t = 0.0;

    double norm2() const {
        double s = 0.0;
        for (std::size_t j = 0; j < c0.size(); ++j) s += std::norm(c0[j]) + std::norm(c1[j]);
        return s * grid.dq();
    }
};

struct LevelDiagnostics {
    double t = 0.0;
    double n_plus = 0.0;
    double n_minus = 0.0;
    double mean_q_plus = 0.0;
    double mean_q_minus = 0.0;
    double mean_p_plus = 0.0;
    double mean_p_minus = 0.0;
    double norm = 0.0;
    double boundary_mass = 0.0;
};

/// In-place complex FFT of fixed length. Unnormalized in both directions.
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n) {
        std::lock_guard<std::mutex> lock(planner_mutex());
        auto* buf = fftw_alloc_complex(n);
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        forward_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, flags);
        backward_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD, flags);
        fftw_free(buf);
    }
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;
    ~Fft() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }

    void forward(std::span<cplx> data) const { fftw_execute_dft(forward_, as_fftw(data), as_fftw(data)); }
    void backward(std::span<cplx> data) const { fftw_execute_dft(backward_, as_fftw(data), as_fftw(data)); }
    std::size_t size() const noexcept { return n_; }

private:
    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }
    static fftw_complex* as_fftw(std::span<cplx> d) { return reinterpret_cast<fftw_complex*>(d.data()); }

    std::size_t n_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

/// Complex symmetric 2x2 matrix [[u00, u01], [u01, u11]].
struct SymmetricPropagator {
    cplx u00, u01, u11;

    void apply(cplx& x0, cplx& x1) const noexcept {
        const cplx y0 = u00 * x0 + u01 * x1;
        const cplx y1 = u01 * x0 + u11 * x1;
        x0 = y0;
        x1 = y1;
    }
};

/// exp(-i theta V) = e^{-i theta alpha} [cos(theta r) Id - i sin(theta r) V0 / r]
template <std::size_t D>
SymmetricPropagator potential_exponential(const PotentialSample<D>& s, double theta) {
    const double r = coupling_radius(s);
    const double c = std::cos(theta * r);
    double sinc;  // sin(theta r) / r
    if (r < 1e-12) {
        const double x = theta * r;
        sinc = theta * (1.0 - x * x / 6.0);
    } else {
        sinc = std::sin(theta * r) / r;
    }
    const cplx phase = std::polar(1.0, -theta * s.alpha);
    const cplx mi(0.0, -1.0);
    return {phase * (c + mi * sinc * s.beta), phase * (mi * sinc * s.gamma), phase * (c - mi * sinc * s.beta)};
}

/// Multiplies by exp(-i (dt/2) V(q) / eps) pointwise.
template <TwoLevelPotential P>
    requires(P::dim == 1)
void potential_half_step(GridWavefunction& psi, const P& pot, double dt) {
    const double theta = 0.5 * dt / psi.eps;
    for (std::size_t j = 0; j < psi.grid.n; ++j)
        potential_exponential(pot.evaluate(Vec<1>{psi.grid.q(j)}), theta).apply(psi.c0[j], psi.c1[j]);
}

/// exp(-i dt eps k^2 / 2) on each Fourier mode of both components.
class KineticPropagator {
public:
    KineticPropagator(const Grid& grid, double eps, double dt) : fft_(grid.n), phase_(grid.n) {
        if (!is_power_of_two(grid.n)) throw ValidationError("grid", "point count must be a power of two");
        const double inv_n = 1.0 / static_cast<double>(grid.n);
        for (std::size_t m = 0; m < grid.n; ++m) {
            const double k = grid.k(m);
            phase_[m] = std::polar(inv_n, -0.5 * dt * eps * k * k);
        }
    }

    void apply(std::span<cplx> component) const {
        fft_.forward(component);
        for (std::size_t m = 0; m < phase_.size(); ++m) component[m] *= phase_[m];
        fft_.backward(component);
    }

    void apply(GridWavefunction& psi) const {
        apply(std::span<cplx>(psi.c0));
        apply(std::span<cplx>(psi.c1));
    }

private:
    Fft fft_;
    std::vector<cplx> phase_;
};

inline void kinetic_full_step(GridWavefunction& psi, double dt) {
    KineticPropagator(psi.grid, psi.eps, dt).apply(psi);
    psi.t += dt;
}

/// Real unit eigenvector of V(q) for `level`: the largest-norm column of the
/// projector, normalized, with its first nonzero component made positive.
inline std::array<double, 2> eigenvector_of(const Mat2& proj) {
    const double n0 = std::hypot(proj[0][0], proj[1][0]);
    const double n1 = std::hypot(proj[0][1], proj[1][1]);
    std::array<double, 2> v = n0 >= n1 ? std::array<double, 2>{proj[0][0] / n0, proj[1][0] / n0}
                                       : std::array<double, 2>{proj[0][1] / n1, proj[1][1] / n1};
    const double lead = std::abs(v[0]) > 1e-14 ? v[0] : v[1];
    if (lead < 0.0) v = {-v[0], -v[1]};
    return v;
}

/// (pi eps)^{-1/4} exp(-(q - q0)^2 / (2 eps) + i p0 (q - q0) / eps) e^level(q), normalized on the grid.
template <TwoLevelPotential P>
    requires(P::dim == 1)
GridWavefunction gaussian_packet(const Grid& grid, double q0, double p0, double eps, Level level, const P& pot) {
    const double width = std::sqrt(eps);
    const double outside = 0.5 * std::erfc((q0 - grid.a) / width) + 0.5 * std::erfc((grid.b - q0) / width);
    if (outside >= 1e-10)
        throw DomainTooSmall("packet mass outside [" + std::to_string(grid.a) + ", " + std::to_string(grid.b) +
                             "] is " + std::to_string(outside));
    GridWavefunction psi{grid, std::vector<cplx>(grid.n), std::vector<cplx>(grid.n), eps, 0.0};
    const double amp = std::pow(std::numbers::pi * eps, -0.25);
    for (std::size_t j = 0; j < grid.n; ++j) {
        const double q = grid.q(j);
        const double x = q - q0;
        const cplx g = amp * std::exp(cplx(-x * x / (2.0 * eps), p0 * x / eps));
        const EigenData e = eigen(pot, Vec<1>{q});
        const auto v = eigenvector_of(level == Level::plus ? e.proj_plus : e.proj_minus);
        psi.c0[j] = g * v[0];
        psi.c1[j] = g * v[1];
    }
    const double scale = 1.0 / std::sqrt(psi.norm2());
    for (std::size_t j = 0; j < grid.n; ++j) {
        psi.c0[j] *= scale;
        psi.c1[j] *= scale;
    }
    return psi;
}

struct ReferenceResult {
    std::vector<LevelDiagnostics> diagnostics;
    GridWavefunction final_state;
    double dt = 0.0;
    bool boundary_leak = false;
    double max_norm_drift = 0.0;
};

/// Strang splitting (half potential, full kinetic, half potential) with
/// Fourier collocation. Propagators are tabulated once per (grid, dt).
class StrangSolver {
public:
    /// Mass fraction allowed in the outer n/32 points on each side.
    static constexpr double kBoundaryTolerance = 1e-8;

    template <TwoLevelPotential P>
        requires(P::dim == 1)
    StrangSolver(const P& pot, const Grid& grid, double eps, double dt)
        : grid_(grid), eps_(eps), dt_(dt), kinetic_(grid, eps, dt), fft_(grid.n) {
        half_.reserve(grid.n);
        full_.reserve(grid.n);
        proj_plus_.reserve(grid.n);
        for (std::size_t j = 0; j < grid.n; ++j) {
            const auto s = pot.evaluate(Vec<1>{grid.q(j)});
            half_.push_back(potential_exponential(s, 0.5 * dt / eps));
            full_.push_back(potential_exponential(s, dt / eps));
            proj_plus_.push_back(eigen_of(s).proj_plus);
        }
    }

    double dt() const noexcept { return dt_; }

    /// Advances `steps` Strang steps; adjacent potential half steps are fused.
    void advance(GridWavefunction& psi, std::size_t steps) const {
        if (steps == 0) return;
        apply_all(half_, psi);
        for (std::size_t s = 0; s < steps; ++s) {
            kinetic_.apply(psi);
            apply_all(s + 1 == steps ? half_ : full_, psi);
        }
        psi.t += static_cast<double>(steps) * dt_;
    }

    LevelDiagnostics diagnose(const GridWavefunction& psi) const {
        LevelDiagnostics d;
        d.t = psi.t;
        const std::size_t n = grid_.n;
        const double dq = grid_.dq();
        // Level components phi+ = Pi+ psi and phi- = psi - phi+.
        std::vector<cplx> plus0(n), plus1(n), minus0(n), minus1(n);
        double n_plus = 0.0, n_minus = 0.0, q_plus = 0.0, q_minus = 0.0, total = 0.0, edge = 0.0;
        const std::size_t band = std::max<std::size_t>(n / 32, 1);
        for (std::size_t j = 0; j < n; ++j) {
            const Mat2& pp = proj_plus_[j];
            plus0[j] = pp[0][0] * psi.c0[j] + pp[0][1] * psi.c1[j];
            plus1[j] = pp[1][0] * psi.c0[j] + pp[1][1] * psi.c1[j];
            minus0[j] = psi.c0[j] - plus0[j];
            minus1[j] = psi.c1[j] - plus1[j];
            const double wp = std::norm(plus0[j]) + std::norm(plus1[j]);
            const double wm = std::norm(minus0[j]) + std::norm(minus1[j]);
            const double q = grid_.q(j);
            n_plus += wp;
            n_minus += wm;
            q_plus += q * wp;
            q_minus += q * wm;
            const double w = std::norm(psi.c0[j]) + std::norm(psi.c1[j]);
            total += w;
            if (j < band || j >= n - band) edge += w;
        }
        d.n_plus = n_plus * dq;
        d.n_minus = n_minus * dq;
        d.norm = total * dq;
        d.boundary_mass = edge * dq;
        d.mean_q_plus = n_plus > 0.0 ? q_plus / n_plus : 0.0;
        d.mean_q_minus = n_minus > 0.0 ? q_minus / n_minus : 0.0;
        // Parseval: sum_j |phi_j|^2 = (1/n) sum_m |phi_hat_m|^2.
        const double nn = static_cast<double>(n);
        const double p_plus = momentum_moment(plus0) + momentum_moment(plus1);
        const double p_minus = momentum_moment(minus0) + momentum_moment(minus1);
        d.mean_p_plus = n_plus > 0.0 ? p_plus / (nn * n_plus) : 0.0;
        d.mean_p_minus = n_minus > 0.0 ? p_minus / (nn * n_minus) : 0.0;
        return d;
    }

private:
    static void apply_all(const std::vector<SymmetricPropagator>& u, GridWavefunction& psi) {
        for (std::size_t j = 0; j < u.size(); ++j) u[j].apply(psi.c0[j], psi.c1[j]);
    }

    /// sum_m eps k_m |phi_hat_m|^2, transforming `phi` in place.
    double momentum_moment(std::vector<cplx>& phi) const {
        fft_.forward(std::span<cplx>(phi));
        double s = 0.0;
        for (std::size_t m = 0; m < phi.size(); ++m) s += eps_ * grid_.k(m) * std::norm(phi[m]);
        return s;
    }

    Grid grid_;
    double eps_;
    double dt_;
    KineticPropagator kinetic_;
    Fft fft_;
    std::vector<SymmetricPropagator> half_, full_;
    std::vector<Mat2> proj_plus_;
};

/// Propagates psi0 over the uniform output grid [0, t_fin] and reports level
/// diagnostics at every output time. `dt_max` is reduced so that each output
/// interval holds an integer number of steps.
template <TwoLevelPotential P>
    requires(P::dim == 1)
ReferenceResult solve(const GridWavefunction& psi0, const P& pot, double dt_max, double t_fin,
                      std::size_t output_times) {
    const TimeGrid tg(t_fin, output_times, dt_max);
    const StrangSolver solver(pot, psi0.grid, psi0.eps, tg.dt);
    ReferenceResult res;
    res.dt = tg.dt;
    GridWavefunction psi = psi0;
    psi.t = 0.0;
    const double norm0 = psi.norm2();
    res.diagnostics.reserve(tg.count);
    auto record = [&](double t) {
        psi.t = t;
        LevelDiagnostics d = solver.diagnose(psi);
        res.max_norm_drift = std::max(res.max_norm_drift, std::abs(d.norm - norm0) / norm0);
        if (d.boundary_mass > StrangSolver::kBoundaryTolerance * d.norm) res.boundary_leak = true;
        res.diagnostics.push_back(d);
    };
    record(0.0);
    for (std::size_t k = 0; k + 1 < tg.count; ++k) {
        solver.advance(psi, tg.steps_per_interval);
        record(tg.time(k + 1));
    }
    res.final_state = std::move(psi);
    return res;
}

/// Largest |n+(dt) - n+(dt/2)| over the output times of two runs on the same grid.
inline double population_difference(const ReferenceResult& coarse, const ReferenceResult& fine) {
    double m = 0.0;
    for (std::size_t k = 0; k < std::min(coarse.diagnostics.size(), fine.diagnostics.size()); ++k)
        m = std::max(m, std::abs(coarse.diagnostics[k].n_plus - fine.diagnostics[k].n_plus));
    return m;
}

struct ConvergedReference {
    ReferenceResult result;  // finer of the last accepted pair
    double self_difference = 0.0;
    bool converged = false;
    std::size_t halvings = 0;
};

/// Halves dt from `dt0` until population curves at (dt, dt/2) differ by less than `tolerance`.
template <TwoLevelPotential P>
    requires(P::dim == 1)
ConvergedReference solve_converged(const GridWavefunction& psi0, const P& pot, double dt0, double t_fin,
                                   std::size_t output_times, double tolerance = 1e-4, std::size_t max_halvings = 3) {
    ConvergedReference out;
    ReferenceResult coarse = solve(psi0, pot, dt0, t_fin, output_times);
    double dt = dt0;
    for (std::size_t h = 0; h <= max_halvings; ++h) {
        dt *= 0.5;
        ReferenceResult fine = solve(psi0, pot, dt, t_fin, output_times);
        out.self_difference = population_difference(coarse, fine);
        out.halvings = h;
        out.result = std::move(fine);
        if (out.self_difference < tolerance) {
            out.converged = true;
            break;
        }
        coarse = out.result;
    }
    return out;
}

}  // namespace hopsim

#endif
