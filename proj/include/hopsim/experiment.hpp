#ifndef HOPSIM_EXPERIMENT_HPP
#define HOPSIM_EXPERIMENT_HPP

#include <hopsim/config.hpp>
#include <hopsim/csv.hpp>
#include <hopsim/dynamics.hpp>
#include <hopsim/ensemble.hpp>
#include <hopsim/lzmodel.hpp>
#include <hopsim/reference.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

namespace hopsim {

/// Population difference beyond which hopping and reference are flagged as disagreeing.
inline constexpr double kDisagreementThreshold = 0.1;

/// Relative tolerance of the Landau-Zener sweep.
inline constexpr double kLZTolerance = 0.02;

struct ComparisonReport {
    std::vector<double> times;
    std::vector<double> pop_error;       // |pop_plus(hopping) - pop_plus(reference)|
    std::vector<double> momentum_error;  // |mean p on the initial level|, NaN where the level is empty
    double max_pop_error = 0.0;
    double final_pop_error = 0.0;
    double max_momentum_error = 0.0;
    double final_momentum_error = 0.0;
    bool disagreement = false;
    std::string hopping_hash;
    std::string reference_hash;
    double hopping_seconds = 0.0;
    double reference_seconds = 0.0;
    double reference_dt = 0.0;
    double reference_self_difference = 0.0;
    bool reference_converged = false;
};

inline EnsembleConfig<1> ensemble_config(const SimulationConfig& c) {
    EnsembleConfig<1> e;
    e.initial = WignerGaussian<1>{{c.q0}, {c.p0}, c.eps};
    e.initial_level = c.initial_level;
    e.n = c.N;
    e.dt = c.dt;
    e.t_fin = c.t_fin;
    e.seed = c.seed;
    e.hop_rule = c.hop_rule;
    e.r_exponent = c.R_exponent;
    e.output_times = c.output_times;
    e.threads = c.threads;
    e.max_branches = c.max_branches;
    e.keep_events = c.events;
    return e;
}

inline EnsembleSeries<1> run_hopping(const SimulationConfig& c, bool branching = false) {
    const ModelSpec spec = c.model_spec();
    const auto e = ensemble_config(c);
    return branching ? run_branching(spec.potential, e) : run_ensemble(spec.potential, e);
}

/// Initial step of the self-convergence sequence when ref_dt is 0.
inline double reference_start_dt(const SimulationConfig& c) { return c.ref_dt > 0.0 ? c.ref_dt : c.t_fin / 4096.0; }

inline ConvergedReference run_reference(const SimulationConfig& c) {
    const ModelSpec spec = c.model_spec();
    const Grid grid{c.ref_domain_min, c.ref_domain_max, c.ref_n};
    const auto psi0 = gaussian_packet(grid, c.q0, c.p0, c.eps, c.initial_level, spec.potential);
    return solve_converged(psi0, spec.potential, reference_start_dt(c), c.t_fin, c.output_times, c.ref_tolerance);
}

inline ComparisonReport compare(const SimulationConfig& c, const EnsembleSeries<1>& hop, const ConvergedReference& ref) {
    ComparisonReport r;
    const auto& diag = ref.result.diagnostics;
    if (hop.times.size() != diag.size()) throw Error("hopping and reference output grids differ");
    const bool plus = c.initial_level == Level::plus;
    r.times = hop.times;
    for (std::size_t k = 0; k < diag.size(); ++k) {
        const double e = std::abs(hop.pop_plus[k] - diag[k].n_plus);
        r.pop_error.push_back(e);
        r.max_pop_error = std::max(r.max_pop_error, e);
        const double hp = plus ? hop.mean_p_plus[k][0] : hop.mean_p_minus[k][0];
        const double rp = plus ? diag[k].mean_p_plus : diag[k].mean_p_minus;
        const double me = std::abs(hp - rp);
        r.momentum_error.push_back(me);
        if (std::isfinite(me)) r.max_momentum_error = std::max(r.max_momentum_error, me);
    }
    r.final_pop_error = r.pop_error.back();
    r.final_momentum_error = r.momentum_error.back();
    r.disagreement = r.max_pop_error > kDisagreementThreshold;
    r.hopping_hash = hopping_hash(c);
    r.reference_hash = reference_hash(c);
    r.reference_dt = ref.result.dt;
    r.reference_self_difference = ref.self_difference;
    r.reference_converged = ref.converged;
    return r;
}

inline void write_report(std::ostream& os, const SimulationConfig& cfg, const ComparisonReport& r,
                         const EnsembleSeries<1>& hop, const ConvergedReference& ref) {
    csv::write_config_comments(os, cfg);
    os << "# hopping_config_hash=" << r.hopping_hash << '\n'
       << "# reference_config_hash=" << r.reference_hash << '\n'
       << "# max_pop_error=" << format_double(r.max_pop_error) << '\n'
       << "# final_pop_error=" << format_double(r.final_pop_error) << '\n'
       << "# max_momentum_error=" << format_double(r.max_momentum_error) << '\n'
       << "# final_momentum_error=" << format_double(r.final_momentum_error) << '\n'
       << "# disagreement=" << (r.disagreement ? 1 : 0) << '\n'
       << "# reference_dt=" << format_double(r.reference_dt) << '\n'
       << "# reference_self_difference=" << format_double(r.reference_self_difference) << '\n'
       << "# reference_converged=" << (r.reference_converged ? 1 : 0) << '\n'
       << "# hopping_seconds=" << format_double(r.hopping_seconds) << '\n'
       << "# reference_seconds=" << format_double(r.reference_seconds) << '\n';
    os << "t,pop_plus_hopping,pop_plus_reference,pop_error,mean_p_hopping,mean_p_reference,momentum_error\n";
    const bool plus = cfg.initial_level == Level::plus;
    const auto& diag = ref.result.diagnostics;
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        const double hp = plus ? hop.mean_p_plus[k][0] : hop.mean_p_minus[k][0];
        const double rp = plus ? diag[k].mean_p_plus : diag[k].mean_p_minus;
        csv::detail::row(os, {r.times[k], hop.pop_plus[k], diag[k].n_plus, r.pop_error[k], hp, rp,
                              r.momentum_error[k]});
    }
}

struct LZCheckRow {
    std::string source;  // "sweep" or "crossing"
    double eta = 0.0;
    double eps = 0.0;
    double t_formula = 0.0;
    double t_measured = 0.0;
    double s_max = 0.0;

    double relative_error() const { return std::abs(t_measured - t_formula) / t_formula; }
    bool passed() const { return relative_error() <= kLZTolerance; }
};

/// Ten eta values with pi eta^2 / eps evenly spaced over [0.2, 3].
inline std::vector<double> lz_sweep_etas(double eps) {
    std::vector<double> etas;
    for (int i = 0; i < 10; ++i) {
        const double x = 0.2 + (3.0 - 0.2) * i / 9.0;
        etas.push_back(std::sqrt(x * eps / std::numbers::pi));
    }
    return etas;
}

/// Landau-Zener sweep plus the gap minima of the model's central trajectory.
inline std::vector<LZCheckRow> lz_check(const SimulationConfig& c) {
    std::vector<LZCheckRow> rows;
    for (double eta : lz_sweep_etas(c.eps)) {
        const auto conv = lz::converged_lz(eta, c.eps);
        rows.push_back({"sweep", eta, c.eps, lz::lz_formula(eta, c.eps), conv.transition, conv.s_max});
    }
    const ModelSpec spec = c.model_spec();
    TrajectoryState<1> s0;
    s0.q = {c.q0};
    s0.p = {c.p0};
    s0.level = c.initial_level;
    const TimeGrid grid(c.t_fin, c.output_times, c.dt);
    for (const auto& m : gap_minima_along(s0, spec.potential, grid, c.eps)) {
        const auto cc = lz::cross_check_T(spec.potential, m.q, m.p, c.eps);
        rows.push_back({"crossing", cc.eta, c.eps, cc.formula, cc.oracle, 0.0});
    }
    return rows;
}

inline void write_lz_check(std::ostream& os, const SimulationConfig& cfg, const std::vector<LZCheckRow>& rows) {
    csv::write_config_comments(os, cfg);
    os << "# tolerance=" << format_double(kLZTolerance) << '\n';
    os << "source,eta,eps,T_formula,T_measured,relative_error,pass\n";
    for (const auto& r : rows)
        os << r.source << ',' << format_double(r.eta) << ',' << format_double(r.eps) << ','
           << format_double(r.t_formula) << ',' << format_double(r.t_measured) << ','
           << format_double(r.relative_error()) << ',' << (r.passed() ? 1 : 0) << '\n';
}

namespace detail {

inline std::ofstream open_output(const SimulationConfig& c, const std::string& name) {
    const std::filesystem::path path = std::filesystem::path(c.output_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Runs the configured mode and writes its files. Throws on any error; `log`
/// receives a short summary.
inline void execute(const SimulationConfig& c, std::ostream& log) {
    validate(c);
    std::filesystem::create_directories(c.output_dir);
    switch (c.mode) {
        case RunMode::hopping:
        case RunMode::branching: {
            const bool branching = c.mode == RunMode::branching;
            const auto series = run_hopping(c, branching);
            auto out = detail::open_output(c, branching ? "branching.csv" : "hopping.csv");
            csv::write_series(out, c, series);
            if (c.events) {
                auto ev = detail::open_output(c, "events.csv");
                csv::write_events(ev, c, series.events);
            }
            log << "final pop_plus=" << format_double(series.pop_plus.back()) << " +- "
                << format_double(series.pop_plus_stderr.back()) << " (failed " << series.n_failed << ")\n";
            break;
        }
        case RunMode::reference: {
            const auto ref = run_reference(c);
            auto out = detail::open_output(c, "reference.csv");
            csv::write_reference(out, c, ref);
            if (c.snapshot) {
                auto snap = detail::open_output(c, "snapshot.csv");
                csv::write_snapshot(snap, c, ref.result.final_state);
            }
            log << "final pop_plus=" << format_double(ref.result.diagnostics.back().n_plus)
                << " self_difference=" << format_double(ref.self_difference) << '\n';
            break;
        }
        case RunMode::compare: {
            auto t0 = std::chrono::steady_clock::now();
            const auto series = run_hopping(c, false);
            const double hop_s = detail::seconds_since(t0);
            t0 = std::chrono::steady_clock::now();
            const auto ref = run_reference(c);
            const double ref_s = detail::seconds_since(t0);
            ComparisonReport report = compare(c, series, ref);
            report.hopping_seconds = hop_s;
            report.reference_seconds = ref_s;
            {
                auto out = detail::open_output(c, "hopping.csv");
                csv::write_series(out, c, series);
            }
            {
                auto out = detail::open_output(c, "reference.csv");
                csv::write_reference(out, c, ref);
            }
            auto out = detail::open_output(c, "report.csv");
            write_report(out, c, report, series, ref);
            if (c.events) {
                auto ev = detail::open_output(c, "events.csv");
                csv::write_events(ev, c, series.events);
            }
            log << "final pop error=" << format_double(report.final_pop_error)
                << " max pop error=" << format_double(report.max_pop_error)
                << (report.disagreement ? " (disagreement)" : "") << '\n';
            break;
        }
        case RunMode::lz_check: {
            const auto rows = lz_check(c);
            auto out = detail::open_output(c, "lz_check.csv");
            write_lz_check(out, c, rows);
            std::size_t failed = 0;
            for (const auto& r : rows) failed += r.passed() ? 0 : 1;
            log << rows.size() - failed << "/" << rows.size() << " Landau-Zener checks within "
                << format_double(kLZTolerance) << " relative\n";
            if (failed > 0) throw Error(std::to_string(failed) + " Landau-Zener checks outside tolerance");
            break;
        }
    }
}

/// Exit code convention: 0 success, 2 invalid configuration, 1 runtime failure.
inline int run(const SimulationConfig& c, std::ostream& log, std::ostream& err) {
    try {
        execute(c, log);
        return 0;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace hopsim

#endif
