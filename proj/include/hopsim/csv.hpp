#ifndef HOPSIM_CSV_HPP
#define HOPSIM_CSV_HPP

#include <hopsim/config.hpp>
#include <hopsim/ensemble.hpp>
#include <hopsim/reference.hpp>

#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace hopsim::csv {

/// Every output file starts with the resolved config as '#' lines.
inline void write_config_comments(std::ostream& os, const SimulationConfig& cfg) {
    std::istringstream lines(to_text(cfg));
    for (std::string line; std::getline(lines, line);) os << "# " << line << '\n';
}

namespace detail {

inline void row(std::ostream& os, std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
        if (!first) os << ',';
        os << format_double(v);
        first = false;
    }
    os << '\n';
}

}  // namespace detail

inline void write_series(std::ostream& os, const SimulationConfig& cfg, const EnsembleSeries<1>& s) {
    write_config_comments(os, cfg);
    os << "# trajectories_used=" << s.n_used << '\n' << "# trajectories_failed=" << s.n_failed << '\n';
    os << "t,pop_plus,pop_minus,mean_q_plus,mean_p_plus,mean_q_minus,mean_p_minus,"
          "pop_plus_stderr,pop_minus_stderr,mean_q_plus_stderr,mean_p_plus_stderr,mean_q_minus_stderr,"
          "mean_p_minus_stderr\n";
    for (std::size_t k = 0; k < s.times.size(); ++k)
        detail::row(os, {s.times[k], s.pop_plus[k], s.pop_minus[k], s.mean_q_plus[k][0], s.mean_p_plus[k][0],
                         s.mean_q_minus[k][0], s.mean_p_minus[k][0], s.pop_plus_stderr[k], s.pop_minus_stderr[k],
                         s.mean_q_plus_stderr[k][0], s.mean_p_plus_stderr[k][0], s.mean_q_minus_stderr[k][0],
                         s.mean_p_minus_stderr[k][0]});
}

inline void write_reference(std::ostream& os, const SimulationConfig& cfg, const ConvergedReference& ref) {
    write_config_comments(os, cfg);
    os << "# reference_dt=" << format_double(ref.result.dt) << '\n'
       << "# reference_self_difference=" << format_double(ref.self_difference) << '\n'
       << "# reference_converged=" << (ref.converged ? 1 : 0) << '\n'
       << "# boundary_leak=" << (ref.result.boundary_leak ? 1 : 0) << '\n'
       << "# max_norm_drift=" << format_double(ref.result.max_norm_drift) << '\n';
    os << "t,pop_plus,pop_minus,mean_q_plus,mean_p_plus,mean_q_minus,mean_p_minus,norm,boundary_mass\n";
    for (const auto& d : ref.result.diagnostics)
        detail::row(os, {d.t, d.n_plus, d.n_minus, d.mean_q_plus, d.mean_p_plus, d.mean_q_minus, d.mean_p_minus,
                         d.norm, d.boundary_mass});
}

inline void write_snapshot(std::ostream& os, const SimulationConfig& cfg, const GridWavefunction& psi) {
    write_config_comments(os, cfg);
    os << "# t=" << format_double(psi.t) << '\n';
    os << "q,re_psi0,im_psi0,re_psi1,im_psi1\n";
    for (std::size_t j = 0; j < psi.grid.n; ++j)
        detail::row(os, {psi.grid.q(j), psi.c0[j].real(), psi.c0[j].imag(), psi.c1[j].real(), psi.c1[j].imag()});
}

inline void write_events(std::ostream& os, const SimulationConfig& cfg, const std::vector<IndexedEvent<1>>& events) {
    write_config_comments(os, cfg);
    os << "trajectory,t_star,q_star,p_star,gap_star,rate,level_in,accepted,frustrated,p_out\n";
    for (const auto& ie : events) {
        const auto& e = ie.event;
        os << ie.trajectory << ',' << format_double(e.t_star) << ',' << format_double(e.q_star[0]) << ','
           << format_double(e.p_star[0]) << ',' << format_double(e.gap_star) << ',' << format_double(e.rate) << ','
           << sign(e.level_in) << ',' << (e.accepted ? 1 : 0) << ',' << (e.frustrated ? 1 : 0) << ','
           << format_double(e.accepted ? e.p_out[0] : e.p_star[0]) << '\n';
    }
}

}  // namespace hopsim::csv

#endif
