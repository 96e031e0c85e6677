#ifndef HOPSIM_CONFIG_HPP
#define HOPSIM_CONFIG_HPP

#include <hopsim/dynamics.hpp>
#include <hopsim/errors.hpp>
#include <hopsim/potentials.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

namespace hopsim {

enum class RunMode { hopping, branching, reference, compare, lz_check };

inline std::string_view to_string(RunMode m) {
    switch (m) {
        case RunMode::hopping: return "hopping";
        case RunMode::branching: return "branching";
        case RunMode::reference: return "reference";
        case RunMode::compare: return "compare";
        case RunMode::lz_check: return "lz-check";
    }
    return "hopping";
}

inline std::optional<RunMode> parse_mode(std::string_view s) {
    if (s == "hopping") return RunMode::hopping;
    if (s == "branching") return RunMode::branching;
    if (s == "reference") return RunMode::reference;
    if (s == "compare") return RunMode::compare;
    if (s == "lz-check") return RunMode::lz_check;
    return std::nullopt;
}

inline std::string_view to_string(HopRule r) {
    switch (r) {
        case HopRule::gated: return "gated";
        case HopRule::unconstrained: return "unconstrained";
        case HopRule::disabled: return "disabled";
    }
    return "gated";
}

inline std::optional<HopRule> parse_hop_rule(std::string_view s) {
    if (s == "gated") return HopRule::gated;
    if (s == "unconstrained") return HopRule::unconstrained;
    if (s == "disabled") return HopRule::disabled;
    return std::nullopt;
}

/// Fully resolved experiment description: model defaults with overrides applied.
struct SimulationConfig {
    std::string model;
    std::map<std::string, double> coefficients;  // model coefficients, delta0 included
    double eps = 0.0;
    double delta0 = 0.0;
    double q0 = 0.0;
    double p0 = 0.0;
    Level initial_level = Level::plus;
    std::size_t N = 10000;
    double dt = 0.01;
    double t_fin = 1.0;
    std::uint64_t seed = 20240601;
    RunMode mode = RunMode::hopping;
    HopRule hop_rule = HopRule::gated;
    double R_exponent = 0.125;
    std::string output_dir = ".";
    std::size_t output_times = 200;
    unsigned threads = 0;
    std::size_t max_branches = 64;
    double ref_domain_min = -20.0;
    double ref_domain_max = 30.0;
    std::size_t ref_n = 8192;
    double ref_dt = 0.0;  // 0: t_fin / 2^14, halved until self-converged
    double ref_tolerance = 1e-4;
    bool events = false;
    bool snapshot = false;

    ModelSpec model_spec() const {
        std::map<std::string, double> coefs = coefficients;
        coefs.erase("delta0");
        return builtin(model, delta0, coefs);
    }
};

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double to_double(std::string_view v, std::size_t line, std::string_view key) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ParseError(line, "key '" + std::string(key) + "': not a number: '" + std::string(v) + "'");
    return out;
}

inline long long to_integer(std::string_view v, std::size_t line, std::string_view key) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ParseError(line, "key '" + std::string(key) + "': not an integer: '" + std::string(v) + "'");
    return out;
}

inline bool to_bool(std::string_view v, std::size_t line, std::string_view key) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ParseError(line, "key '" + std::string(key) + "': not a boolean: '" + std::string(v) + "'");
}

inline std::optional<Level> parse_level(std::string_view v) {
    if (v == "plus" || v == "+1" || v == "1" || v == "upper") return Level::plus;
    if (v == "minus" || v == "-1" || v == "lower") return Level::minus;
    return std::nullopt;
}

inline const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys{
        "model",  "eps",         "delta0",         "q0",             "p0",    "initial_level", "N",
        "dt",     "t_fin",       "seed",           "mode",           "hop_rule", "R_exponent", "output_dir",
        "output_times", "threads", "max_branches", "ref_domain_min", "ref_domain_max", "ref_n", "ref_dt",
        "ref_tolerance", "events", "snapshot"};
    return keys;
}

struct RawEntry {
    std::string value;
    std::size_t line;
};

}  // namespace detail

/// Range checks on a resolved config (also used after command-line overrides).
inline void validate(const SimulationConfig& c) {
    auto positive = [](const char* field, double v) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(field, "must be positive and finite");
    };
    positive("eps", c.eps);
    positive("delta0", c.delta0);
    positive("dt", c.dt);
    positive("t_fin", c.t_fin);
    positive("R_exponent", c.R_exponent);
    positive("ref_tolerance", c.ref_tolerance);
    if (c.N < 1) throw ValidationError("N", "must be at least 1");
    if (c.output_times < 2) throw ValidationError("output_times", "must be at least 2");
    if (c.max_branches < 1) throw ValidationError("max_branches", "must be at least 1");
    if (!(c.ref_domain_max > c.ref_domain_min)) throw ValidationError("ref_domain_max", "must exceed ref_domain_min");
    if (c.ref_n < 2 || (c.ref_n & (c.ref_n - 1)) != 0) throw ValidationError("ref_n", "must be a power of two");
    if (c.ref_dt < 0.0) throw ValidationError("ref_dt", "must be nonnegative");
    if (!std::isfinite(c.q0)) throw ValidationError("q0", "must be finite");
    if (!std::isfinite(c.p0)) throw ValidationError("p0", "must be finite");
    if (c.mode == RunMode::branching && c.hop_rule == HopRule::unconstrained)
        throw ValidationError("hop_rule", "branching mode requires gated or disabled hopping");
}

/// Parses flat `key=value` text. `#` starts a comment. Model defaults are
/// applied first, then every other key overrides them; the result is validated.
inline SimulationConfig parse_config_text(std::string_view text) {
    std::map<std::string, detail::RawEntry> raw;
    std::map<std::string, detail::RawEntry> coefs;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected key=value, got '" + std::string(line) + "'");
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string value(detail::trim(line.substr(eq + 1)));
        if (key.empty()) throw ParseError(line_no, "empty key");
        if (key.starts_with("coef.")) {
            if (!coefs.emplace(key.substr(5), detail::RawEntry{value, line_no}).second)
                throw ParseError(line_no, "duplicate key '" + key + "'");
            continue;
        }
        const auto& known = detail::known_keys();
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ParseError(line_no, "unknown key '" + key + "'");
        if (!raw.emplace(key, detail::RawEntry{value, line_no}).second)
            throw ParseError(line_no, "duplicate key '" + key + "'");
    }

    auto get = [&](const char* key) -> const detail::RawEntry* {
        const auto it = raw.find(key);
        return it == raw.end() ? nullptr : &it->second;
    };
    auto number = [&](const char* key, double& field) {
        if (const auto* e = get(key)) field = detail::to_double(e->value, e->line, key);
    };
    auto count = [&](const char* key, auto& field, long long min_value) {
        if (const auto* e = get(key)) {
            const long long v = detail::to_integer(e->value, e->line, key);
            if (v < min_value) throw ValidationError(key, "must be at least " + std::to_string(min_value));
            field = static_cast<std::remove_reference_t<decltype(field)>>(v);
        }
    };

    SimulationConfig cfg;
    const auto* model = get("model");
    if (!model || model->value.empty()) throw ValidationError("model", "missing");
    cfg.model = model->value;

    std::optional<double> delta0;
    if (const auto* e = get("delta0")) delta0 = detail::to_double(e->value, e->line, "delta0");
    std::map<std::string, double> coef_values;
    for (const auto& [k, e] : coefs) coef_values[k] = detail::to_double(e.value, e.line, "coef." + k);
    if (coef_values.count("delta0")) throw ValidationError("coef.delta0", "use the delta0 key");

    ModelSpec spec;
    try {
        spec = builtin(cfg.model, delta0, coef_values);
    } catch (const UnknownModel& e) {
        throw ValidationError("model", e.what());
    }
    const ModelDefaults& d = spec.defaults;
    cfg.coefficients = spec.coefficients;
    cfg.eps = d.eps;
    cfg.delta0 = d.delta0;
    cfg.q0 = d.q0;
    cfg.p0 = d.p0;
    cfg.initial_level = d.initial_level;
    cfg.t_fin = d.t_fin;
    cfg.dt = d.dt;
    cfg.ref_domain_min = d.domain_min;
    cfg.ref_domain_max = d.domain_max;
    cfg.ref_n = d.grid_points;

    number("eps", cfg.eps);
    number("q0", cfg.q0);
    number("p0", cfg.p0);
    number("dt", cfg.dt);
    number("t_fin", cfg.t_fin);
    number("R_exponent", cfg.R_exponent);
    number("ref_domain_min", cfg.ref_domain_min);
    number("ref_domain_max", cfg.ref_domain_max);
    number("ref_dt", cfg.ref_dt);
    number("ref_tolerance", cfg.ref_tolerance);
    count("N", cfg.N, 0);
    count("output_times", cfg.output_times, 0);
    count("threads", cfg.threads, 0);
    count("max_branches", cfg.max_branches, 0);
    count("ref_n", cfg.ref_n, 0);
    if (const auto* e = get("seed")) {
        std::uint64_t s = 0;
        const auto [ptr, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), s);
        if (ec != std::errc() || ptr != e->value.data() + e->value.size())
            throw ParseError(e->line, "key 'seed': not an unsigned integer");
        cfg.seed = s;
    }
    if (const auto* e = get("initial_level")) {
        const auto l = detail::parse_level(e->value);
        if (!l) throw ValidationError("initial_level", "expected plus or minus, got '" + e->value + "'");
        cfg.initial_level = *l;
    }
    if (const auto* e = get("mode")) {
        const auto m = parse_mode(e->value);
        if (!m) throw ValidationError("mode", "unrecognized mode '" + e->value + "'");
        cfg.mode = *m;
    }
    if (const auto* e = get("hop_rule")) {
        const auto r = parse_hop_rule(e->value);
        if (!r) throw ValidationError("hop_rule", "unrecognized rule '" + e->value + "'");
        cfg.hop_rule = *r;
    }
    if (const auto* e = get("output_dir")) cfg.output_dir = e->value;
    if (const auto* e = get("events")) cfg.events = detail::to_bool(e->value, e->line, "events");
    if (const auto* e = get("snapshot")) cfg.snapshot = detail::to_bool(e->value, e->line, "snapshot");
    validate(cfg);
    return cfg;
}

inline SimulationConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(0, "cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Canonical key=value rendering. `threads` and `output_dir` are omitted since
/// they do not change results.
inline std::string to_text(const SimulationConfig& c) {
    std::ostringstream o;
    o << "model=" << c.model << '\n';
    for (const auto& [k, v] : c.coefficients)
        if (k != "delta0") o << "coef." << k << '=' << format_double(v) << '\n';
    o << "eps=" << format_double(c.eps) << '\n'
      << "delta0=" << format_double(c.delta0) << '\n'
      << "q0=" << format_double(c.q0) << '\n'
      << "p0=" << format_double(c.p0) << '\n'
      << "initial_level=" << to_string(c.initial_level) << '\n'
      << "N=" << c.N << '\n'
      << "dt=" << format_double(c.dt) << '\n'
      << "t_fin=" << format_double(c.t_fin) << '\n'
      << "seed=" << c.seed << '\n'
      << "mode=" << to_string(c.mode) << '\n'
      << "hop_rule=" << to_string(c.hop_rule) << '\n'
      << "R_exponent=" << format_double(c.R_exponent) << '\n'
      << "output_times=" << c.output_times << '\n'
      << "max_branches=" << c.max_branches << '\n'
      << "ref_domain_min=" << format_double(c.ref_domain_min) << '\n'
      << "ref_domain_max=" << format_double(c.ref_domain_max) << '\n'
      << "ref_n=" << c.ref_n << '\n'
      << "ref_dt=" << format_double(c.ref_dt) << '\n'
      << "ref_tolerance=" << format_double(c.ref_tolerance) << '\n'
      << "events=" << (c.events ? 1 : 0) << '\n'
      << "snapshot=" << (c.snapshot ? 1 : 0) << '\n';
    return o.str();
}

/// FNV-1a 64-bit.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Hash of the settings that determine a hopping or branching run.
inline std::string hopping_hash(const SimulationConfig& c) {
    std::ostringstream o;
    o << "model=" << c.model;
    for (const auto& [k, v] : c.coefficients) o << ";" << k << '=' << format_double(v);
    o << ";eps=" << format_double(c.eps) << ";q0=" << format_double(c.q0) << ";p0=" << format_double(c.p0)
      << ";level=" << to_string(c.initial_level) << ";N=" << c.N << ";dt=" << format_double(c.dt)
      << ";t_fin=" << format_double(c.t_fin) << ";seed=" << c.seed << ";hop_rule=" << to_string(c.hop_rule)
      << ";R_exponent=" << format_double(c.R_exponent) << ";output_times=" << c.output_times;
    return hex64(fnv1a(o.str()));
}

/// Hash of the settings that determine a reference solve.
inline std::string reference_hash(const SimulationConfig& c) {
    std::ostringstream o;
    o << "model=" << c.model;
    for (const auto& [k, v] : c.coefficients) o << ";" << k << '=' << format_double(v);
    o << ";eps=" << format_double(c.eps) << ";q0=" << format_double(c.q0) << ";p0=" << format_double(c.p0)
      << ";level=" << to_string(c.initial_level) << ";t_fin=" << format_double(c.t_fin)
      << ";output_times=" << c.output_times << ";domain=" << format_double(c.ref_domain_min) << ','
      << format_double(c.ref_domain_max) << ";n=" << c.ref_n << ";dt=" << format_double(c.ref_dt)
      << ";tol=" << format_double(c.ref_tolerance);
    return hex64(fnv1a(o.str()));
}

}  // namespace hopsim

#endif
