#include <hopsim/hopsim.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

namespace {

int run_command(const std::string& path, const std::string& mode, const std::string& seed, const std::string& out) {
    hopsim::SimulationConfig cfg;
    try {
        cfg = hopsim::parse_config(path);
        if (!mode.empty()) {
            const auto m = hopsim::parse_mode(mode);
            if (!m) throw hopsim::ValidationError("mode", "unrecognized mode '" + mode + "'");
            cfg.mode = *m;
        }
        if (!seed.empty()) {
            std::size_t used = 0;
            const unsigned long long s = std::stoull(seed, &used);
            if (used != seed.size()) throw hopsim::ValidationError("seed", "not an unsigned integer");
            cfg.seed = s;
        }
        if (!out.empty()) cfg.output_dir = out;
        if (const char* env = std::getenv("HOPSIM_THREADS"); env && *env) {
            std::size_t used = 0;
            const unsigned long t = std::stoul(env, &used);
            if (used != std::string(env).size()) throw hopsim::ValidationError("threads", "HOPSIM_THREADS is not a count");
            cfg.threads = static_cast<unsigned>(t);
        }
        hopsim::validate(cfg);
    } catch (const hopsim::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::logic_error&) {
        std::cerr << "error: malformed numeric override\n";
        return 2;
    }
    return hopsim::run(cfg, std::cout, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Surface hopping simulations for two-level avoided crossings"};
    app.require_subcommand(1);

    std::string path, mode, seed, out;
    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", path, "key=value config file")->required();
    run->add_option("--mode", mode, "hopping, branching, reference, compare or lz-check");
    run->add_option("--seed", seed, "override the seed");
    run->add_option("--out", out, "output directory");

    auto* models = app.add_subcommand("models", "List built-in models");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (*models) {
        for (const auto& name : hopsim::builtin_names()) std::cout << name << '\n';
        return 0;
    }
    return run_command(path, mode, seed, out);
}
