#include <hopsim/experiment.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace hopsim;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("hopsim_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const fs::path p = dir / "run.conf";
    std::ofstream(p) << text;
    return p;
}

int cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(HOPSIM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string first_data_header(const std::string& csv) {
    std::istringstream in(csv);
    for (std::string line; std::getline(in, line);)
        if (!line.starts_with("#")) return line;
    return {};
}

}  // namespace

TEST(Cli, ExitCodes) {
    const auto dir = scratch("exit");
    EXPECT_EQ(cli("run " + write_config(dir, "model=simple\nN=0\n").string()), 2);
    EXPECT_EQ(cli("run " + write_config(dir, "model=simple\nbogus=1\n").string()), 2);
    EXPECT_EQ(cli("run " + (dir / "missing.conf").string()), 2);
    EXPECT_EQ(cli("run " + write_config(dir, "model=simple\n").string() + " --mode sideways"), 2);
    EXPECT_EQ(cli(""), 2);
    // Initial packet outside the reference domain is a runtime failure.
    const auto cfg = write_config(dir, "model=simple\nq0=-19.9\nt_fin=0.5\nref_n=1024\n");
    EXPECT_EQ(cli("run " + cfg.string() + " --mode reference --out " + (dir / "o").string()), 1);
}

TEST(Cli, HoppingOutputIsDeterministicAndSelfDescribing) {
    const auto dir = scratch("det");
    const auto cfg = write_config(dir, "model=dual\nN=500\noutput_times=40\n");
    ASSERT_EQ(cli("run " + cfg.string() + " --out " + (dir / "a").string(), "HOPSIM_THREADS=1"), 0);
    ASSERT_EQ(cli("run " + cfg.string() + " --out " + (dir / "b").string(), "HOPSIM_THREADS=4"), 0);
    ASSERT_EQ(cli("run " + cfg.string() + " --out " + (dir / "c").string() + " --seed 99"), 0);
    const auto a = slurp(dir / "a" / "hopping.csv");
    EXPECT_EQ(a, slurp(dir / "b" / "hopping.csv"));
    EXPECT_NE(a, slurp(dir / "c" / "hopping.csv"));
    EXPECT_TRUE(a.starts_with("# model=dual\n"));
    EXPECT_NE(a.find("# seed="), std::string::npos);
    EXPECT_EQ(first_data_header(a),
              "t,pop_plus,pop_minus,mean_q_plus,mean_p_plus,mean_q_minus,mean_p_minus,pop_plus_stderr,"
              "pop_minus_stderr,mean_q_plus_stderr,mean_p_plus_stderr,mean_q_minus_stderr,mean_p_minus_stderr");
    EXPECT_NE(slurp(dir / "c" / "hopping.csv").find("# seed=99\n"), std::string::npos);
}

TEST(Cli, CompareWritesAlignedFilesAndReport) {
    const auto dir = scratch("compare");
    const auto cfg =
        write_config(dir, "model=simple\nN=400\nt_fin=2\noutput_times=21\nref_n=2048\nref_dt=0.01\nevents=1\n");
    ASSERT_EQ(cli("run " + cfg.string() + " --mode compare --out " + dir.string()), 0);
    for (const char* f : {"hopping.csv", "reference.csv", "report.csv", "events.csv"}) {
        const auto text = slurp(dir / f);
        EXPECT_TRUE(text.starts_with("# model=simple\n")) << f;
    }
    const auto ref = slurp(dir / "reference.csv");
    EXPECT_TRUE(first_data_header(ref).starts_with("t,pop_plus,pop_minus,mean_q_plus,mean_p_plus,mean_q_minus,mean_p_minus"));
    const auto report = slurp(dir / "report.csv");
    const auto parsed = parse_config_text("model=simple\nN=400\nt_fin=2\noutput_times=21\nref_n=2048\nref_dt=0.01\nevents=1\nmode=compare\n");
    EXPECT_NE(report.find("# hopping_config_hash=" + hopping_hash(parsed)), std::string::npos);
    EXPECT_NE(report.find("# reference_config_hash=" + reference_hash(parsed)), std::string::npos);
    // 21 output rows in every series file.
    auto rows = [](const std::string& csv) {
        std::size_t n = 0;
        std::istringstream in(csv);
        for (std::string line; std::getline(in, line);) n += !line.starts_with("#");
        return n - 1;
    };
    EXPECT_EQ(rows(slurp(dir / "hopping.csv")), 21u);
    EXPECT_EQ(rows(ref), 21u);
    EXPECT_EQ(rows(report), 21u);
}

TEST(Cli, LandauZenerCheckPasses) {
    const auto dir = scratch("lz");
    const auto cfg = write_config(dir, "model=arctangent\nmode=lz-check\n");
    ASSERT_EQ(cli("run " + cfg.string() + " --out " + dir.string()), 0);
    const auto text = slurp(dir / "lz_check.csv");
    EXPECT_EQ(first_data_header(text), "source,eta,eps,T_formula,T_measured,relative_error,pass");
    std::istringstream in(text);
    std::size_t sweep = 0, crossing = 0;
    for (std::string line; std::getline(in, line);) {
        if (line.starts_with("sweep")) ++sweep;
        if (line.starts_with("crossing")) ++crossing;
        if (line.starts_with("sweep") || line.starts_with("crossing")) {
            EXPECT_TRUE(line.ends_with(",1")) << line;
        }
    }
    EXPECT_EQ(sweep, 10u);
    EXPECT_EQ(crossing, 1u);
}

TEST(Cli, ModelsListed) { EXPECT_EQ(cli("models"), 0); }

TEST(Experiment, RunReturnsValidationCode) {
    auto c = parse_config_text("model=simple\n");
    c.N = 0;
    std::ostringstream log, err;
    EXPECT_EQ(run(c, log, err), 2);
    EXPECT_NE(err.str().find("N"), std::string::npos);
}

TEST(Experiment, SweepEtasCoverExponentRange) {
    const double eps = 1e-3;
    const auto etas = lz_sweep_etas(eps);
    ASSERT_EQ(etas.size(), 10u);
    EXPECT_NEAR(std::numbers::pi * etas.front() * etas.front() / eps, 0.2, 1e-12);
    EXPECT_NEAR(std::numbers::pi * etas.back() * etas.back() / eps, 3.0, 1e-12);
}
