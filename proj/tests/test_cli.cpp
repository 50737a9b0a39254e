#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <dgate/scenario.hpp>

namespace fs = std::filesystem;
namespace sc = dgate::scenario;
using sc::json;

namespace {

struct Proc {
    int code;
    std::string out;
};

// runs the CLI with stderr folded into stdout
Proc cli(const std::string& args, const std::string& env = "") {
    std::string cmd = env + " \"" DGATE_CLI_PATH "\" " + args + " 2>&1";
    Proc p{-1, {}};
    FILE* f = popen(cmd.c_str(), "r");
    if (!f) return p;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, f)) p.out.append(buf, n);
    int st = pclose(f);
    p.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    fs::path dir;
    void SetUp() override {
        auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("dgate_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path write(const std::string& name, const json& j) {
        auto p = dir / name;
        std::ofstream(p) << j.dump(2);
        return p;
    }
};

json small_mc() {
    return {{"schema_version", 1},
            {"kind", "thermal-mc"},
            {"name", "mc"},
            {"physics", {{"omega_2pi_MHz", 2.0}, {"gamma_over_omega", 0.2}, {"T_us", 0.3}, {"n_steps", 256}}},
            {"force", {{"family", "gram-schmidt"}, {"k0", 6}}},
            {"sweep", {{"gamma_nbar_T", {0.0, 0.05}}}},
            {"mc", {{"n_samples", 64}, {"seed", 9}}}};
}

json gate_doc() {
    return {{"schema_version", 1},
            {"kind", "gate"},
            {"name", "g"},
            {"physics", {{"omega_2pi_MHz", 2.0}, {"gamma_over_omega", 0.1}, {"T_us", 0.8}, {"n_steps", 1024}}},
            {"force", {{"family", "gram-schmidt"}, {"k0", 6}, {"compensate", true}}}};
}

}  // namespace

TEST_F(Cli, ShippedConfigsParse) {
    // every shipped config passes validation; dry parse through the preset dump
    for (const auto& e : fs::directory_iterator(DGATE_CONFIG_DIR)) {
        auto j = json::parse(slurp(e.path()));
        EXPECT_EQ(j.at("schema_version"), 1) << e.path();
        EXPECT_TRUE(j.contains("kind")) << e.path();
    }
    auto p = cli("preset fig4 --dump-config");
    EXPECT_EQ(p.code, 0);
    EXPECT_NE(p.out.find("sweep-gamma"), std::string::npos);
}

TEST_F(Cli, GateRunWritesSummary) {
    auto cfg = write("g.json", gate_doc());
    auto p = cli("run " + cfg.string() + " --out " + dir.string());
    ASSERT_EQ(p.code, 0) << p.out;
    auto s = json::parse(slurp(dir / "g_summary.json"));
    EXPECT_EQ(s.at("kind"), "gate");
    EXPECT_EQ(s.at("config"), gate_doc());
    const auto& r = s.at("results");
    for (auto k : {"Gamma", "delta_phi", "fidelity", "fidelity_bound", "closure_residual_max", "kappa"})
        EXPECT_TRUE(r.contains(k)) << k;
    EXPECT_NEAR(r.at("fidelity").get<double>(), 0.689808, 1e-5);
    EXPECT_TRUE(fs::exists(dir / "g_paths.csv"));
}

TEST_F(Cli, UnknownKeyIsRejected) {
    auto j = gate_doc();
    j["physics"]["gama"] = 0.1;
    auto p = cli("run " + write("bad.json", j).string() + " --out " + dir.string());
    EXPECT_EQ(p.code, 2);
    EXPECT_NE(p.out.find("gama"), std::string::npos) << p.out;
}

TEST_F(Cli, WrongTypeIsRejected) {
    auto j = gate_doc();
    j["physics"]["T_us"] = "0.8";
    auto p = cli("run " + write("bad.json", j).string() + " --out " + dir.string());
    EXPECT_EQ(p.code, 2);
    EXPECT_NE(p.out.find("T_us"), std::string::npos) << p.out;
}

TEST_F(Cli, MissingFieldIsRejected) {
    auto j = gate_doc();
    j["physics"].erase("T_us");
    auto p = cli("run " + write("bad.json", j).string() + " --out " + dir.string());
    EXPECT_EQ(p.code, 2);
    EXPECT_NE(p.out.find("T_us"), std::string::npos) << p.out;

    auto k = gate_doc();
    k["schema_version"] = 2;
    EXPECT_EQ(cli("run " + write("v.json", k).string() + " --out " + dir.string()).code, 2);
    EXPECT_EQ(cli("run " + (dir / "missing.json").string()).code, 2);
    EXPECT_EQ(cli("frobnicate").code, 2);
}

TEST_F(Cli, BadValuesAreRejected) {
    auto j = gate_doc();
    j["physics"]["gamma_over_omega"] = -0.1;
    EXPECT_EQ(sc::run_config(j, {dir.string()}).exit_code, 2);
    auto k = small_mc();
    k["mc"]["n_samples"] = 1;
    EXPECT_EQ(sc::run_config(k, {dir.string()}).exit_code, 2);
    auto m = gate_doc();
    m["kind"] = "teleport";
    auto r = sc::run_config(m, {dir.string()});
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.message.find("kind"), std::string::npos);
}

TEST_F(Cli, SameSeedSameBytes) {
    auto cfg = write("mc.json", small_mc());
    ASSERT_EQ(cli("run " + cfg.string() + " --out " + (dir / "a").string()).code, 0);
    ASSERT_EQ(cli("run " + cfg.string() + " --out " + (dir / "b").string() + " --threads 3").code, 0);
    ASSERT_EQ(cli("run " + cfg.string() + " --out " + (dir / "c").string() + " --seed 10").code, 0);
    auto a = slurp(dir / "a" / "mc_mc.csv"), b = slurp(dir / "b" / "mc_mc.csv"), c = slurp(dir / "c" / "mc_mc.csv");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_EQ(a.substr(0, a.find('\n')), "nbar,gamma_nbar_T,mean_F,std_error,n_samples,seed");
}

TEST_F(Cli, EnvironmentOutputDirectory) {
    auto cfg = write("g.json", gate_doc());
    auto target = dir / "from_env";
    auto p = cli("run " + cfg.string(), "DGATE_OUT_DIR=\"" + target.string() + "\"");
    ASSERT_EQ(p.code, 0) << p.out;
    EXPECT_TRUE(fs::exists(target / "g_summary.json"));
}

TEST_F(Cli, TrajectoryPresetWritesFourPaths) {
    auto p = cli("preset fig2 --out " + dir.string());
    ASSERT_EQ(p.code, 0) << p.out;
    for (auto s : {"a", "b", "c", "d"}) {
        auto csv = dir / (std::string("fig2") + s + "_path.csv");
        ASSERT_TRUE(fs::exists(csv)) << csv;
        auto sum = json::parse(slurp(dir / (std::string("fig2") + s + "_summary.json")));
        EXPECT_NEAR(std::abs(sum.at("results").at("ledger").at("phi_isol").get<double>()), std::numbers::pi, 1e-6) << s;
    }
}

TEST_F(Cli, SweepKeepsFailedPoints) {
    json j = {{"schema_version", 1},
              {"kind", "sweep-gamma"},
              {"name", "sw"},
              {"physics", {{"omega_2pi_MHz", 2.0}, {"T_us", 0.8}, {"n_steps", 1024}}},
              {"force", {{"family", "gram-schmidt"}, {"k0", 6}}},
              {"sweep", {{"gamma_over_omega", {0.01, 1.0}}}},
              {"variants", {"compensated"}}};
    auto r = sc::run_config(j, {dir.string()});
    ASSERT_EQ(r.exit_code, 0) << r.message;
    auto s = json::parse(slurp(dir / "sw_summary.json"));
    ASSERT_EQ(s.at("results").at("failed_points").size(), 1u);
    EXPECT_EQ(s.at("results").at("failed_points")[0].at("gamma_over_omega"), 1.0);
    auto csv = slurp(dir / "sw_compensated.csv");
    EXPECT_NE(csv.find("nan"), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST_F(Cli, SampledForceFromFile) {
    // a sampled sine reproduces the analytic trajectory
    std::ofstream f(dir / "force.csv");
    f << "# t, f\nt,f\n";
    for (int k = 0; k <= 4096; ++k) {
        double t = std::numbers::pi * k / 4096.0;
        f << std::setprecision(17) << t << "," << std::sin(2.0 * t) << "\n";
    }
    f.close();
    json base = {{"schema_version", 1},
                 {"kind", "trajectory"},
                 {"mode", {{"omega", 4.0}, {"gamma", 0.0}, {"T_us", std::numbers::pi}, {"n_steps", 4096}}}};
    auto a = base, b = base;
    a["name"] = "analytic";
    a["force"] = {{"family", "sine"}, {"amplitude", 1.0}, {"Omega", 2.0}};
    b["name"] = "sampled";
    b["force"] = {{"family", "sampled"}, {"file", "force.csv"}};
    ASSERT_EQ(sc::run_config(a, {dir.string()}, dir).exit_code, 0);
    auto rb = sc::run_config(b, {dir.string()}, dir);
    ASSERT_EQ(rb.exit_code, 0) << rb.message;
    auto ja = json::parse(slurp(dir / "analytic_summary.json")), jb = json::parse(slurp(dir / "sampled_summary.json"));
    EXPECT_NEAR(ja["results"]["ledger"]["phi_isol"].get<double>(), jb["results"]["ledger"]["phi_isol"].get<double>(), 1e-5);
}
