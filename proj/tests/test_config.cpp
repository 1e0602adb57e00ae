#include "doctest.h"
#include "zdecay/suites.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace zdecay;

namespace {

// Small truncation that keeps every suite under a few seconds.
const char* kSmall = R"(
grid:
  nodes: 3
bosons:
  kind: toy
  count: 2
c11:
  nodes: 60
  points: 8
samples:
  relative_bound: 50
  partition: 10
)";

struct EnvGuard {
    std::string name;
    EnvGuard(std::string n, const char* v) : name(std::move(n)) { setenv(name.c_str(), v, 1); }
    ~EnvGuard() { unsetenv(name.c_str()); }
};

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("shipped default configuration equals the built-in defaults") {
    const auto c = load_config(std::string(ZDECAY_SOURCE_DIR) + "/config/default.yaml", false);
    CHECK(c.digest() == RunConfig{}.digest());
    CHECK(c.to_json() == RunConfig{}.to_json());
    CHECK(c.m_e < c.m_z);
    CHECK(c.sector == 0);
    const auto n = load_config(std::string(ZDECAY_SOURCE_DIR) + "/config/negative_control.yaml", false);
    CHECK(n.g_family == "infrared_violating");
    CHECK(n.digest() != c.digest());
}

TEST_CASE("m_e >= m_Z is rejected before anything is built") {
    CHECK_THROWS_AS(parse_config("physics:\n  m_e: 5.0\n", false), ConfigError);
    CHECK_THROWS_AS(parse_config("physics:\n  m_z: 0.5\n", false), ConfigError);
    RunConfig c;
    c.m_z = c.m_e;
    CHECK_THROWS_AS(Workspace{c}, ConfigError);
    EnvGuard e("ZDECAY_PHYSICS_M_E", "9");
    CHECK_THROWS_AS(parse_config(""), ConfigError);
}

TEST_CASE("unknown keys and malformed values are errors") {
    CHECK_THROWS_AS(parse_config("grid:\n  nodez: 3\n", false), ConfigError);
    CHECK_THROWS_AS(parse_config("grid:\n  nodes: many\n", false), ConfigError);
    CHECK_THROWS_AS(parse_config("grid:\n  kind: chebyshev\n", false), ConfigError);
    CHECK_THROWS_AS(parse_config("- 1\n- 2\n", false), ConfigError);
    CHECK_THROWS_AS(parse_config("coupling:\n  g: [0.5, 1.5]\n", false), ConfigError);
    CHECK_NOTHROW(parse_config("coupling:\n  g: [1.5]\n  absolute: true\n", false));
}

TEST_CASE("environment overrides") {
    CHECK(env_name("grid.nodes") == "ZDECAY_GRID_NODES");
    CHECK(env_name("kernel.localization.r0") == "ZDECAY_KERNEL_LOCALIZATION_R0");
    {
        EnvGuard a("ZDECAY_GRID_NODES", "7");
        EnvGuard b("ZDECAY_COUPLING_G", "[0.0, 0.2]");
        EnvGuard s("ZDECAY_CAPS_SECTOR", "none");
        const auto c = parse_config("grid:\n  nodes: 4\n");
        CHECK(c.grid_nodes == 7);
        CHECK(c.g_sweep == std::vector<double>{0.0, 0.2});
        CHECK_FALSE(c.sector.has_value());
        CHECK(parse_config("", false).grid_nodes == 5);
    }
    CHECK(parse_config("").grid_nodes == 5);
    for (const auto& k : config_keys()) CHECK(RunConfig{}.to_json().contains(k));
}

TEST_CASE("config digest tracks every value") {
    RunConfig a, b;
    CHECK(a.digest() == b.digest());
    b.seed = 8;
    CHECK(a.digest() != b.digest());
    b = RunConfig{};
    b.lap_lambdas.push_back(3.8);
    CHECK(a.digest() != b.digest());
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("claims") {
    CHECK(Claim{"x", 1.0, "<=", 1.0}.holds());
    CHECK_FALSE(Claim{"x", 1.0, "<", 1.0}.holds());
    CHECK(Claim{"x", 2.0, ">", 1.0}.holds());
    CHECK(Claim{"x", 1.0 + 1e-13, "==", 1.0, 1e-12}.holds());
    CHECK_FALSE(Claim{"x", 1.1, "==", 1.0, 1e-12}.holds());
    CHECK_FALSE(Claim{"x", std::nan(""), "<=", 1.0}.holds());
    CHECK_FALSE(Claim{"x", 0.0, "~", 1.0}.holds());

    SuiteResult r;
    Check diag;
    diag.diagnostic = true;
    diag.claim("d", 2.0, "<", 1.0);
    r.checks.push_back(diag);
    CHECK_FALSE(diag.pass());
    CHECK(r.pass());
    Check bad;
    bad.error = "boom";
    r.checks.push_back(bad);
    CHECK_FALSE(r.pass());
}

TEST_CASE("same config and seed give byte-identical documents") {
    const auto cfg = parse_config(kSmall, false);
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
        Workspace ws(cfg);
        std::string all;
        for (const char* s : {"modes", "kernels", "assemble", "spectrum"}) {
            const auto r = run_suite(s, ws);
            CHECK(r.pass());
            all += result_document(r, ws).dump();
        }
        if (rep == 0)
            first = all;
        else
            CHECK(all == first);
    }
    auto other = cfg;
    other.seed = 99;
    Workspace wo(other);
    CHECK(result_document(run_suite("assemble", wo), wo)["config_digest"] != cfg.digest());
}

TEST_CASE("result documents carry schema, digests and tolerances") {
    const auto cfg = parse_config(kSmall, false);
    Workspace ws(cfg);
    const auto r = run_suite("kernels", ws);
    const auto d = result_document(r, ws);
    CHECK(d["schema_version"] == kResultSchemaVersion);
    CHECK(d["suite"] == "kernels");
    CHECK(d["config_digest"] == cfg.digest());
    CHECK(d["hypothesis_report_digest"] == fnv1a_hex(hypothesis_report_json(ws.hypothesis())));
    CHECK(d.dump().find("time") == std::string::npos);
    for (const auto& c : d["checks"])
        for (const auto& cl : c["claims"]) {
            CHECK(cl.contains("bound"));
            CHECK(cl.contains("relation"));
            if (cl["relation"] == "==") CHECK(cl.contains("tolerance"));
        }
    CHECK(std::find(r.artifacts.begin(), r.artifacts.end(), "kernel_F1.bin") != r.artifacts.end());
    const auto t = timing_document({r});
    CHECK(t["suites"]["kernels"]["seconds"].get<double>() >= 0.0);
}

TEST_CASE("suites write CSV curves with unit headers and kernel artifacts") {
    const auto dir = std::filesystem::temp_directory_path() / "zdecay_test_config_out";
    std::filesystem::remove_all(dir);
    const auto cfg = parse_config(kSmall, false);
    Workspace ws(cfg);
    const auto r = run_suite("spectrum", ws, dir.string());
    CHECK(r.pass());
    const auto csv = read_file(dir / "ground_state.csv");
    CHECK(csv.rfind("g [1],E [m_e],gap [m_e],envelope [m_e]", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + int(cfg.g_sweep.size()));
    run_suite("kernels", ws, dir.string());
    CHECK(std::filesystem::exists(dir / "kernel_F1.bin"));
    CHECK(std::filesystem::exists(dir / "kernel_F2.bin.json"));
    const auto k = read_kernel((dir / "kernel_F1.bin").string());
    CHECK(k.F.size() == ws.F1().F.size());
    std::filesystem::remove_all(dir);
}

TEST_CASE("mourre on a kernel failing the infrared item surfaces the hypothesis report") {
    auto cfg = parse_config(kSmall, false);
    cfg.g_family = "infrared_violating";
    Workspace ws(cfg);
    const auto c = check_mourre(ws);
    CHECK_FALSE(c.pass());
    CHECK(c.error.find("hyp2(iii)") != std::string::npos);
    REQUIRE(c.details.contains("hypothesis_report"));
    CHECK(c.details["hypothesis_report"]["hyp2_infrared_ok"] == false);
    CHECK(c.details["hypothesis_report_digest"] == ws.hypothesis_digest());
    const auto r = run_suite("mourre", ws);
    CHECK_FALSE(r.pass());
}

TEST_CASE("couplings above g0_max fail the ground-state check") {
    auto cfg = parse_config(kSmall, false);
    cfg.g_absolute = true;
    Workspace ws(cfg);
    ws.constants();
    auto big = cfg;
    big.g_sweep = {2.0 * ws.constants().g0_max};
    Workspace wb(big);
    const auto c = check_ground_state(wb);
    CHECK_FALSE(c.pass());
    CHECK(c.error.find("g0_max") != std::string::npos);
}

TEST_CASE("unknown suite names are configuration errors") {
    Workspace ws(RunConfig{});
    CHECK_THROWS_AS(run_suite("everything", ws), ConfigError);
    CHECK(suite_names().size() == 6);
}
