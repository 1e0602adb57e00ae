// Batch front end: loads a run configuration, runs verification suites and
// writes one JSON result document per suite plus CSV curves and timing.json.
//
//   zdecay_cli verify --config config/default.yaml --out results --seed 7
//
// Exit status: 0 when every assertion-level check passes, 1 when one fails,
// 2 on configuration or usage errors.

#include "zdecay/suites.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

using namespace zdecay;

namespace {

struct Options {
    std::string config;
    std::string out = "zdecay_out";
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::vector<std::string> suites;
};

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << j.dump(2) << "\n";
}

void print_summary(const SuiteResult& r) {
    for (const auto& c : r.checks) {
        const char* tag = c.pass() ? "pass" : (c.diagnostic ? "note" : "FAIL");
        std::cout << "[" << tag << "] " << r.suite << "/" << c.id;
        if (c.diagnostic) std::cout << " (diagnostic)";
        if (!c.error.empty()) std::cout << ": " << c.error;
        std::cout << "\n";
        if (!c.pass())
            for (const auto& cl : c.claims)
                if (!cl.holds())
                    std::cout << "    " << cl.name << " = " << cl.value << ", required " << cl.relation << " "
                              << cl.bound << "\n";
    }
}

int run(const std::string& sub, const Options& o) {
    RunConfig cfg = o.config.empty() ? parse_config("") : load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    cfg.validate();

    std::vector<std::string> names;
    if (!o.suites.empty())
        names = o.suites;
    else if (sub == "verify")
        names = suite_names();
    else
        names = {sub};
    for (const auto& n : names)
        if (std::find(suite_names().begin(), suite_names().end(), n) == suite_names().end())
            throw ConfigError("unknown suite " + n);

    namespace fs = std::filesystem;
    fs::create_directories(o.out);
    Workspace ws(cfg);

    std::vector<SuiteResult> results(names.size());
    if (o.threads > 1 && names.size() > 1) {
        // suites share the lazily built truncation; build it before fanning out
        ws.HI();
        ws.hypothesis();
        std::vector<std::future<void>> running;
        std::size_t next = 0;
        while (next < names.size() || !running.empty()) {
            while (next < names.size() && int(running.size()) < o.threads) {
                const std::size_t i = next++;
                running.push_back(std::async(std::launch::async, [&, i] { results[i] = run_suite(names[i], ws, o.out); }));
            }
            running.front().get();
            running.erase(running.begin());
        }
    } else {
        for (std::size_t i = 0; i < names.size(); ++i) results[i] = run_suite(names[i], ws, o.out);
    }

    bool ok = true;
    for (const auto& r : results) {
        write_json(fs::path(o.out) / (r.suite + ".json"), result_document(r, ws));
        print_summary(r);
        ok = ok && r.pass();
    }
    if (sub == "verify") {
        nlohmann::json v;
        v["schema_version"] = kResultSchemaVersion;
        v["suite"] = "verify";
        v["config_digest"] = cfg.digest();
        v["hypothesis_report_digest"] = ws.hypothesis_digest();
        v["pass"] = ok;
        for (const auto& r : results) v["suites"][r.suite] = r.pass();
        write_json(fs::path(o.out) / "verify.json", v);
    }
    write_json(fs::path(o.out) / "config.json", cfg.to_json());
    write_json(fs::path(o.out) / "timing.json", timing_document(results));
    std::cout << (ok ? "all assertion checks passed" : "assertion checks failed") << "\n";
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Verification suites for the Z-boson decay Hamiltonian at desk scale"};
    app.require_subcommand(1);
    Options o;
    const std::vector<std::pair<std::string, std::string>> subs{
        {"modes", "Dirac partial waves: Kummer evaluation, magnitude and derivative bounds, eigen-residuals"},
        {"kernels", "kernel construction, hypothesis reports and derived constants"},
        {"assemble", "Fock-space algebra, Hamiltonian matrices, relative bound, partition of unity"},
        {"spectrum", "free spectrum, ground state and gap versus g, virial residuals"},
        {"mourre", "commutator identities, semigroup suite, Mourre window and the C^{1,1} diagnostic"},
        {"lap", "weighted resolvent and local-decay probes"},
        {"verify", "every suite"}};
    for (const auto& [name, help] : subs) {
        auto* s = app.add_subcommand(name, help);
        s->add_option("--config", o.config, "configuration file (YAML)")->check(CLI::ExistingFile);
        s->add_option("--out", o.out, "output directory");
        s->add_option("--seed", o.seed, "random seed (overrides the configuration)");
        s->add_option("--threads", o.threads, "suites run concurrently")->check(CLI::PositiveNumber);
        s->add_option("--suite", o.suites, "restrict to these suites");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    try {
        return run(app.get_subcommands().front()->get_name(), o);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
