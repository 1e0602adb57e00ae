#pragma once
// Verification suites behind the command line front end. A suite is a list
// of checks; every check carries claims (measured value, relation, bound)
// and optional CSV curves. Diagnostic checks annotate and never fail a run.

#include "zdecay/config.hpp"
#include "zdecay/conjugate.hpp"
#include "zdecay/spectral.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace zdecay {

constexpr int kResultSchemaVersion = 1;

struct Claim {
    std::string name;
    double value = 0.0;
    std::string relation; // "<=", "<", ">=", ">", "=="
    double bound = 0.0;
    double tolerance = 0.0; // for "=="
    bool holds() const;
};

struct Curve {
    std::string name;                  // file stem
    std::vector<std::string> columns;  // "name [unit]"
    std::vector<std::vector<double>> rows;
};

struct Check {
    std::string id;
    std::string description;
    bool diagnostic = false;
    std::vector<Claim> claims;
    nlohmann::json details = nlohmann::json::object();
    std::vector<Curve> curves;
    std::string error;
    double seconds = 0.0; // kept out of result documents

    bool pass() const;
    Check& claim(std::string name, double value, std::string relation, double bound, double tol = 0.0);
};

struct SuiteResult {
    std::string suite;
    std::vector<Check> checks;
    std::vector<std::string> artifacts;
    bool pass() const; // assertion-level checks only
};

//! Objects of the configured truncation, built once on first use. Safe to
//! share between suites running on different threads.
class Workspace {
public:
    explicit Workspace(RunConfig cfg);
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    const RunConfig& config() const { return cfg_; }
    const KernelGrid& grid();
    const FockBasis& basis();
    const GFamily& g_family();
    const KernelTensor& F1();
    const KernelTensor& F2();
    const HypothesisReport& hypothesis();
    std::string hypothesis_digest();
    const std::vector<double>& a_weights();
    const Constants& constants();
    const SparseHermitianOperator& H0();
    const SparseHermitianOperator& HI();
    //! Coupling from a configured value (a fraction of g0_max unless absolute).
    double coupling(double value, bool absolute = false);
    //! Every eigenpair of H0 + g H_I up to E + m_Z + m_e, cached per g.
    const EigenPairs& low_spectrum(double g);
    //! Dense H and <A>^{-s} of the one-pair sector on the resolvent-probe grid with the given node count.
    const WeightedSpectrum& lap_spectrum(int nodes);

private:
    template <class T>
    struct Lazy {
        std::once_flag once;
        std::optional<T> value;
    };
    RunConfig cfg_;
    Lazy<KernelGrid> grid_;
    Lazy<FockBasis> basis_;
    Lazy<GFamily> family_;
    Lazy<KernelTensor> f1_, f2_;
    Lazy<HypothesisReport> hyp_;
    Lazy<std::vector<double>> aw_;
    Lazy<Constants> constants_;
    Lazy<SparseHermitianOperator> h0_, hi_;
    std::mutex spectra_mutex_;
    std::map<double, std::shared_ptr<EigenPairs>> spectra_;
    std::map<int, std::shared_ptr<WeightedSpectrum>> lap_;
};

GFamily make_g_family(const std::string& name, double p_support, double k_support, double amplitude);

// Individual checks. Each catches its own exceptions into Check::error.
Check check_car_ccr(Workspace& ws);
Check check_kummer(Workspace& ws);
Check check_magnitude_bounds(Workspace& ws);
Check check_derivative_bounds(Workspace& ws);
Check check_dirac_residual(Workspace& ws);
Check check_polarization(Workspace& ws);
Check check_kernel_hypotheses(Workspace& ws);
Check check_kernel_constants(Workspace& ws);
Check check_free_spectrum(Workspace& ws);
Check check_relative_bound(Workspace& ws);
Check check_h0_commutator(Workspace& ws);
Check check_hi_commutator(Workspace& ws);
Check check_semigroup(Workspace& ws);
Check check_mourre(Workspace& ws);
Check check_virial(Workspace& ws);
Check check_ground_state(Workspace& ws);
Check check_partition(Workspace& ws);
Check check_lap(Workspace& ws);
Check check_local_decay(Workspace& ws);
Check check_c11(Workspace& ws);

//! Suite names in dependency order: modes, kernels, assemble, spectrum, mourre, lap.
const std::vector<std::string>& suite_names();

//! Runs one suite. With a non-empty out_dir, binary artifacts (kernels,
//! operators) are written there and listed in the result.
SuiteResult run_suite(const std::string& name, Workspace& ws, const std::string& out_dir = {});

//! Schema-versioned result document; no timing or timestamps.
nlohmann::json result_document(const SuiteResult& r, Workspace& ws);
nlohmann::json timing_document(const std::vector<SuiteResult>& rs);

//! CSV with the header row naming units.
void write_curve_csv(const std::string& path, const Curve& c);

} // namespace zdecay
