#pragma once
// Run configuration: a YAML tree addressed by dotted keys, with environment
// overrides ZDECAY_<KEY> (dots become underscores, upper case).

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zdecay/kernels.hpp"

#include <json.hpp>

namespace zdecay {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    // physics
    double m_e = 1.0;
    double m_z = 5.0;
    double g_v_prime = kDefaultGVPrime;
    double beta = 1.0;
    double eta = 1.0;

    // coupling sweep; fractions of g0_max unless g_absolute
    std::vector<double> g_sweep{0.0, 0.01, 0.05, 0.1};
    bool g_absolute = false;

    // fermion grid
    std::string grid_kind = "uniform_energy"; // or uniform_momentum
    int grid_nodes = 5;
    double grid_max = 2.0; // q_max or p_max
    int two_j_max = 1;

    // bosons
    std::string boson_kind = "directional"; // or toy
    int boson_directions = 6;
    int boson_radial = 2;
    double boson_k_max = 2.0;
    int boson_count = 2; // toy only
    int boson_n_max = 1;

    // truncation
    int cap_electrons = 1;
    int cap_positrons = 1;
    int cap_bosons = 1;
    std::optional<int> sector = 0;

    // kernels
    std::string kernel_kind = "model"; // or physical
    std::string s_family = "oscillatory";
    std::string g_family = "smooth_bump"; // infrared_violating, with_jump, zero
    double p_support = 2.5;
    double k_support = 3.0;
    double kernel_amplitude = 1.0;
    double loc_r0 = 1.0;
    double loc_scale = 1.0;
    double hyp_epsilon = 1.0;
    int hyp_n_aux = 32;
    int hyp_padding = 4;
    double hyp_growth_tol = 1.1;

    // Mourre, virial, semigroup
    double mourre_delta = 0.2; // in units of m_e
    std::vector<double> mourre_g{0.02, 0.05};
    double virial_g = 0.05;
    std::vector<double> semigroup_t{0.1, 0.25, 0.5, 1.0};

    // C^{1,1} diagnostic
    int c11_nodes = 500;
    double c11_q_max = 1.0;
    double c11_t_min = 1e-3;
    int c11_points = 20;
    double c11_p_support = 1.5;

    // resolvent and local decay
    double lap_s = 1.0;
    std::vector<int> lap_nodes{20, 40};
    double lap_q_max = 1.5;
    double lap_p_support = 1.5;
    double lap_g = 0.05;
    std::vector<double> lap_lambdas{2.6, 3.0, 3.4};
    double lap_eps_min = 1e-3;
    double lap_eps_max = 10.0;
    int lap_eps_points = 17;
    double decay_lo = 0.2;
    double decay_hi = 4.8;
    double decay_t_min = 0.1;
    double decay_t_max = 1000.0;
    int decay_t_points = 41;
    double decay_t_fit_min = 1.0;

    // tolerances
    double tol_algebra = 1e-14;
    double tol_kummer = 1e-10;
    double tol_commutator = 1e-6;
    double tol_eigen = 1e-10;
    double tol_virial = 1e-8;
    double tol_partition_isometry = 1e-8;
    double tol_partition_unity = 1e-12;
    int relative_bound_samples = 500;
    int partition_samples = 100;

    std::uint64_t seed = 7;

    //! Throws ConfigError on an inconsistent configuration.
    void validate() const;
    //! Flat {dotted key: value} document.
    nlohmann::json to_json() const;
    //! FNV-1a of the canonical JSON dump.
    std::string digest() const;
};

//! Environment variable name for a dotted key.
std::string env_name(const std::string& key);

//! Every dotted key the loader accepts.
std::vector<std::string> config_keys();

//! Parses YAML text, applies environment overrides and validates.
RunConfig parse_config(const std::string& yaml_text, bool use_env = true);
RunConfig load_config(const std::string& path, bool use_env = true);

//! 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(const std::string& s);

} // namespace zdecay
