#pragma once
// Coupling kernels: polarization vectors, the physical x-integral h, the
// model form p1 p2 s G~, admissibility checks and derived constants.

#include "zdecay/dirac_modes.hpp"
#include "zdecay/fock.hpp"

#include <Eigen/Core>

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace zdecay {

using Vec4c = Eigen::Vector4cd;

constexpr double kDefaultGVPrime = 0.074;
constexpr double kCZOverCmZ = 156.0;

//==============================================================================
// Conventions: metric (+,-,-,-), standard representation
//==============================================================================

struct DiracAlgebra {
    std::array<Eigen::Matrix4cd, 4> gamma; // gamma^mu
    Eigen::Matrix4cd gamma5;
    static const DiracAlgebra& standard();
};

inline double metric(int mu) { return mu == 0 ? 1.0 : -1.0; }

//! Contravariant massive spin-1 polarization eps^mu(k, lambda), the rest
//! frame spherical basis boosted along k.
Vec4c polarization(const Vec3& k, int lambda, double m_z);

//! max_mu |eps_mu| / sqrt(2 omega3) / (1 + |k|^2)^(1/4)
double polarization_ratio(const Vec3& k, int lambda, double m_z);

struct PolarizationFit {
    double c_mz = 0.0;         // sup of polarization_ratio over |k| <= k_max
    double c_mz_refined = 0.0; // same with a doubled sample
    double k_max = 0.0;
    bool stable(double tol = 1e-3) const;
};

PolarizationFit fit_polarization_constant(double m_z, double k_max = 10.0, int n_k = 200);

//==============================================================================
// Grids and families
//==============================================================================

struct KernelGrid {
    FermionModeTable fermions;
    BosonModeSet bosons;
    double m_e = 1.0;
};

//! s and its p-derivatives {s, s_1, s_2, s_11, s_12, s_22}.
struct SFamily {
    std::string name;
    std::function<std::array<double, 6>(double, double)> eval;

    static SFamily unit();
    //! cos(p1 p2) / (1 + p1 p2)
    static SFamily oscillatory();
};

struct GrowthReport {
    double sup_coarse = 0.0; // max_{n,m} |d^n d^m s| p1^n p2^m on [1e-3, 1]^2
    double sup_fine = 0.0;   // same on [1e-6, 1]^2
    bool pass() const;
};

//! Scale-free check of |d^n_{p1} d^m_{p2} s| <~ p1^{-n} p2^{-m} near 0.
GrowthReport check_s_growth(const SFamily& s, int n = 40);

//! G~ (or a physical G) with its p-derivatives {G, G_1, G_2, G_11, G_12, G_22}
//! and the box it is declared to vanish outside of.
struct GFamily {
    std::string name;
    double p_support = 0.0;
    double k_support = 0.0;
    std::function<std::array<cplx, 6>(double p1, const AngularQN&, double p2, const AngularQN&, const BosonMode&)>
        eval;

    cplx operator()(double p1, const AngularQN& g1, double p2, const AngularQN& g2, const BosonMode& b) const {
        return eval(p1, g1, p2, g2, b)[0];
    }

    //! b(p1) b(p2) c(|k|) with b(p) = p^3 bump(p / P), c(k) = bump(k / K).
    static GFamily smooth_bump(double p_support, double k_support, double amplitude = 1.0);
    //! As smooth_bump without the p^3 factor: nonzero at p = 0.
    static GFamily infrared_violating(double p_support, double k_support, double amplitude = 1.0);
    //! smooth_bump multiplied by the indicator of p1 < P/2.
    static GFamily with_jump(double p_support, double k_support);
    static GFamily zero();
};

//! exp(1 - 1/(1 - x^2)) on |x| < 1 and its first two derivatives.
std::array<double, 3> bump3(double x);

//==============================================================================
// Kernel tensors
//==============================================================================

enum class KernelProvenance { Physical, Model };

struct KernelTensor {
    int alpha = 1;
    KernelProvenance provenance = KernelProvenance::Model;
    std::size_t n1 = 0, n2 = 0, n3 = 0;
    std::vector<cplx> F;
    std::vector<cplx> G; // G for physical kernels, G~ for model kernels
    // p-derivative tables of F (model kernels only)
    std::vector<cplx> F1, F2, F11, F12, F22;
    std::string description;
    double l2_norm = 0.0; // (sum w1 w2 w3 |F|^2)^(1/2)

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return (i * n2 + j) * n3 + k; }
    cplx at(std::size_t i, std::size_t j, std::size_t k) const { return F[index(i, j, k)]; }
    bool has_derivatives() const { return !F1.empty(); }
    bool is_zero() const;
    //! sqrt(w1 w2 w3) F, the coefficient-space kernel.
    std::vector<cplx> weighted(const KernelGrid& grid) const;
};

//! F = p1 p2 s G~ on the grid with derivative tables. Throws if s fails
//! the growth check.
KernelTensor model_kernel(int alpha, const KernelGrid& grid, const SFamily& s, const GFamily& g_tilde);

//! Kernel from explicit coefficient-space values, no derivative tables.
KernelTensor kernel_from_values(int alpha, const KernelGrid& grid, std::vector<cplx> F, std::string description);

double kernel_l2_norm(const std::vector<cplx>& F, const KernelGrid& grid);

//==============================================================================
// Physical kernel
//==============================================================================

struct CubatureSpec {
    int n_radial = 24;
    int n_theta = 12;
    int n_phi = 24;
    CubatureSpec doubled() const { return {2 * n_radial, 2 * n_theta, 2 * n_phi}; }
};

struct PhysicalParams {
    LocalizationFn f_loc = LocalizationFn::bump();
    double g_v_prime = kDefaultGVPrime;
    double m_e = 1.0;
    CubatureSpec cubature{};
};

//! int f(|x|) psibar_+ gamma^mu (g'_V - gamma5) psi~_- eps_mu e^{i s k.x} dx / sqrt(2 omega3)
//! with an explicit lower-index polarization and phase sign s = +-1.
cplx physical_h_custom(const FermionMode& xi1, const FermionMode& xi2, const Vec3& k, const Vec4c& eps_lower,
                       int phase_sign, double m_z, const PhysicalParams& par);

//! alpha = 1: eps_mu with e^{ik.x}; alpha = 2: eps*_mu with e^{-ik.x}.
cplx physical_h(int alpha, const FermionMode& xi1, const FermionMode& xi2, const BosonMode& xi3, double m_z,
                const PhysicalParams& par);

//! Full h table on the grid, indexed like KernelTensor::F.
std::vector<cplx> physical_h_table(int alpha, const KernelGrid& grid, const PhysicalParams& par);

//! F = h G with G sampled from the family.
KernelTensor physical_kernel(int alpha, const KernelGrid& grid, const GFamily& g, const PhysicalParams& par);

struct CubatureConvergence {
    double max_rel_diff = 0.0; // relative to the largest sampled |h|
    double max_abs_h = 0.0;
    int samples = 0;
    bool converged(double tol = 1e-6) const { return max_rel_diff <= tol; }
};

//! Compares h at the given cubature and at the doubled one on sampled triples.
CubatureConvergence physical_h_convergence(int alpha, const KernelGrid& grid, const PhysicalParams& par,
                                           int samples, std::uint64_t seed);

//==============================================================================
// Hypotheses and constants
//==============================================================================

//! A(xi) for every fermion mode of the grid.
std::vector<double> a_weights(const FermionModeTable& modes, const LocalizationFn& f_loc, double m_e);

//! sum w1 w2 w3 A1^2 A2^2 (|k|^2 + m_Z^2)^(1/2) |G|^2
double check_hypothesis1(const std::vector<cplx>& G, const KernelGrid& grid, const std::vector<double>& A);

struct Hyp2Options {
    int n_aux = 32;       // samples per p axis on [0, p_support]
    int padding = 4;      // zero-padding factor of the even extension
    double growth_tol = 1.1;
};

struct HypothesisReport {
    double hyp1_value = 0.0;
    bool hyp2_support_ok = false;
    double hyp2_sobolev_norm = 0.0;         // at n_aux
    double hyp2_sobolev_norm_refined = 0.0; // at 2 n_aux
    bool hyp2_sobolev_bounded = false;
    bool hyp2_infrared_ok = false;
    double epsilon = 0.0;
    std::string extension = "even";

    bool hyp1_pass() const;
    bool hyp2_pass() const { return hyp2_support_ok && hyp2_sobolev_bounded && hyp2_infrared_ok; }
    std::string failed_items() const;
};

//! Items (i)-(iii) for a kernel family on the channels and bosons of the grid.
HypothesisReport check_hypothesis2(const GFamily& g, const KernelGrid& grid, double epsilon,
                                   const Hyp2Options& opt = {});

struct Constants {
    double c_mz = 0.0, c_z = 0.0;
    double K1 = 0.0, K2 = 0.0, K = 0.0;
    double C1b = 0.0, C2be = 0.0, B1b = 0.0, B2be = 0.0;
    double C_be = 0.0, B_be = 0.0;
    double g0_max = 0.0; // +inf when K1 = 0
    double beta = 1.0, eta = 1.0;
    bool g0_unbounded() const;
};

//! K_i^2 = sum_alpha C_Z^2 sum w w w A^2 A^2 |G|^2 (...), from the G arrays
//! stored in the tensors.
Constants constants(const KernelTensor& t1, const KernelTensor& t2, const KernelGrid& grid,
                    const std::vector<double>& A, double c_mz, double beta, double eta);

//==============================================================================
// Persistence
//==============================================================================

//! Binary container (magic, dims, f64 little-endian complex pairs) plus a
//! JSON sidecar at path + ".json".
void write_kernel(const std::string& path, const KernelTensor& t, const HypothesisReport* report = nullptr);
KernelTensor read_kernel(const std::string& path);

std::string hypothesis_report_json(const HypothesisReport& r);

} // namespace zdecay
