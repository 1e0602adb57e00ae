#pragma once
// Conjugate operator a = (i/2)(f d/dp + d/dp f), f = omega/p, its flow and
// semigroups, the second-quantized A and the commutators with H0 and H_I.

#include "zdecay/fock.hpp"
#include "zdecay/hamiltonian.hpp"
#include "zdecay/kernels.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace zdecay {

struct FlowMap {
    double m = 1.0;
    double g(double p) const { return std::sqrt(p * p + m * m) - m; }
    double g_inv(double q) const { return std::sqrt((q + m) * (q + m) - m * m); }
    double phi(double t, double p) const { return g_inv(t + g(p)); }
    //! Inverse branch; 0 at or below the threshold g_inv(t).
    double psi(double t, double p) const { return g(p) <= t ? 0.0 : g_inv(g(p) - t); }
};

inline double f_of_p(double p, double m) { return std::sqrt(p * p + m * m) / p; }

//==============================================================================
// One-particle matrices
//==============================================================================

//! a_h on coefficient vectors c_i = sqrt(w_i) u(p_i) with zero extension
//! past both ends. UniformEnergy: i times the centered difference in q.
//! UniformMomentum: centered differences on the symmetrized form.
Eigen::MatrixXcd build_a_matrix(const MomentumGrid& grid);

//! Generator of the band-limited shift on a UniformEnergy grid: i times the
//! Fourier derivative of the odd circulant of length 2n + 1, compressed to the
//! grid. Unlike the centered difference, i[omega, a] has no stationary band.
Eigen::MatrixXcd build_a_spectral(const MomentumGrid& grid);

//! Block-diagonal copy over the channels of a mode table (index = channel * n + node).
Eigen::MatrixXcd direct_sum(const Eigen::MatrixXcd& block, int n_channels);

//! w_t on coefficient vectors of a UniformEnergy grid: the translation
//! q -> q + t of the band-limited interpolant on an odd zero-padded line.
//! Real, and a contraction since it is a compression of a unitary circulant.
Eigen::MatrixXd semigroup_w(double t, const MomentumGrid& grid);
//! Adjoint of semigroup_w.
Eigen::MatrixXd semigroup_w_star(double t, const MomentumGrid& grid);

//==============================================================================
// Second quantization
//==============================================================================

//! dGamma(h) on electrons and positrons, zero on bosons.
SpMat second_quantize_one_body(const FockBasis& basis, const Eigen::MatrixXcd& h);
SparseHermitianOperator second_quantize_A(const FockBasis& basis, const Eigen::MatrixXcd& a_full);
//! Gamma(w) on electrons and positrons, identity on bosons (determinants of w).
SpMat second_quantize_W(const FockBasis& basis, const Eigen::MatrixXcd& w_full);

//==============================================================================
// Commutators
//==============================================================================

//! N+ + N-.
SparseHermitianOperator commutator_H0(const FockBasis& basis);

//! |<psi, i(H0 A - A H0) psi> - <psi, N psi>| / ||psi||^2 with N = N+ + N-
double h0_commutator_deviation(const SparseHermitianOperator& H0, const SpMat& A, const SparseHermitianOperator& N,
                               const Eigen::VectorXcd& psi);

//! Analytic: a applied to F through its p-derivative tables, then weighted.
//! GridConsistent: a_h applied to each fermion leg of sqrt(w1 w2 w3) F.
enum class CommutatorMode { Analytic, GridConsistent };

class HypothesisError : public std::runtime_error {
public:
    HypothesisError(const std::string& what, HypothesisReport r) : std::runtime_error(what), report(std::move(r)) {}
    HypothesisReport report;
};

//! Coefficient-space kernel of the order-th commutator with iA:
//! order 1: -i (a1 + a2) F, order 2: -(a1 + a2)^2 F.
std::vector<cplx> commuted_kernel(const KernelTensor& F, const KernelGrid& grid, CommutatorMode mode, int order);

//! [H_I, iA] as an interaction-type operator. Throws HypothesisError if a
//! report is given and the second kernel hypothesis fails.
SparseHermitianOperator commutator_HI(const FockBasis& basis, const KernelGrid& grid, const KernelTensor& F1,
                                      const KernelTensor& F2, CommutatorMode mode,
                                      const HypothesisReport* hyp = nullptr);
SparseHermitianOperator second_commutator_HI(const FockBasis& basis, const KernelGrid& grid, const KernelTensor& F1,
                                             const KernelTensor& F2, CommutatorMode mode,
                                             const HypothesisReport* hyp = nullptr);

//==============================================================================
// C^{1,1} diagnostic
//==============================================================================

//! Pair kernel of one boson mode as U V^T (electron x positron).
struct LowRankSlices {
    int n = 0;
    std::vector<Eigen::MatrixXcd> U, V;
    int max_rank() const;
};

//! Cross approximation with complete pivoting down to tol * max|K|.
LowRankSlices factorize_pair_kernel(const std::vector<cplx>& K, int nf, int nb, double tol = 1e-13);

struct C11Options {
    double t_min = 1e-3;
    int n_points = 40; // log-spaced in [t_min, 1]; the refined curve uses 2 n_points - 1
};

struct C11Curve {
    std::vector<double> t, norm, partial; // partial = int_t^1 norm / s^2 ds
    double partial_at(double t) const;
};

struct C11Report {
    C11Curve coarse, refined;
    double decade_ratio = 0.0;      // increment over the last decade / previous decade
    double refinement_change = 0.0; // relative change of int_{t_min}^1 under refinement
    bool stabilizes() const { return decade_ratio < 0.5 && refinement_change < 0.05; }
    bool grows() const { return decade_ratio >= 1.0; }
    void write_csv(const std::string& path) const;
};

//! || [W_t, [W_t, H_I]] || for particle caps (1, 1, 1) on one channel, from
//! the blocks (V - 1)^2 K1, K1^dagger (V - 1)^2 and the same for K2, V = w (x) w.
double c11_norm(double t, const MomentumGrid& grid, const LowRankSlices& k1, const LowRankSlices& k2);
C11Report c11_diagnostic(const MomentumGrid& grid, const LowRankSlices& k1, const LowRankSlices& k2,
                         const C11Options& opt = {});

//! Exact || [W, [W, H]] || for small dense matrices.
double double_commutator_norm(const Eigen::MatrixXcd& W, const Eigen::MatrixXcd& H);

//==============================================================================
// Form domain
//==============================================================================

struct FormDomainRow {
    double t = 0.0;
    bool adjoint = false; // W_t* instead of W_t
    double norm = 0.0;
    std::size_t worst_state = 0; // a basis state of the maximizing block
};

struct FormDomainReport {
    std::vector<FormDomainRow> rows;
    double max_norm = 0.0;
    bool pass(double tol = 1e-8) const { return max_norm <= 1.0 + tol; }
};

//! || H0^{1/2} W (H0^{1/2} + 1)^{-1} || per t, blockwise over particle
//! numbers and boson configuration; H0 must be diagonal.
FormDomainReport form_domain_check(const FockBasis& basis, const SparseHermitianOperator& H0,
                                   const FermionModeTable& fermions, const std::vector<double>& ts);

} // namespace zdecay
