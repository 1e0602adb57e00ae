#pragma once
// Eigensolvers, ground state and gap, Mourre window positivity, virial
// residuals, and the resolvent / local-decay probes.

#include "zdecay/hamiltonian.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace zdecay {

//==============================================================================
// Eigensolvers
//==============================================================================

struct LanczosOptions {
    int max_iter = 400;
    double tol = 1e-10;           // residual / ||H||
    std::uint64_t seed = 1;
    std::size_t dense_limit = 2000; // dense solver at or below this dimension
    double cluster_tol = 1e-8;
};

//! Eigenpairs in the full basis, sorted ascending.
struct EigenPairs {
    Eigen::VectorXd values;
    Eigen::MatrixXcd vectors;
    std::vector<double> residuals; // ||H v - lambda v||
    double norm_estimate = 0.0;    // lower bound on ||H|| from the extreme Ritz values
    bool converged = true;

    std::size_t size() const { return std::size_t(values.size()); }
    double max_residual() const;
};

struct SpectralReport {
    EigenPairs pairs;
    double E = 0.0;
    double gap = 0.0;
    int degeneracy = 0;
    std::optional<double> ground_charge; // <Q> in the ground vector when a basis is given
    bool residuals_ok() const;             // every residual <= 1e-9 ||H||
};

//! Lanczos with full reorthogonalization against the Krylov basis and the
//! locked vectors; Ritz pairs are accepted once the true residual is below
//! tol ||H||. Restarts deflated against everything found so far until a run
//! produces nothing new among the lowest count, so degenerate copies are found.
EigenPairs lanczos_lowest(const SpMat& H, int count, const LanczosOptions& opt = {},
                          const Eigen::MatrixXcd* locked = nullptr);

EigenPairs dense_eigenpairs(const SpMat& H);

//! Lowest count eigenpairs: dense at or below opt.dense_limit, otherwise Lanczos.
SpectralReport eigs_lowest(const SparseHermitianOperator& H, int count, const LanczosOptions& opt = {},
                           const FockBasis* basis = nullptr);

//! Connected components of the sparsity graph, each sorted; ordered by first index.
std::vector<std::vector<std::size_t>> components(const SpMat& H);

//! Every eigenpair with eigenvalue <= ceiling, solved per connected component
//! (dense for small components, deflated Lanczos otherwise).
EigenPairs eigenpairs_below(const SparseHermitianOperator& H, double ceiling, const LanczosOptions& opt = {});

//! Largest |eigenvalue| of a Hermitian matrix by Lanczos.
double hermitian_norm(const SpMat& M, std::uint64_t seed = 1);

//==============================================================================
// Ground state
//==============================================================================

struct GroundStateRow {
    double g = 0.0;
    double E = 0.0;
    double gap = 0.0;
    int degeneracy = 0;
    double envelope = 0.0; // |g| K B / (1 - |g| K C)
    double residual = 0.0;
    bool within_envelope() const { return std::abs(E) <= envelope + 1e-12; }
};

//! E(g), gap(g) and degeneracy for H0 + g H_I. Throws if |g| > g0_max.
std::vector<GroundStateRow> ground_state_report(const SparseHermitianOperator& H0, const SparseHermitianOperator& HI,
                                                const Constants& c, const std::vector<double>& gs,
                                                const LanczosOptions& opt = {});

//! Smallest nonzero diagonal entry of a diagonal H0: the first excited free level of the truncation.
double first_excited_free_level(const SparseHermitianOperator& H0);

//==============================================================================
// Mourre and virial
//==============================================================================

struct MourreReport {
    double delta = 0.0;
    double lo = 0.0, hi = 0.0; // window [delta, m_Z - delta] relative to E
    std::size_t n_window = 0;
    double c_delta = 0.0;
    bool vacuous = false;
    std::string warning;
    bool pass() const { return vacuous || c_delta > 0.0; }
};

//! Compresses M to the eigenvectors with eigenvalue - E in [delta, m_Z - delta]
//! (closed, widened by the cluster tolerance). eig must hold every eigenpair up to E + m_Z - delta.
MourreReport mourre_window_check(const EigenPairs& eig, const SparseHermitianOperator& M, double E, double delta,
                                 double m_Z, double cluster_tol = 1e-8);

struct VirialRow {
    double eigenvalue = 0.0;
    double expectation = 0.0; // |<phi, M phi>|
    double residual = 0.0;
    double tolerance = 0.0;
    bool pass() const { return expectation <= tolerance; }
};

//! |<phi, M phi>| against max(1e-8, 10 residual ||M||) for the first count pairs.
std::vector<VirialRow> virial_check(const EigenPairs& eig, const SparseHermitianOperator& M, double norm_M,
                                    std::size_t count);

//! i(H A - A H) for a Hermitian H and the matrix A.
SparseHermitianOperator exact_commutator(const SparseHermitianOperator& H, const SpMat& A);

//==============================================================================
// Resolvent and local decay
//==============================================================================

//! Dense Hermitian eigendecomposition together with <A>^{-s}, <A> = (1 + A^dagger A)^{1/2}.
struct WeightedSpectrum {
    Eigen::VectorXd values;
    Eigen::MatrixXcd vectors;
    Eigen::MatrixXcd weight; // <A>^{-s}
    Eigen::MatrixXcd B;      // weight * vectors
    double s = 1.0;
    static WeightedSpectrum build(const Eigen::MatrixXcd& H, const Eigen::MatrixXcd& A, double s);
};

struct LapCurve {
    double lambda = 0.0;
    double floor = 0.0; // 10 x spacing of the distinct levels bracketing lambda
    std::vector<double> eps, weighted, unweighted;
    double exponent = 0.0;            // -slope of log weighted vs log eps above the floor
    double unweighted_exponent = 0.0;
    int fit_points = 0;
};

struct LapReport {
    std::vector<LapCurve> curves;
    double max_exponent = 0.0;
    bool bounded_by_unweighted = true; // weighted <= unweighted at every probe
};

//! lambdas are absolute energies. The exponent is fitted on eps >= floor only.
LapReport lap_probe(const WeightedSpectrum& ws, const std::vector<double>& lambdas, const std::vector<double>& eps,
                    double cluster_tol = 1e-8, std::uint64_t seed = 1);

struct DecayCurve {
    std::vector<double> t, norm;
    double t_rec = 0.0;   // 2 pi / min spacing of distinct levels in the window
    double exponent = 0.0; // slope of log norm vs log t on [t_fit_min, t_rec)
    int fit_points = 0;
    std::size_t n_window = 0;
};

//! || <A>^{-s} e^{-itH} 1_window(H) <A>^{-s} || with window [E + lo, E + hi].
DecayCurve local_decay_probe(const WeightedSpectrum& ws, double E, double lo, double hi, const std::vector<double>& t,
                             double t_fit_min, double cluster_tol = 1e-8, std::uint64_t seed = 1);

//! Rows and columns idx of M as a dense matrix.
Eigen::MatrixXcd dense_block(const SpMat& M, const std::vector<std::size_t>& idx);

//! Largest singular value of B diag(d) B^dagger, by Lanczos on X^dagger X.
double weighted_norm(const Eigen::MatrixXcd& B, const Eigen::VectorXcd& d, std::uint64_t seed = 1, int iters = 200);

} // namespace zdecay
