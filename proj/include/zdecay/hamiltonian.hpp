#pragma once
// Sparse H0, H_I and H = H0 + g H_I on a truncated Fock basis.

#include "zdecay/fock.hpp"
#include "zdecay/kernels.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace zdecay {

struct SparseHermitianOperator {
    SpMat matrix;
    bool hermitian = false;
    std::string provenance;
    double hermiticity_residual = 0.0; // max |M - M^dagger| before symmetrization

    std::size_t dimension() const { return std::size_t(matrix.rows()); }
    Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const { return matrix * v; }

    //! Drops entries below 1e-15. With check_hermitian, throws if the
    //! residual exceeds 1e-12 and otherwise stores (M + M^dagger) / 2.
    static SparseHermitianOperator make(SpMat m, std::string provenance, bool check_hermitian = true);
};

double max_abs_entry(const SpMat& m);

SparseHermitianOperator assemble_H0(const FockBasis& basis, const FermionModeTable& fermions,
                                    const BosonModeSet& bosons);

struct AssemblyStats {
    std::size_t cap_saturations = 0; // a* applied at n_max (dropped)
    std::size_t entries = 0;
};

//! T = sum K1 b+*(i) b-*(j) a(k) + sum K2 b+*(i) b-*(j) a*(k) with
//! coefficient-space kernels K indexed (i, j, k) like KernelTensor::F.
SpMat pair_creation_part(const FockBasis& basis, const std::vector<cplx>& K1, const std::vector<cplx>& K2,
                         AssemblyStats* stats = nullptr);

//! H_I = T + T^dagger with K_alpha = sqrt(w1 w2 w3) F_alpha.
SparseHermitianOperator assemble_HI(const FockBasis& basis, const KernelGrid& grid, const KernelTensor& F1,
                                    const KernelTensor& F2, AssemblyStats* stats = nullptr);

SparseHermitianOperator assemble_H(const SparseHermitianOperator& H0, const SparseHermitianOperator& HI, double g);

struct RelativeBoundReport {
    double max_ratio = 0.0; // max ||H_I psi|| / (K (C ||H0 psi|| + B ||psi||))
    double vacuum_ratio = 0.0;
    int samples = 0;
    std::vector<std::uint64_t> violating_seeds;
    bool pass() const { return violating_seeds.empty() && max_ratio < 1.0; }
};

//! Random normalized states; sample s is drawn from seed + s.
RelativeBoundReport relative_bound_check(const SparseHermitianOperator& H0, const SparseHermitianOperator& HI,
                                         const FockBasis& basis, const Constants& c, int n_samples,
                                         std::uint64_t seed);

//! Coordinate list: header "%%zdecay coo <dim> <nnz>", then "row col re im" per line.
void write_coo(const std::string& path, const SparseHermitianOperator& op);
//! Binary triplets: "ZDSP", u32 version, u64 dim, u64 nnz, (u64 row, u64 col, f64 re, f64 im)...
void write_operator_binary(const std::string& path, const SparseHermitianOperator& op);
SpMat read_operator_binary(const std::string& path);

} // namespace zdecay
