#include "zdecay/hamiltonian.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <stdexcept>

namespace zdecay {

double max_abs_entry(const SpMat& m) {
    double v = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) v = std::max(v, std::abs(it.value()));
    return v;
}

SparseHermitianOperator SparseHermitianOperator::make(SpMat m, std::string provenance, bool check_hermitian) {
    if (m.rows() != m.cols()) throw std::invalid_argument("SparseHermitianOperator: matrix is not square");
    SparseHermitianOperator op;
    op.provenance = std::move(provenance);
    m.prune([](Eigen::Index, Eigen::Index, const cplx& v) { return std::abs(v) >= 1e-15; });
    if (check_hermitian) {
        const SpMat adj = m.adjoint();
        op.hermiticity_residual = max_abs_entry(SpMat(m - adj));
        if (op.hermiticity_residual > 1e-12)
            throw std::runtime_error("SparseHermitianOperator: hermiticity residual " +
                                     std::to_string(op.hermiticity_residual) + " for " + op.provenance);
        m = SpMat(0.5 * (m + adj));
        m.prune([](Eigen::Index, Eigen::Index, const cplx& v) { return std::abs(v) >= 1e-15; });
        op.hermitian = true;
    }
    m.makeCompressed();
    op.matrix = std::move(m);
    return op;
}

SparseHermitianOperator assemble_H0(const FockBasis& basis, const FermionModeTable& fermions,
                                    const BosonModeSet& bosons) {
    if (int(fermions.size()) != basis.n_fermion_modes() || int(bosons.size()) != basis.n_boson_modes())
        throw std::invalid_argument("assemble_H0: mode counts do not match the basis");
    std::vector<double> we(fermions.size()), wb(bosons.size());
    for (std::size_t i = 0; i < fermions.size(); ++i) we[i] = omega(fermions.modes[i].p, fermions.grid.mass);
    for (std::size_t k = 0; k < bosons.size(); ++k) wb[k] = bosons.omega3(k);
    std::vector<Eigen::Triplet<cplx>> t;
    for (std::size_t s = 0; s < basis.size(); ++s) {
        const auto& st = basis.state(s);
        double e = 0.0;
        for (int i : st.electrons.members()) e += we[i];
        for (int i : st.positrons.members()) e += we[i];
        for (std::size_t k = 0; k < st.bosons.size(); ++k) e += st.bosons[k] * wb[k];
        if (e != 0.0) t.emplace_back(int(s), int(s), e);
    }
    SpMat m(basis.size(), basis.size());
    m.setFromTriplets(t.begin(), t.end());
    return SparseHermitianOperator::make(std::move(m), "H0");
}

SpMat pair_creation_part(const FockBasis& basis, const std::vector<cplx>& K1, const std::vector<cplx>& K2,
                         AssemblyStats* stats) {
    const int nf = basis.n_fermion_modes(), nb = basis.n_boson_modes();
    const std::size_t total = std::size_t(nf) * nf * nb;
    if ((!K1.empty() && K1.size() != total) || (!K2.empty() && K2.size() != total))
        throw std::invalid_argument("pair_creation_part: kernel size does not match the basis");
    const auto caps = basis.caps();
    const int nmax = basis.boson_cap();
    AssemblyStats local;
    std::vector<Eigen::Triplet<cplx>> trip;

    for (std::size_t col = 0; col < basis.size(); ++col) {
        const auto& s = basis.state(col);
        if (s.n_electrons() >= caps.electrons || s.n_positrons() >= caps.positrons) continue;
        for (int alpha = 1; alpha <= 2; ++alpha) {
            const auto& K = alpha == 1 ? K1 : K2;
            if (K.empty()) continue;
            if (alpha == 2 && s.n_bosons() >= caps.bosons) continue;
            for (int k = 0; k < nb; ++k) {
                // boson leg first: a(k) for alpha = 1, a*(k) for alpha = 2
                std::optional<BosonAction> b;
                if (alpha == 1) {
                    b = apply_a(s, k);
                } else {
                    b = apply_a_dagger(s, k, nmax);
                    if (!b && s.bosons[k] == nmax) ++local.cap_saturations;
                }
                if (!b) continue;
                for (int j = 0; j < nf; ++j) {
                    const auto bm = apply_b_minus_dagger(b->state, j);
                    if (!bm) continue;
                    for (int i = 0; i < nf; ++i) {
                        const cplx kv = K[(std::size_t(i) * nf + j) * nb + k];
                        if (kv == 0.0) continue;
                        const auto bp = apply_b_plus_dagger(bm->state, i);
                        if (!bp) continue;
                        const auto row = basis.find(bp->state);
                        if (!row) continue;
                        trip.emplace_back(int(*row), int(col), kv * b->amplitude * double(bm->sign * bp->sign));
                    }
                }
            }
        }
    }
    SpMat T(basis.size(), basis.size());
    T.setFromTriplets(trip.begin(), trip.end());
    local.entries = std::size_t(T.nonZeros());
    if (stats) *stats = local;
    return T;
}

SparseHermitianOperator assemble_HI(const FockBasis& basis, const KernelGrid& grid, const KernelTensor& F1,
                                    const KernelTensor& F2, AssemblyStats* stats) {
    if (F1.alpha != 1 || F2.alpha != 2) throw std::invalid_argument("assemble_HI: expected alpha = 1 and 2 kernels");
    const SpMat T = pair_creation_part(basis, F1.weighted(grid), F2.weighted(grid), stats);
    return SparseHermitianOperator::make(SpMat(T + SpMat(T.adjoint())), "H_I");
}

SparseHermitianOperator assemble_H(const SparseHermitianOperator& H0, const SparseHermitianOperator& HI, double g) {
    if (H0.dimension() != HI.dimension()) throw std::invalid_argument("assemble_H: dimension mismatch");
    return SparseHermitianOperator::make(SpMat(H0.matrix + g * HI.matrix), "H0 + g H_I");
}

RelativeBoundReport relative_bound_check(const SparseHermitianOperator& H0, const SparseHermitianOperator& HI,
                                         const FockBasis& basis, const Constants& c, int n_samples,
                                         std::uint64_t seed) {
    RelativeBoundReport rep;
    const std::size_t n = H0.dimension();
    auto ratio = [&](const Eigen::VectorXcd& psi) {
        const double lhs = (HI.matrix * psi).norm();
        const double rhs = c.K * (c.C_be * (H0.matrix * psi).norm() + c.B_be * psi.norm());
        if (lhs == 0.0) return 0.0;
        return rhs > 0.0 ? lhs / rhs : std::numeric_limits<double>::infinity();
    };
    OccupationState vac;
    vac.bosons.assign(basis.n_boson_modes(), 0);
    if (const auto v = basis.find(vac)) {
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
        e(*v) = 1.0;
        rep.vacuum_ratio = ratio(e);
    }
    for (int s = 0; s < n_samples; ++s) {
        std::mt19937_64 rng(seed + s);
        std::normal_distribution<double> N;
        Eigen::VectorXcd psi(n);
        for (std::size_t i = 0; i < n; ++i) psi(i) = cplx(N(rng), N(rng));
        psi.normalize();
        const double r = ratio(psi);
        rep.max_ratio = std::max(rep.max_ratio, r);
        if (!(r <= 1.0)) rep.violating_seeds.push_back(seed + s);
    }
    rep.samples = n_samples;
    return rep;
}

void write_coo(const std::string& path, const SparseHermitianOperator& op) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_coo: cannot open " + path);
    os << "%%zdecay coo " << op.dimension() << ' ' << op.matrix.nonZeros() << '\n';
    os << std::setprecision(17);
    for (int k = 0; k < op.matrix.outerSize(); ++k)
        for (SpMat::InnerIterator it(op.matrix, k); it; ++it)
            os << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';
}

void write_operator_binary(const std::string& path, const SparseHermitianOperator& op) {
    static_assert(std::endian::native == std::endian::little, "binary export assumes a little-endian host");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_operator_binary: cannot open " + path);
    auto put = [&](auto v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    os.write("ZDSP", 4);
    put(std::uint32_t(1));
    put(std::uint64_t(op.dimension()));
    put(std::uint64_t(op.matrix.nonZeros()));
    for (int k = 0; k < op.matrix.outerSize(); ++k)
        for (SpMat::InnerIterator it(op.matrix, k); it; ++it) {
            put(std::uint64_t(it.row()));
            put(std::uint64_t(it.col()));
            put(it.value().real());
            put(it.value().imag());
        }
}

SpMat read_operator_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_operator_binary: cannot open " + path);
    auto get = [&](auto& v) {
        is.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!is) throw std::runtime_error("read_operator_binary: truncated file");
    };
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "ZDSP") throw std::runtime_error("read_operator_binary: bad magic");
    std::uint32_t version;
    std::uint64_t dim, nnz;
    get(version);
    get(dim);
    get(nnz);
    std::vector<Eigen::Triplet<cplx>> t;
    for (std::uint64_t e = 0; e < nnz; ++e) {
        std::uint64_t r, c;
        double re, im;
        get(r);
        get(c);
        get(re);
        get(im);
        t.emplace_back(int(r), int(c), cplx(re, im));
    }
    SpMat m(dim, dim);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

} // namespace zdecay
