#include "zdecay/conjugate.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>

namespace zdecay {

namespace {
const cplx I1(0.0, 1.0);
}

//==============================================================================
// One-particle matrices
//==============================================================================

Eigen::MatrixXcd build_a_matrix(const MomentumGrid& grid) {
    const int n = int(grid.size());
    const double h = grid.step;
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);
    if (grid.kind == GridKind::UniformEnergy) {
        for (int i = 0; i < n; ++i) {
            if (i + 1 < n) a(i, i + 1) = I1 / (2.0 * h);
            if (i > 0) a(i, i - 1) = -I1 / (2.0 * h);
        }
    } else {
        std::vector<double> f(n);
        for (int i = 0; i < n; ++i) f[i] = f_of_p(grid.p[i], grid.mass);
        for (int i = 0; i < n; ++i) {
            if (i + 1 < n) a(i, i + 1) = I1 * (f[i] + f[i + 1]) / (4.0 * h);
            if (i > 0) a(i, i - 1) = -I1 * (f[i] + f[i - 1]) / (4.0 * h);
        }
    }
    return a;
}

Eigen::MatrixXcd build_a_spectral(const MomentumGrid& grid) {
    if (grid.kind != GridKind::UniformEnergy)
        throw std::invalid_argument("build_a_spectral: needs a grid uniform in omega(p) - m");
    const int n = int(grid.size());
    const int L = 2 * n + 1;
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            if (j == k) continue;
            const int d = j - k;
            const double D = std::numbers::pi / (L * grid.step) * ((d % 2) ? -1.0 : 1.0) /
                             std::sin(std::numbers::pi * d / L);
            a(j, k) = I1 * D;
        }
    return a;
}

Eigen::MatrixXcd direct_sum(const Eigen::MatrixXcd& block, int n_channels) {
    const auto n = block.rows();
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n * n_channels, n * n_channels);
    for (int c = 0; c < n_channels; ++c) out.block(c * n, c * n, n, n) = block;
    return out;
}

namespace {

// Dirichlet kernel of odd length L: the band-limited interpolant of unit samples
double dirichlet(double y, int L) {
    const double s = std::sin(std::numbers::pi * y / L);
    if (std::abs(s) < 1e-14) return std::cos(std::numbers::pi * y) / std::cos(std::numbers::pi * y / L);
    return std::sin(std::numbers::pi * y) / (L * s);
}

} // namespace

Eigen::MatrixXd semigroup_w(double t, const MomentumGrid& grid) {
    if (grid.kind != GridKind::UniformEnergy)
        throw std::invalid_argument("semigroup_w: needs a grid uniform in omega(p) - m");
    if (t < 0.0) throw std::invalid_argument("semigroup_w: t must be nonnegative");
    const int n = int(grid.size());
    const double tau = t / grid.step;
    const int L = 2 * (n + int(std::ceil(tau))) + 1;
    Eigen::MatrixXd w(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) w(i, j) = dirichlet(i - j + tau, L);
    return w;
}

Eigen::MatrixXd semigroup_w_star(double t, const MomentumGrid& grid) { return semigroup_w(t, grid).transpose(); }

//==============================================================================
// Second quantization
//==============================================================================

SpMat second_quantize_one_body(const FockBasis& basis, const Eigen::MatrixXcd& h) {
    const int nf = basis.n_fermion_modes();
    if (h.rows() != nf || h.cols() != nf) throw std::invalid_argument("second_quantize_one_body: size mismatch");
    std::vector<Eigen::Triplet<cplx>> trip;
    for (std::size_t col = 0; col < basis.size(); ++col) {
        const auto& s = basis.state(col);
        for (int species = 0; species < 2; ++species) {
            const auto occ = species == 0 ? s.electrons.members() : s.positrons.members();
            for (int j : occ) {
                const auto down = species == 0 ? apply_b_plus(s, j) : apply_b_minus(s, j);
                for (int i = 0; i < nf; ++i) {
                    if (h(i, j) == 0.0) continue;
                    const auto up = species == 0 ? apply_b_plus_dagger(down->state, i)
                                                 : apply_b_minus_dagger(down->state, i);
                    if (!up) continue;
                    const auto row = basis.find(up->state);
                    if (!row) continue;
                    trip.emplace_back(int(*row), int(col), h(i, j) * double(down->sign * up->sign));
                }
            }
        }
    }
    SpMat m(basis.size(), basis.size());
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

SparseHermitianOperator second_quantize_A(const FockBasis& basis, const Eigen::MatrixXcd& a_full) {
    return SparseHermitianOperator::make(second_quantize_one_body(basis, a_full), "A");
}

namespace {

cplx minor_det(const Eigen::MatrixXcd& w, const std::vector<int>& rows, const std::vector<int>& cols) {
    const int k = int(rows.size());
    if (k == 0) return 1.0;
    if (k == 1) return w(rows[0], cols[0]);
    Eigen::MatrixXcd m(k, k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) m(a, b) = w(rows[a], cols[b]);
    return m.determinant();
}

void subsets(int n, int k, int start, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (int(cur.size()) == k) {
        out.push_back(cur);
        return;
    }
    for (int i = start; i < n; ++i) {
        cur.push_back(i);
        subsets(n, k, i + 1, cur, out);
        cur.pop_back();
    }
}

} // namespace

SpMat second_quantize_W(const FockBasis& basis, const Eigen::MatrixXcd& w) {
    const int nf = basis.n_fermion_modes();
    if (w.rows() != nf || w.cols() != nf) throw std::invalid_argument("second_quantize_W: size mismatch");
    std::map<int, std::vector<std::vector<int>>> by_size;
    auto subsets_of = [&](int k) -> const std::vector<std::vector<int>>& {
        auto it = by_size.find(k);
        if (it == by_size.end()) {
            std::vector<int> cur;
            std::vector<std::vector<int>> out;
            subsets(nf, k, 0, cur, out);
            it = by_size.emplace(k, std::move(out)).first;
        }
        return it->second;
    };
    std::vector<Eigen::Triplet<cplx>> trip;
    for (std::size_t col = 0; col < basis.size(); ++col) {
        const auto& s = basis.state(col);
        const auto E = s.electrons.members(), P = s.positrons.members();
        for (const auto& e2 : subsets_of(int(E.size()))) {
            const cplx de = minor_det(w, e2, E);
            if (de == 0.0) continue;
            for (const auto& p2 : subsets_of(int(P.size()))) {
                const cplx dp = minor_det(w, p2, P);
                if (dp == 0.0) continue;
                OccupationState t;
                t.bosons = s.bosons;
                for (int i : e2) t.electrons.set(i);
                for (int i : p2) t.positrons.set(i);
                const auto row = basis.find(t);
                if (row) trip.emplace_back(int(*row), int(col), de * dp);
            }
        }
    }
    SpMat m(basis.size(), basis.size());
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

//==============================================================================
// Commutators
//==============================================================================

SparseHermitianOperator commutator_H0(const FockBasis& basis) {
    const auto n = number_operators(basis);
    std::vector<Eigen::Triplet<cplx>> t;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const double v = n.n_plus(i) + n.n_minus(i);
        if (v != 0.0) t.emplace_back(int(i), int(i), v);
    }
    SpMat m(basis.size(), basis.size());
    m.setFromTriplets(t.begin(), t.end());
    return SparseHermitianOperator::make(std::move(m), "[H0, iA] = N+ + N-");
}

double h0_commutator_deviation(const SparseHermitianOperator& H0, const SpMat& A, const SparseHermitianOperator& N,
                               const Eigen::VectorXcd& psi) {
    const Eigen::VectorXcd c = I1 * (H0.matrix * (A * psi) - A * (H0.matrix * psi));
    return std::abs(psi.dot(c) - psi.dot(N.matrix * psi)) / psi.squaredNorm();
}

namespace {

// K -> a K + K a^T on every boson slice, i.e. a applied to both fermion legs
std::vector<cplx> apply_legs(const std::vector<cplx>& K, const Eigen::MatrixXcd& a, int nf, int nb) {
    std::vector<cplx> out(K.size());
    Eigen::MatrixXcd M(nf, nf);
    for (int k = 0; k < nb; ++k) {
        for (int i = 0; i < nf; ++i)
            for (int j = 0; j < nf; ++j) M(i, j) = K[(std::size_t(i) * nf + j) * nb + k];
        const Eigen::MatrixXcd R = a * M + M * a.transpose();
        for (int i = 0; i < nf; ++i)
            for (int j = 0; j < nf; ++j) out[(std::size_t(i) * nf + j) * nb + k] = R(i, j);
    }
    return out;
}

void require_hypothesis(const HypothesisReport* hyp) {
    if (hyp && !hyp->hyp2_pass())
        throw HypothesisError("commutator with iA needs the second kernel hypothesis; failed: " + hyp->failed_items(), *hyp);
}

} // namespace

std::vector<cplx> commuted_kernel(const KernelTensor& F, const KernelGrid& grid, CommutatorMode mode, int order) {
    if (order != 1 && order != 2) throw std::invalid_argument("commuted_kernel: order must be 1 or 2");
    const int nf = int(grid.fermions.size()), nb = int(grid.bosons.size());
    if (F.F.size() != std::size_t(nf) * nf * nb) throw std::invalid_argument("commuted_kernel: size mismatch");

    if (mode == CommutatorMode::GridConsistent) {
        const auto a = direct_sum(build_a_matrix(grid.fermions.grid), int(grid.fermions.channels.size()));
        const auto K = F.weighted(grid);
        auto L = apply_legs(K, a, nf, nb);
        if (order == 1) {
            for (auto& v : L) v *= -I1;
            return L;
        }
        auto L2 = apply_legs(L, a, nf, nb);
        for (auto& v : L2) v = -v;
        return L2;
    }

    if (!F.has_derivatives())
        throw std::invalid_argument("commuted_kernel: analytic mode needs p-derivative tables");
    const double m = grid.fermions.grid.mass;
    const auto& fm = grid.fermions.modes;
    std::vector<cplx> out(F.F.size());
    for (int i = 0; i < nf; ++i) {
        const double p1 = fm[i].p, w1 = omega(p1, m);
        const double f1 = w1 / p1, d1 = -m * m / (p1 * p1 * w1), e1 = m * m * (2.0 / (p1 * p1 * p1 * w1) + 1.0 / (p1 * w1 * w1 * w1));
        for (int j = 0; j < nf; ++j) {
            const double p2 = fm[j].p, w2 = omega(p2, m);
            const double f2 = w2 / p2, d2 = -m * m / (p2 * p2 * w2),
                         e2 = m * m * (2.0 / (p2 * p2 * p2 * w2) + 1.0 / (p2 * w2 * w2 * w2));
            for (int k = 0; k < nb; ++k) {
                const std::size_t x = F.index(i, j, k);
                const cplx F0 = F.F[x], F1 = F.F1[x], F2 = F.F2[x];
                cplx v;
                if (order == 1) {
                    v = f1 * F1 + 0.5 * d1 * F0 + f2 * F2 + 0.5 * d2 * F0;
                } else {
                    const cplx a11 = f1 * f1 * F.F11[x] + 2.0 * f1 * d1 * F1 + (0.5 * f1 * e1 + 0.25 * d1 * d1) * F0;
                    const cplx a22 = f2 * f2 * F.F22[x] + 2.0 * f2 * d2 * F2 + (0.5 * f2 * e2 + 0.25 * d2 * d2) * F0;
                    const cplx a12 = f1 * f2 * F.F12[x] + 0.5 * f1 * d2 * F1 + 0.5 * d1 * f2 * F2 + 0.25 * d1 * d2 * F0;
                    v = a11 + a22 + 2.0 * a12;
                }
                out[x] = std::sqrt(fm[i].w * fm[j].w * grid.bosons.modes[k].w) * v;
            }
        }
    }
    return out;
}

SparseHermitianOperator commutator_HI(const FockBasis& basis, const KernelGrid& grid, const KernelTensor& F1,
                                      const KernelTensor& F2, CommutatorMode mode, const HypothesisReport* hyp) {
    require_hypothesis(hyp);
    const SpMat T = pair_creation_part(basis, commuted_kernel(F1, grid, mode, 1), commuted_kernel(F2, grid, mode, 1));
    return SparseHermitianOperator::make(SpMat(T + SpMat(T.adjoint())), "[H_I, iA]");
}

SparseHermitianOperator second_commutator_HI(const FockBasis& basis, const KernelGrid& grid, const KernelTensor& F1,
                                             const KernelTensor& F2, CommutatorMode mode,
                                             const HypothesisReport* hyp) {
    require_hypothesis(hyp);
    const SpMat T = pair_creation_part(basis, commuted_kernel(F1, grid, mode, 2), commuted_kernel(F2, grid, mode, 2));
    return SparseHermitianOperator::make(SpMat(T + SpMat(T.adjoint())), "[[H_I, iA], iA]");
}

//==============================================================================
// C^{1,1} diagnostic
//==============================================================================

int LowRankSlices::max_rank() const {
    int r = 0;
    for (const auto& u : U) r = std::max(r, int(u.cols()));
    return r;
}

LowRankSlices factorize_pair_kernel(const std::vector<cplx>& K, int nf, int nb, double tol) {
    if (K.size() != std::size_t(nf) * nf * nb) throw std::invalid_argument("factorize_pair_kernel: size mismatch");
    double kmax = 0.0;
    for (const auto& v : K) kmax = std::max(kmax, std::abs(v));
    LowRankSlices out;
    out.n = nf;
    Eigen::MatrixXcd R(nf, nf);
    for (int k = 0; k < nb; ++k) {
        for (int i = 0; i < nf; ++i)
            for (int j = 0; j < nf; ++j) R(i, j) = K[(std::size_t(i) * nf + j) * nb + k];
        std::vector<Eigen::VectorXcd> us, vs;
        while (int(us.size()) < nf) {
            Eigen::Index i, j;
            const double piv = R.cwiseAbs().maxCoeff(&i, &j);
            if (piv <= tol * kmax || piv == 0.0) break;
            const Eigen::VectorXcd u = R.col(j);
            const Eigen::VectorXcd v = R.row(i).transpose() / R(i, j);
            R.noalias() -= u * v.transpose();
            us.push_back(u);
            vs.push_back(v);
        }
        Eigen::MatrixXcd U(nf, us.size()), V(nf, vs.size());
        for (std::size_t r = 0; r < us.size(); ++r) {
            U.col(r) = us[r];
            V.col(r) = vs[r];
        }
        out.U.push_back(std::move(U));
        out.V.push_back(std::move(V));
    }
    return out;
}

namespace {

// Gram matrix <X_k, X_l>_F of X_k = (V - 1)^2 (U_k V_k^T), V = w (x) w
Eigen::MatrixXcd block_gram(const Eigen::MatrixXd& w, const LowRankSlices& s) {
    const std::size_t nb = s.U.size();
    std::vector<Eigen::MatrixXcd> A(nb), B(nb);
    for (std::size_t k = 0; k < nb; ++k) {
        const auto& U = s.U[k];
        const auto& V = s.V[k];
        const Eigen::MatrixXcd wU = w * U, wV = w * V;
        const Eigen::MatrixXcd w2U = w * wU, w2V = w * wV;
        const auto r = U.cols();
        A[k].resize(U.rows(), 3 * r);
        B[k].resize(V.rows(), 3 * r);
        A[k] << w2U, -2.0 * wU, U;
        B[k] << w2V, wV, V;
    }
    Eigen::MatrixXcd G(nb, nb);
    for (std::size_t k = 0; k < nb; ++k)
        for (std::size_t l = k; l < nb; ++l) {
            const Eigen::MatrixXcd a = A[k].adjoint() * A[l];
            const Eigen::MatrixXcd b = B[k].adjoint() * B[l];
            G(k, l) = a.cwiseProduct(b).sum();
            G(l, k) = std::conj(G(k, l));
        }
    return G;
}

double op_norm_from_gram(const Eigen::MatrixXcd& G) {
    if (G.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

} // namespace

double c11_norm(double t, const MomentumGrid& grid, const LowRankSlices& k1, const LowRankSlices& k2) {
    if (k1.n != int(grid.size()) || k2.n != int(grid.size()))
        throw std::invalid_argument("c11_norm: slices must live on the single-channel grid");
    const Eigen::MatrixXd w = semigroup_w(t, grid);
    const Eigen::MatrixXd ws = w.transpose();
    double best = 0.0;
    for (const Eigen::MatrixXd* m : {&w, &ws}) {
        best = std::max(best, op_norm_from_gram(block_gram(*m, k1)));
        if (!k2.U.empty()) best = std::max(best, std::sqrt(std::max(0.0, block_gram(*m, k2).trace().real())));
    }
    return best;
}

double C11Curve::partial_at(double tq) const {
    for (std::size_t i = 0; i < t.size(); ++i)
        if (std::abs(t[i] - tq) <= 1e-12 * tq) return partial[i];
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t[i - 1] <= tq && tq <= t[i]) {
            const double s = (std::log(tq) - std::log(t[i - 1])) / (std::log(t[i]) - std::log(t[i - 1]));
            return (1.0 - s) * partial[i - 1] + s * partial[i];
        }
    throw std::out_of_range("C11Curve::partial_at: t outside the curve");
}

C11Report c11_diagnostic(const MomentumGrid& grid, const LowRankSlices& k1, const LowRankSlices& k2,
                         const C11Options& opt) {
    if (!(opt.t_min > 0.0 && opt.t_min <= 1e-2)) throw std::invalid_argument("c11_diagnostic: t_min must be in (0, 1e-2]");
    std::map<double, double> cache;
    auto curve = [&](int N) {
        C11Curve c;
        for (int j = 0; j < N; ++j) {
            const double t = std::pow(opt.t_min, 1.0 - double(j) / (N - 1));
            auto it = cache.find(t);
            if (it == cache.end()) it = cache.emplace(t, c11_norm(t, grid, k1, k2)).first;
            c.t.push_back(t);
            c.norm.push_back(it->second);
        }
        // int_t^1 norm(s) / s^2 ds = int norm / s d(ln s), trapezoid
        c.partial.assign(N, 0.0);
        for (int j = N - 2; j >= 0; --j) {
            const double du = std::log(c.t[j + 1]) - std::log(c.t[j]);
            c.partial[j] = c.partial[j + 1] + 0.5 * du * (c.norm[j] / c.t[j] + c.norm[j + 1] / c.t[j + 1]);
        }
        return c;
    };
    C11Report rep;
    rep.coarse = curve(opt.n_points);
    rep.refined = curve(2 * opt.n_points - 1);
    const auto& r = rep.refined;
    const double i0 = r.partial_at(opt.t_min), i1 = r.partial_at(10 * opt.t_min), i2 = r.partial_at(100 * opt.t_min);
    const double last = i0 - i1, prev = i1 - i2;
    rep.decade_ratio = prev > 0.0 ? last / prev : (last > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    rep.refinement_change = i0 > 0.0 ? std::abs(i0 - rep.coarse.partial_at(opt.t_min)) / i0 : 0.0;
    return rep;
}

void C11Report::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("C11Report::write_csv: cannot open " + path);
    os << "t,norm,partial_integral\n" << std::setprecision(12);
    for (std::size_t i = 0; i < refined.t.size(); ++i)
        os << refined.t[i] << ',' << refined.norm[i] << ',' << refined.partial[i] << '\n';
}

double double_commutator_norm(const Eigen::MatrixXcd& W, const Eigen::MatrixXcd& H) {
    const Eigen::MatrixXcd c1 = W * H - H * W;
    const Eigen::MatrixXcd c2 = W * c1 - c1 * W;
    if (c2.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(c2.adjoint() * c2, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

//==============================================================================
// Form domain
//==============================================================================

FormDomainReport form_domain_check(const FockBasis& basis, const SparseHermitianOperator& H0,
                                   const FermionModeTable& fermions, const std::vector<double>& ts) {
    const int nf = basis.n_fermion_modes();
    if (int(fermions.size()) != nf) throw std::invalid_argument("form_domain_check: mode count mismatch");
    Eigen::VectorXd d(basis.size());
    for (std::size_t i = 0; i < basis.size(); ++i) d(i) = H0.matrix.coeff(i, i).real();
    if (max_abs_entry(H0.matrix) > 0.0 && std::size_t(H0.matrix.nonZeros()) > basis.size())
        throw std::invalid_argument("form_domain_check: H0 must be diagonal");

    // group states by (N+, N-, boson configuration)
    std::map<std::pair<std::pair<int, int>, std::vector<std::uint8_t>>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const auto& s = basis.state(i);
        groups[{{s.n_electrons(), s.n_positrons()}, s.bosons}].push_back(i);
    }

    FormDomainReport rep;
    const int nch = int(fermions.channels.size());
    for (double t : ts)
        for (bool adj : {false, true}) {
            const Eigen::MatrixXd w1 = adj ? semigroup_w_star(t, fermions.grid) : semigroup_w(t, fermions.grid);
            const Eigen::MatrixXcd w = direct_sum(w1.cast<cplx>(), nch);
            FormDomainRow row{t, adj, 0.0, 0};
            std::map<std::tuple<int, int, long long>, double> cache;
            for (const auto& [key, idx] : groups) {
                const auto& s0 = basis.state(idx.front());
                double eb = d(idx.front());
                for (int i : s0.electrons.members()) eb -= omega(fermions.modes[i].p, fermions.grid.mass);
                for (int i : s0.positrons.members()) eb -= omega(fermions.modes[i].p, fermions.grid.mass);
                const auto ck = std::tuple{key.first.first, key.first.second, std::llround(eb * 1e9)};
                auto it = cache.find(ck);
                if (it == cache.end()) {
                    const std::size_t g = idx.size();
                    Eigen::MatrixXcd M(g, g);
                    for (std::size_t b = 0; b < g; ++b) {
                        const auto& sb = basis.state(idx[b]);
                        const auto Eb = sb.electrons.members(), Pb = sb.positrons.members();
                        for (std::size_t a = 0; a < g; ++a) {
                            const auto& sa = basis.state(idx[a]);
                            const cplx amp =
                                minor_det(w, sa.electrons.members(), Eb) * minor_det(w, sa.positrons.members(), Pb);
                            M(a, b) = std::sqrt(d(idx[a])) * amp / (std::sqrt(d(idx[b])) + 1.0);
                        }
                    }
                    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M.adjoint() * M, Eigen::EigenvaluesOnly);
                    it = cache.emplace(ck, std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()))).first;
                }
                if (it->second > row.norm) {
                    row.norm = it->second;
                    row.worst_state = idx.front();
                }
            }
            rep.max_norm = std::max(rep.max_norm, row.norm);
            rep.rows.push_back(row);
        }
    return rep;
}

} // namespace zdecay
