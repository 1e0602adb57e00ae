#include "zdecay/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace zdecay {

namespace {

const cplx I1(0.0, 1.0);

Eigen::VectorXcd random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    Eigen::VectorXcd v(n);
    for (std::size_t i = 0; i < n; ++i) v(i) = cplx(N(rng), N(rng));
    return v;
}

// Removes the components along the orthonormal columns of Q, twice.
void orthogonalize(Eigen::VectorXcd& w, const Eigen::MatrixXcd& Q) {
    if (Q.cols() == 0) return;
    for (int pass = 0; pass < 2; ++pass) w.noalias() -= Q * (Q.adjoint() * w);
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

struct RitzRun {
    std::vector<double> values;
    std::vector<Eigen::VectorXcd> vectors;
    std::vector<double> residuals;
    double norm_estimate = 0.0;
    bool converged = false;
};

// One Lanczos run from a random start, deflated against the columns of X.
RitzRun lanczos_run(const SpMat& H, int count, const LanczosOptions& opt, const Eigen::MatrixXcd& X,
                    std::uint64_t seed) {
    const std::size_t n = std::size_t(H.rows());
    const int m_max = int(std::min<std::size_t>(std::size_t(opt.max_iter), n - std::size_t(X.cols())));
    RitzRun out;
    if (m_max <= 0) {
        out.converged = true;
        return out;
    }
    Eigen::MatrixXcd V(n, m_max);
    std::vector<double> alpha, beta;
    Eigen::VectorXcd v = random_vector(n, seed);
    orthogonalize(v, X);
    v.normalize();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    int m = 0;
    for (int j = 0; j < m_max; ++j) {
        V.col(j) = v;
        m = j + 1;
        Eigen::VectorXcd w = H * v;
        const double a = v.dot(w).real();
        alpha.push_back(a);
        w -= a * v;
        if (j > 0) w -= beta.back() * V.col(j - 1);
        orthogonalize(w, V.leftCols(m));
        orthogonalize(w, X);
        const double b = w.norm();
        const bool exhausted = b < 1e-13 * std::max(1.0, std::abs(a));
        if (j % 5 == 4 || exhausted || m == m_max) {
            Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
            for (int i = 0; i < m; ++i) {
                T(i, i) = alpha[i];
                if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
            }
            es.compute(T);
            const auto& th = es.eigenvalues();
            out.norm_estimate = std::max(std::abs(th(0)), std::abs(th(m - 1)));
            const int want = std::min(count, m);
            bool ok = true;
            for (int i = 0; i < want; ++i)
                if (std::abs(b * es.eigenvectors()(m - 1, i)) > 0.1 * opt.tol * out.norm_estimate) ok = false;
            if (ok || exhausted) {
                out.converged = ok || exhausted;
                break;
            }
        }
        beta.push_back(b);
        v = w / b;
    }
    const auto& th = es.eigenvalues();
    const int want = std::min<int>(count, int(th.size()));
    for (int i = 0; i < want; ++i) {
        Eigen::VectorXcd x = V.leftCols(m) * es.eigenvectors().col(i).cast<cplx>();
        x.normalize();
        const double r = (H * x - th(i) * x).norm();
        if (r > opt.tol * out.norm_estimate) {
            out.converged = false;
            continue;
        }
        out.values.push_back(th(i));
        out.vectors.push_back(std::move(x));
        out.residuals.push_back(r);
    }
    return out;
}

EigenPairs sorted_pairs(std::vector<double> values, std::vector<Eigen::VectorXcd> vectors, std::vector<double> res,
                        std::size_t n, std::size_t keep) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    keep = std::min(keep, idx.size());
    EigenPairs p;
    p.values.resize(keep);
    p.vectors.resize(n, keep);
    for (std::size_t i = 0; i < keep; ++i) {
        p.values(i) = values[idx[i]];
        p.vectors.col(i) = vectors[idx[i]];
        p.residuals.push_back(res[idx[i]]);
    }
    return p;
}

// Real symmetric solver when the imaginary part vanishes.
void hermitian_eig(const Eigen::MatrixXcd& M, Eigen::VectorXd& values, Eigen::MatrixXcd& vectors) {
    if (M.imag().cwiseAbs().maxCoeff() == 0.0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M.real());
        values = es.eigenvalues();
        vectors = es.eigenvectors().cast<cplx>();
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
        values = es.eigenvalues();
        vectors = es.eigenvectors();
    }
}

} // namespace

double EigenPairs::max_residual() const {
    return residuals.empty() ? 0.0 : *std::max_element(residuals.begin(), residuals.end());
}

bool SpectralReport::residuals_ok() const {
    for (double r : pairs.residuals)
        if (r > 1e-9 * std::max(pairs.norm_estimate, 1e-300)) return false;
    return true;
}

EigenPairs lanczos_lowest(const SpMat& H, int count, const LanczosOptions& opt, const Eigen::MatrixXcd* locked) {
    const std::size_t n = std::size_t(H.rows());
    std::vector<double> values, res;
    std::vector<Eigen::VectorXcd> vecs;
    double norm_est = 0.0;
    bool converged = true;
    for (int round = 0; round < 64; ++round) {
        const std::size_t nl = locked ? std::size_t(locked->cols()) : 0;
        Eigen::MatrixXcd X(n, nl + vecs.size());
        if (nl) X.leftCols(nl) = *locked;
        for (std::size_t i = 0; i < vecs.size(); ++i) X.col(nl + i) = vecs[i];
        if (std::size_t(X.cols()) >= n) break;
        auto run = lanczos_run(H, count, opt, X, opt.seed + std::uint64_t(round));
        norm_est = std::max(norm_est, run.norm_estimate);
        if (run.values.empty()) {
            converged = converged && run.converged;
            break;
        }
        // the count-th lowest value found so far
        std::vector<double> s = values;
        std::sort(s.begin(), s.end());
        const double bar = int(s.size()) >= count ? s[count - 1] : std::numeric_limits<double>::infinity();
        bool contributed = false;
        for (std::size_t i = 0; i < run.values.size(); ++i) {
            if (run.values[i] <= bar + opt.cluster_tol) contributed = true;
            values.push_back(run.values[i]);
            vecs.push_back(std::move(run.vectors[i]));
            res.push_back(run.residuals[i]);
        }
        if (!run.converged && int(run.values.size()) < count) converged = false;
        if (!contributed) break;
    }
    auto p = sorted_pairs(values, vecs, res, n, std::size_t(count));
    p.norm_estimate = norm_est;
    p.converged = converged && int(p.size()) == std::min<int>(count, int(n));
    return p;
}

EigenPairs dense_eigenpairs(const SpMat& H) {
    const Eigen::MatrixXcd D(H);
    EigenPairs p;
    hermitian_eig(D, p.values, p.vectors);
    const Eigen::MatrixXcd R = D * p.vectors - p.vectors * p.values.cast<cplx>().asDiagonal();
    for (Eigen::Index i = 0; i < R.cols(); ++i) p.residuals.push_back(R.col(i).norm());
    if (p.values.size()) p.norm_estimate = std::max(std::abs(p.values(0)), std::abs(p.values(p.values.size() - 1)));
    return p;
}

SpectralReport eigs_lowest(const SparseHermitianOperator& H, int count, const LanczosOptions& opt,
                           const FockBasis* basis) {
    if (!H.hermitian) throw std::invalid_argument("eigs_lowest: operator is not flagged Hermitian");
    if (count < 1) throw std::invalid_argument("eigs_lowest: count must be positive");
    SpectralReport rep;
    if (H.dimension() <= opt.dense_limit) {
        auto all = dense_eigenpairs(H.matrix);
        const auto k = std::min<Eigen::Index>(count, all.values.size());
        rep.pairs.values = all.values.head(k);
        rep.pairs.vectors = all.vectors.leftCols(k);
        rep.pairs.residuals.assign(all.residuals.begin(), all.residuals.begin() + k);
        rep.pairs.norm_estimate = all.norm_estimate;
    } else {
        rep.pairs = lanczos_lowest(H.matrix, count, opt);
    }
    const auto& v = rep.pairs.values;
    if (v.size() == 0) return rep;
    rep.E = v(0);
    rep.degeneracy = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v(i) - rep.E <= opt.cluster_tol) ++rep.degeneracy;
    rep.gap = rep.degeneracy < v.size() ? v(rep.degeneracy) - rep.E : std::numeric_limits<double>::quiet_NaN();
    if (basis) {
        const auto n = number_operators(*basis);
        rep.ground_charge = (rep.pairs.vectors.col(0).cwiseAbs2().transpose() * n.charge)(0);
    }
    return rep;
}

std::vector<std::vector<std::size_t>> components(const SpMat& H) {
    const std::size_t n = std::size_t(H.rows());
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int k = 0; k < H.outerSize(); ++k)
        for (SpMat::InnerIterator it(H, k); it; ++it) {
            const auto a = find(std::size_t(it.row())), b = find(std::size_t(it.col()));
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    std::vector<std::vector<std::size_t>> out;
    std::vector<long> slot(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = find(i);
        if (slot[r] < 0) {
            slot[r] = long(out.size());
            out.emplace_back();
        }
        out[std::size_t(slot[r])].push_back(i);
    }
    return out;
}

EigenPairs eigenpairs_below(const SparseHermitianOperator& H, double ceiling, const LanczosOptions& opt) {
    const std::size_t n = H.dimension();
    std::vector<double> values, res;
    std::vector<Eigen::VectorXcd> vecs;
    double norm_est = 0.0;
    bool converged = true;
    for (const auto& comp : components(H.matrix)) {
        std::vector<long> local(n, -1);
        for (std::size_t i = 0; i < comp.size(); ++i) local[comp[i]] = long(i);
        std::vector<Eigen::Triplet<cplx>> t;
        for (std::size_t i = 0; i < comp.size(); ++i)
            for (SpMat::InnerIterator it(H.matrix, Eigen::Index(comp[i])); it; ++it)
                t.emplace_back(int(i), int(local[std::size_t(it.col())]), it.value());
        SpMat sub(comp.size(), comp.size());
        sub.setFromTriplets(t.begin(), t.end());

        EigenPairs p;
        if (comp.size() <= opt.dense_limit) {
            p = dense_eigenpairs(sub);
        } else {
            for (int k = 4;; k *= 2) {
                p = lanczos_lowest(sub, k, opt);
                if (int(p.size()) < k || p.values(p.size() - 1) > ceiling) break;
                if (k >= 256) {
                    converged = false;
                    break;
                }
            }
            converged = converged && p.converged;
        }
        norm_est = std::max(norm_est, p.norm_estimate);
        for (Eigen::Index i = 0; i < p.values.size(); ++i) {
            if (p.values(i) > ceiling) continue;
            Eigen::VectorXcd full = Eigen::VectorXcd::Zero(n);
            for (std::size_t r = 0; r < comp.size(); ++r) full(comp[r]) = p.vectors(r, i);
            values.push_back(p.values(i));
            vecs.push_back(std::move(full));
            res.push_back(p.residuals[i]);
        }
    }
    auto out = sorted_pairs(values, vecs, res, n, values.size());
    out.norm_estimate = norm_est;
    out.converged = converged;
    return out;
}

double hermitian_norm(const SpMat& M, std::uint64_t seed) {
    const std::size_t n = std::size_t(M.rows());
    if (n == 0) return 0.0;
    const int m_max = int(std::min<std::size_t>(n, 120));
    Eigen::MatrixXcd V(n, m_max);
    std::vector<double> alpha, beta;
    Eigen::VectorXcd v = random_vector(n, seed).normalized();
    int m = 0;
    for (int j = 0; j < m_max; ++j) {
        V.col(j) = v;
        m = j + 1;
        Eigen::VectorXcd w = M * v;
        const double a = v.dot(w).real();
        alpha.push_back(a);
        orthogonalize(w, V.leftCols(m));
        const double b = w.norm();
        if (b < 1e-13 * std::max(1.0, std::abs(a))) break;
        beta.push_back(b);
        v = w / b;
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
    return std::max(std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(m - 1)));
}

//==============================================================================
// Ground state
//==============================================================================

double first_excited_free_level(const SparseHermitianOperator& H0) {
    double e = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < H0.dimension(); ++i) {
        const double d = H0.matrix.coeff(Eigen::Index(i), Eigen::Index(i)).real();
        if (d > 1e-12) e = std::min(e, d);
    }
    return e;
}

std::vector<GroundStateRow> ground_state_report(const SparseHermitianOperator& H0, const SparseHermitianOperator& HI,
                                                const Constants& c, const std::vector<double>& gs,
                                                const LanczosOptions& opt) {
    std::vector<GroundStateRow> rows;
    for (double g : gs) {
        if (std::abs(g) > c.g0_max) throw std::invalid_argument("ground_state_report: |g| exceeds g0_max");
        const auto H = assemble_H(H0, HI, g);
        const auto rep = eigs_lowest(H, 4, opt);
        GroundStateRow r;
        r.g = g;
        r.E = rep.E;
        r.gap = rep.gap;
        r.degeneracy = rep.degeneracy;
        r.residual = rep.pairs.max_residual();
        const double den = 1.0 - std::abs(g) * c.K * c.C_be;
        r.envelope = den > 0.0 ? std::abs(g) * c.K * c.B_be / den : std::numeric_limits<double>::infinity();
        rows.push_back(r);
    }
    return rows;
}

//==============================================================================
// Mourre and virial
//==============================================================================

MourreReport mourre_window_check(const EigenPairs& eig, const SparseHermitianOperator& M, double E, double delta,
                                 double m_Z, double cluster_tol) {
    MourreReport rep;
    rep.delta = delta;
    rep.lo = delta;
    rep.hi = m_Z - delta;
    std::vector<Eigen::Index> win;
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        const double x = eig.values(i) - E;
        if (x >= rep.lo - cluster_tol && x <= rep.hi + cluster_tol) win.push_back(i);
    }
    rep.n_window = win.size();
    if (win.empty()) {
        rep.vacuous = true;
        rep.warning = "empty spectral window";
        return rep;
    }
    Eigen::MatrixXcd Vw(eig.vectors.rows(), Eigen::Index(win.size()));
    for (std::size_t k = 0; k < win.size(); ++k) Vw.col(Eigen::Index(k)) = eig.vectors.col(win[k]);
    Eigen::MatrixXcd C = Vw.adjoint() * (M.matrix * Vw);
    C = 0.5 * (C + C.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(C, Eigen::EigenvaluesOnly);
    rep.c_delta = es.eigenvalues()(0);
    return rep;
}

std::vector<VirialRow> virial_check(const EigenPairs& eig, const SparseHermitianOperator& M, double norm_M,
                                    std::size_t count) {
    std::vector<VirialRow> rows;
    for (std::size_t i = 0; i < std::min(count, eig.size()); ++i) {
        const Eigen::VectorXcd v = eig.vectors.col(Eigen::Index(i));
        VirialRow r;
        r.eigenvalue = eig.values(Eigen::Index(i));
        r.expectation = std::abs(v.dot(M.matrix * v));
        r.residual = eig.residuals[i];
        r.tolerance = std::max(1e-8, 10.0 * r.residual * norm_M);
        rows.push_back(r);
    }
    return rows;
}

SparseHermitianOperator exact_commutator(const SparseHermitianOperator& H, const SpMat& A) {
    const SpMat HA = H.matrix * A, AH = A * H.matrix;
    return SparseHermitianOperator::make(SpMat(I1 * (HA - AH)), "i[H, A]");
}

//==============================================================================
// Resolvent and local decay
//==============================================================================

WeightedSpectrum WeightedSpectrum::build(const Eigen::MatrixXcd& H, const Eigen::MatrixXcd& A, double s) {
    if (H.rows() != A.rows()) throw std::invalid_argument("WeightedSpectrum: size mismatch");
    WeightedSpectrum ws;
    ws.s = s;
    hermitian_eig(H, ws.values, ws.vectors);
    Eigen::VectorXd mu;
    Eigen::MatrixXcd U;
    hermitian_eig(A.adjoint() * A, mu, U);
    const Eigen::VectorXd f = (1.0 + mu.cwiseMax(0.0).array()).pow(-0.5 * s).matrix();
    ws.weight = U * f.cast<cplx>().asDiagonal() * U.adjoint();
    ws.B = ws.weight * ws.vectors;
    return ws;
}

Eigen::MatrixXcd dense_block(const SpMat& M, const std::vector<std::size_t>& idx) {
    std::vector<long> local(std::size_t(M.rows()), -1);
    for (std::size_t i = 0; i < idx.size(); ++i) local[idx[i]] = long(i);
    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(Eigen::Index(idx.size()), Eigen::Index(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (SpMat::InnerIterator it(M, Eigen::Index(idx[i])); it; ++it)
            if (const long c = local[std::size_t(it.col())]; c >= 0) D(Eigen::Index(i), c) = it.value();
    return D;
}

double weighted_norm(const Eigen::MatrixXcd& B, const Eigen::VectorXcd& d, std::uint64_t seed, int iters) {
    // Lanczos on X^dagger X with X = B diag(d) B^dagger
    const auto n = B.rows();
    if (n == 0 || d.size() == 0 || d.cwiseAbs().maxCoeff() == 0.0) return 0.0;
    const Eigen::MatrixXcd Bh = B.adjoint();
    auto apply = [&](const Eigen::VectorXcd& x) {
        const Eigen::VectorXcd y = B * (d.asDiagonal() * (Bh * x));
        return Eigen::VectorXcd(B * (d.conjugate().asDiagonal() * (Bh * y)));
    };
    const int m_max = int(std::min<Eigen::Index>(n, std::min(iters, 60)));
    Eigen::MatrixXcd V(n, m_max);
    std::vector<double> alpha, beta;
    Eigen::VectorXcd v = random_vector(std::size_t(n), seed).normalized();
    int m = 0;
    double prev = 0.0, est = 0.0;
    for (int j = 0; j < m_max; ++j) {
        V.col(j) = v;
        m = j + 1;
        Eigen::VectorXcd w = apply(v);
        const double a = v.dot(w).real();
        alpha.push_back(a);
        orthogonalize(w, V.leftCols(m));
        const double b = w.norm();
        if (j % 4 == 3 || b < 1e-14 * std::abs(a)) {
            Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
            for (int i = 0; i < m; ++i) {
                T(i, i) = alpha[i];
                if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
            est = es.eigenvalues()(m - 1);
            if (std::abs(est - prev) <= 1e-12 * est || b < 1e-14 * std::abs(a)) break;
            prev = est;
        }
        beta.push_back(b);
        v = w / b;
    }
    if (est == 0.0) est = alpha.back();
    return std::sqrt(std::max(0.0, est));
}

LapReport lap_probe(const WeightedSpectrum& ws, const std::vector<double>& lambdas, const std::vector<double>& eps,
                    double cluster_tol, std::uint64_t seed) {
    LapReport rep;
    const auto& ev = ws.values;
    for (double lam : lambdas) {
        LapCurve c;
        c.lambda = lam;
        // nearest distinct levels around lambda; levels closer than cluster_tol count once
        double below = -std::numeric_limits<double>::infinity(), above = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < ev.size(); ++k) {
            if (ev(k) <= lam + cluster_tol) below = std::max(below, ev(k));
        }
        for (Eigen::Index k = 0; k < ev.size(); ++k)
            if (ev(k) > below + cluster_tol) above = std::min(above, ev(k));
        c.floor = 10.0 * (above - below);
        std::vector<double> lx, ly, lu;
        for (double e : eps) {
            const cplx z(lam, e);
            Eigen::VectorXcd d(ev.size());
            double un = 0.0;
            for (Eigen::Index k = 0; k < ev.size(); ++k) {
                d(k) = 1.0 / (ev(k) - z);
                un = std::max(un, std::abs(d(k)));
            }
            const double wn = weighted_norm(ws.B, d, seed);
            c.eps.push_back(e);
            c.weighted.push_back(wn);
            c.unweighted.push_back(un);
            if (wn > un * (1.0 + 1e-9)) rep.bounded_by_unweighted = false;
            if (e >= c.floor) {
                lx.push_back(std::log(e));
                ly.push_back(std::log(wn));
                lu.push_back(std::log(un));
            }
        }
        c.fit_points = int(lx.size());
        if (c.fit_points >= 2) {
            c.exponent = -slope(lx, ly);
            c.unweighted_exponent = -slope(lx, lu);
        } else {
            c.exponent = std::numeric_limits<double>::quiet_NaN();
            c.unweighted_exponent = std::numeric_limits<double>::quiet_NaN();
        }
        rep.max_exponent = std::max(rep.max_exponent, c.exponent);
        rep.curves.push_back(std::move(c));
    }
    return rep;
}

DecayCurve local_decay_probe(const WeightedSpectrum& ws, double E, double lo, double hi, const std::vector<double>& t,
                             double t_fit_min, double cluster_tol, std::uint64_t seed) {
    DecayCurve c;
    std::vector<Eigen::Index> win;
    for (Eigen::Index k = 0; k < ws.values.size(); ++k) {
        const double x = ws.values(k) - E;
        if (x >= lo - cluster_tol && x <= hi + cluster_tol) win.push_back(k);
    }
    c.n_window = win.size();
    Eigen::MatrixXcd Bw(ws.B.rows(), Eigen::Index(win.size()));
    std::vector<double> levels;
    for (std::size_t i = 0; i < win.size(); ++i) {
        Bw.col(Eigen::Index(i)) = ws.B.col(win[i]);
        levels.push_back(ws.values(win[i]));
    }
    std::sort(levels.begin(), levels.end());
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (levels[i] - levels[i - 1] > cluster_tol) min_gap = std::min(min_gap, levels[i] - levels[i - 1]);
    c.t_rec = 2.0 * std::numbers::pi / min_gap;

    std::vector<double> lx, ly;
    for (double tt : t) {
        double nrm = 0.0;
        if (!win.empty()) {
            Eigen::VectorXcd d(Eigen::Index(win.size()));
            for (std::size_t i = 0; i < win.size(); ++i) d(Eigen::Index(i)) = std::exp(-I1 * tt * ws.values(win[i]));
            nrm = weighted_norm(Bw, d, seed);
        }
        c.t.push_back(tt);
        c.norm.push_back(nrm);
        if (tt >= t_fit_min && tt < c.t_rec && nrm > 0.0) {
            lx.push_back(std::log(tt));
            ly.push_back(std::log(nrm));
        }
    }
    c.fit_points = int(lx.size());
    c.exponent = c.fit_points >= 2 ? slope(lx, ly) : std::numeric_limits<double>::quiet_NaN();
    return c;
}

} // namespace zdecay
