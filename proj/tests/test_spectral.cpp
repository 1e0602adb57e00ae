#include "doctest.h"
#include "zdecay/conjugate.hpp"
#include "zdecay/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <random>

using namespace zdecay;

namespace {

SparseHermitianOperator from_dense(const Eigen::MatrixXcd& D) {
    SpMat m = D.sparseView();
    return SparseHermitianOperator::make(m, "test");
}

Eigen::MatrixXcd random_hermitian(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    Eigen::MatrixXcd X(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) X(i, j) = cplx(N(rng), N(rng));
    return 0.5 * (X + X.adjoint());
}

Eigen::MatrixXcd random_unitary(int n, std::uint64_t seed) {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(random_hermitian(n, seed) + Eigen::MatrixXcd::Identity(n, n) * 0.1);
    return qr.householderQ() * Eigen::MatrixXcd::Identity(n, n);
}

struct Toy {
    KernelGrid grid;
    FockBasis basis;
    KernelTensor F1, F2;
    SparseHermitianOperator H0, HI;
    Constants c;
};

Toy toy() {
    Toy t{{FermionModeTable(MomentumGrid::uniform_energy(3, 2.0, 1.0), 1), BosonModeSet::toy(2, 1, 5.0), 1.0},
          {}, {}, {}, {}, {}, {}};
    t.basis = FockBasis(int(t.grid.fermions.size()), 2, {1, 1, 1}, 1, 0);
    t.F1 = model_kernel(1, t.grid, SFamily::oscillatory(), GFamily::smooth_bump(2.5, 3.0));
    t.F2 = model_kernel(2, t.grid, SFamily::oscillatory(), GFamily::smooth_bump(2.5, 3.0));
    t.H0 = assemble_H0(t.basis, t.grid.fermions, t.grid.bosons);
    t.HI = assemble_HI(t.basis, t.grid, t.F1, t.F2);
    t.c = constants(t.F1, t.F2, t.grid, a_weights(t.grid.fermions, LocalizationFn::bump(), 1.0),
                    fit_polarization_constant(5.0).c_mz, 1.0, 1.0);
    return t;
}

} // namespace

TEST_CASE("Lanczos on a diagonal matrix returns the diagonal entries") {
    Eigen::VectorXd d(300);
    for (int i = 0; i < 300; ++i) d(i) = 0.5 + 0.01 * ((i * 37) % 300);
    const auto H = from_dense(d.cast<cplx>().asDiagonal().toDenseMatrix());
    LanczosOptions opt;
    opt.dense_limit = 0;
    const auto rep = eigs_lowest(H, 4, opt);
    REQUIRE(rep.pairs.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(rep.pairs.values(i) == doctest::Approx(0.5 + 0.01 * i).epsilon(1e-12));
    CHECK(rep.residuals_ok());
    CHECK(rep.degeneracy == 1);
    CHECK(rep.gap == doctest::Approx(0.01));
}

TEST_CASE("Lanczos agrees with the dense solver on a random Hermitian matrix") {
    const auto D = random_hermitian(500, 3);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(D, Eigen::EigenvaluesOnly);
    LanczosOptions opt;
    opt.dense_limit = 0;
    const auto rep = eigs_lowest(from_dense(D), 5, opt);
    REQUIRE(rep.pairs.converged);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(rep.pairs.values(i) - es.eigenvalues()(i)) <= 1e-9);
    for (int i = 1; i < 5; ++i) CHECK(rep.pairs.values(i - 1) <= rep.pairs.values(i));
    CHECK(rep.residuals_ok());
    CHECK(hermitian_norm(SpMat(D.sparseView())) ==
          doctest::Approx(std::max(-es.eigenvalues()(0), es.eigenvalues()(499))).epsilon(1e-8));
}

TEST_CASE("deflated restarts recover degenerate copies") {
    const int n = 250;
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d(i) = 1.0 + 0.02 * i;
    d(1) = d(2) = d(0); // triple ground level
    const auto U = random_unitary(n, 5);
    const Eigen::MatrixXcd D = U * d.cast<cplx>().asDiagonal() * U.adjoint();
    LanczosOptions opt;
    opt.dense_limit = 0;
    const auto rep = eigs_lowest(from_dense(0.5 * (D + D.adjoint())), 5, opt);
    CHECK(rep.degeneracy == 3);
    CHECK(rep.gap == doctest::Approx(0.06).epsilon(1e-8));
    // the three ground vectors are orthonormal
    const Eigen::MatrixXcd G = rep.pairs.vectors.leftCols(3).adjoint() * rep.pairs.vectors.leftCols(3);
    CHECK((G - Eigen::MatrixXcd::Identity(3, 3)).norm() < 1e-10);
}

TEST_CASE("free Hamiltonian: simple zero eigenvalue and the truncation's first level") {
    const auto t = toy();
    const auto rep = eigs_lowest(t.H0, 3, {}, &t.basis);
    CHECK(rep.E == 0.0);
    CHECK(rep.degeneracy == 1);
    CHECK(rep.gap == doctest::Approx(first_excited_free_level(t.H0)));
    CHECK(*rep.ground_charge == 0.0);
    // enumeration: the lowest pair level is 2 omega(p_1) at q_1 = h
    CHECK(first_excited_free_level(t.H0) == doctest::Approx(2.0 * (1.0 + 2.0 / 3.0)));
}

TEST_CASE("connected components and per-component eigenpairs") {
    const auto t = toy();
    const auto H = assemble_H(t.H0, t.HI, 0.05 * t.c.g0_max);
    const auto comps = components(H.matrix);
    std::size_t total = 0;
    for (const auto& c : comps) total += c.size();
    CHECK(total == t.basis.size());
    CHECK(comps.size() > 1);

    const auto dense = dense_eigenpairs(H.matrix);
    LanczosOptions opt;
    opt.dense_limit = 20;
    const double ceiling = 6.0;
    const auto below = eigenpairs_below(H, ceiling, opt);
    CHECK(below.converged);
    std::size_t expected = 0;
    for (Eigen::Index i = 0; i < dense.values.size(); ++i) expected += dense.values(i) <= ceiling;
    REQUIRE(below.size() == expected);
    for (std::size_t i = 0; i < below.size(); ++i)
        CHECK(std::abs(below.values(Eigen::Index(i)) - dense.values(Eigen::Index(i))) < 1e-10);
    for (double r : below.residuals) CHECK(r <= 1e-9 * dense.norm_estimate);
}

TEST_CASE("ground state report") {
    const auto t = toy();
    const double g0 = t.c.g0_max;
    const auto rows = ground_state_report(t.H0, t.HI, t.c, {0.0, 0.01 * g0, 0.05 * g0, 0.1 * g0});
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].E == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(rows[0].gap == doctest::Approx(first_excited_free_level(t.H0)));
    for (const auto& r : rows) {
        CHECK(r.degeneracy == 1);
        CHECK(r.within_envelope());
        CHECK(r.E <= 1e-12);
    }
    CHECK_THROWS_AS(ground_state_report(t.H0, t.HI, t.c, {1.01 * g0}), std::invalid_argument);
}

TEST_CASE("Mourre window at g = 0 and small g") {
    const auto t = toy();
    const double mZ = 5.0, delta = 0.2;
    const auto N = commutator_H0(t.basis);
    const auto C = commutator_HI(t.basis, t.grid, t.F1, t.F2, CommutatorMode::Analytic);
    for (double gf : {0.0, 0.02, 0.05}) {
        const double g = gf * t.c.g0_max;
        const auto H = assemble_H(t.H0, t.HI, g);
        const auto eig = eigenpairs_below(H, mZ + 1.0);
        const auto M = SparseHermitianOperator::make(SpMat(N.matrix + g * C.matrix), "M");
        const auto rep = mourre_window_check(eig, M, eig.values(0), delta, mZ);
        CHECK_FALSE(rep.vacuous);
        CHECK(rep.pass());
        // enumeration oracle: every H0 level in [delta, mZ - delta] carries one pair
        std::size_t n_pairs = 0;
        for (std::size_t i = 0; i < t.basis.size(); ++i) {
            const double e = t.H0.matrix.coeff(Eigen::Index(i), Eigen::Index(i)).real();
            if (e >= delta && e <= mZ - delta) {
                CHECK(t.basis.state(i).n_electrons() + t.basis.state(i).n_positrons() == 2);
                ++n_pairs;
            }
        }
        CHECK(rep.n_window == n_pairs);
        if (gf == 0.0)
            CHECK(rep.c_delta == doctest::Approx(2.0).epsilon(1e-12));
        else
            CHECK(rep.c_delta > 1.0);
        for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
            const double x = eig.values(i) - eig.values(0);
            if (x > 0.0 && x < rep.lo) CHECK(false);
        }
    }
    const auto eig0 = eigenpairs_below(t.H0, 6.0);
    const auto vac = mourre_window_check(eig0, N, 0.0, 3.0, mZ);
    CHECK(vac.vacuous);
    CHECK(vac.pass());
    CHECK(vac.warning == "empty spectral window");
}

TEST_CASE("virial residuals") {
    const auto t = toy();
    const auto a = direct_sum(build_a_matrix(t.grid.fermions.grid), int(t.grid.fermions.channels.size()));
    const SpMat A = second_quantize_one_body(t.basis, a);

    // vacuum at g = 0
    const auto eig0 = eigenpairs_below(t.H0, 3.0);
    const auto M0 = exact_commutator(t.H0, A);
    CHECK(virial_check(eig0, M0, hermitian_norm(M0.matrix), 1)[0].expectation == 0.0);

    const auto H = assemble_H(t.H0, t.HI, 0.05 * t.c.g0_max);
    const auto eig = eigenpairs_below(H, 6.0);
    const auto M = exact_commutator(H, A);
    const double nM = hermitian_norm(M.matrix);
    const auto rows = virial_check(eig, M, nM, 4);
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) CHECK(r.pass());

    // negative control: the top eigenvector of M is no eigenvector of H
    SparseHermitianOperator negM = SparseHermitianOperator::make(SpMat(-M.matrix), "-M");
    const auto top = eigs_lowest(negM, 1);
    EigenPairs ctl;
    ctl.values = Eigen::VectorXd::Zero(1);
    ctl.vectors = top.pairs.vectors;
    ctl.residuals = {(H.matrix * ctl.vectors.col(0) - (ctl.vectors.col(0).dot(H.matrix * ctl.vectors.col(0))) * ctl.vectors.col(0)).norm()};
    const auto bad = virial_check(ctl, M, nM, 1);
    CHECK(bad[0].expectation > 0.5);

    // linear scaling with the eigenpair residual
    std::mt19937_64 rng(9);
    std::normal_distribution<double> Nd;
    Eigen::VectorXcd r(H.dimension());
    for (auto& x : r) x = cplx(Nd(rng), Nd(rng));
    r.normalize();
    const Eigen::VectorXcd phi = eig.vectors.col(1);
    std::vector<double> ex;
    for (double e : {1e-6, 1e-8, 1e-10}) {
        const Eigen::VectorXcd v = (phi + e * r).normalized();
        ex.push_back(std::abs(v.dot(M.matrix * v)));
    }
    CHECK(ex[0] / ex[1] == doctest::Approx(100.0).epsilon(0.05));
    CHECK(ex[1] / ex[2] == doctest::Approx(100.0).epsilon(0.05));
}

TEST_CASE("exact commutator and weighted norms against dense oracles") {
    const auto Hd = random_hermitian(40, 7);
    const auto Ad = random_hermitian(40, 8);
    const auto C = exact_commutator(from_dense(Hd), SpMat(Ad.sparseView()));
    const cplx i1(0.0, 1.0);
    CHECK((Eigen::MatrixXcd(C.matrix) - i1 * (Hd * Ad - Ad * Hd)).cwiseAbs().maxCoeff() < 1e-12);

    const auto ws = WeightedSpectrum::build(Hd, Ad, 0.75);
    Eigen::VectorXcd d(40);
    for (int k = 0; k < 40; ++k) d(k) = 1.0 / (ws.values(k) - cplx(0.3, 0.05));
    const Eigen::MatrixXcd X = ws.B * d.asDiagonal() * ws.B.adjoint();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(X);
    CHECK(weighted_norm(ws.B, d) == doctest::Approx(svd.singularValues()(0)).epsilon(1e-8));
    // <A>^{-s} is a contraction
    Eigen::JacobiSVD<Eigen::MatrixXcd> sw(ws.weight);
    CHECK(sw.singularValues()(0) <= 1.0 + 1e-12);
}

TEST_CASE("resolvent probe sanity") {
    const auto Hd = random_hermitian(60, 11);
    const auto Ad = random_hermitian(60, 12);
    const auto ws = WeightedSpectrum::build(Hd, Ad, 1.0);
    const auto rep = lap_probe(ws, {0.0, 1.0}, {1e-2, 1e-1, 1.0, 1e3, 1e4});
    CHECK(rep.bounded_by_unweighted);
    for (const auto& c : rep.curves) {
        // eps far above the spectral diameter
        CHECK(c.unweighted.back() * c.eps.back() == doctest::Approx(1.0).epsilon(1e-4));
        CHECK(c.weighted.back() <= 1.0 / c.eps.back() * (1.0 + 1e-9));
        CHECK(c.floor > 0.0);
    }
}

TEST_CASE("local decay probe sanity") {
    const auto Hd = random_hermitian(60, 13);
    const auto Ad = random_hermitian(60, 14);
    const auto ws = WeightedSpectrum::build(Hd, Ad, 1.0);
    const auto c = local_decay_probe(ws, ws.values(0), 0.5, 3.0, {0.0, 0.5, 1.0, 2.0}, 0.5);
    CHECK(c.n_window > 0);
    CHECK(c.norm[0] <= 1.0 + 1e-12);
    // t = 0 against the dense projection
    Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(60, 60);
    for (int k = 0; k < 60; ++k) {
        const double x = ws.values(k) - ws.values(0);
        if (x >= 0.5 && x <= 3.0) P += ws.vectors.col(k) * ws.vectors.col(k).adjoint();
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(ws.weight * P * ws.weight);
    CHECK(c.norm[0] == doctest::Approx(svd.singularValues()(0)).epsilon(1e-8));
    CHECK(c.t_rec > 0.0);

    const auto empty = local_decay_probe(ws, ws.values(0), 1e6, 2e6, {0.0, 1.0, 5.0}, 0.5);
    CHECK(empty.n_window == 0);
    for (double v : empty.norm) CHECK(v == 0.0);
}

TEST_CASE("dense block extraction") {
    const auto D = random_hermitian(10, 21);
    const SpMat S = D.sparseView();
    const std::vector<std::size_t> idx{1, 4, 7};
    const auto B = dense_block(S, idx);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) CHECK(B(a, b) == D(Eigen::Index(idx[a]), Eigen::Index(idx[b])));
}
