#include "doctest.h"
#include "zdecay/fock.hpp"

#include <cmath>
#include <numbers>

using namespace zdecay;

namespace {

using Maybe = std::optional<std::pair<cplx, OccupationState>>;

SpMat fermion_op(const FockBasis& b, bool electron, bool dagger, int mode) {
    return operator_matrix(b, [=](const OccupationState& s) -> Maybe {
        auto r = electron ? (dagger ? apply_b_plus_dagger(s, mode) : apply_b_plus(s, mode))
                          : (dagger ? apply_b_minus_dagger(s, mode) : apply_b_minus(s, mode));
        if (!r) return std::nullopt;
        return std::pair{cplx(r->sign), r->state};
    });
}

SpMat boson_op(const FockBasis& b, bool dagger, int mode) {
    const int nmax = b.boson_cap();
    return operator_matrix(b, [=](const OccupationState& s) -> Maybe {
        auto r = dagger ? apply_a_dagger(s, mode, nmax) : apply_a(s, mode);
        if (!r) return std::nullopt;
        return std::pair{cplx(r->amplitude), r->state};
    });
}

double max_abs(const SpMat& m) {
    double v = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) v = std::max(v, std::abs(it.value()));
    return v;
}

SpMat identity(std::size_t n) {
    SpMat I(n, n);
    I.setIdentity();
    return I;
}

} // namespace

TEST_CASE("sector-0 dimension with unit caps") {
    for (auto [nf, nb] : {std::pair{3, 2}, std::pair{8, 5}, std::pair{20, 36}}) {
        FockBasis b(nf, nb, {1, 1, 1}, 2, 0);
        CHECK(b.size() == std::size_t(1 + nb + nf * nf + nf * nf * nb));
    }
}

TEST_CASE("basis lookup round trip and deterministic digest") {
    FockBasis b(5, 3, {2, 2, 2}, 2, std::nullopt);
    for (std::size_t i = 0; i < b.size(); ++i) {
        auto j = b.find(b.state(i));
        REQUIRE(j);
        CHECK(*j == i);
        CHECK(b.contains_caps(b.state(i)));
    }
    FockBasis b2(5, 3, {2, 2, 2}, 2, std::nullopt);
    CHECK(b.digest() == b2.digest());
    FockBasis b3(5, 3, {2, 2, 1}, 2, std::nullopt);
    CHECK(b.digest() != b3.digest());
    CHECK(b.state(0).n_electrons() == 0);
    CHECK(b.state(0).n_bosons() == 0);
}

TEST_CASE("number operators and charge sectors") {
    FockBasis b(4, 2, {2, 2, 2}, 2, 1);
    auto n = number_operators(b);
    for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(n.charge(i) == 1.0);
        CHECK(n.n_plus(i) - n.n_minus(i) == 1.0);
    }
}

TEST_CASE("canonical anticommutation and commutation relations") {
    const int nf = 6, nb = 2, nmax = 2;
    FockBasis b(nf, nb, {nf, nf, nb * nmax}, nmax, std::nullopt);
    REQUIRE(b.size() == std::size_t((1 << nf) * (1 << nf) * (nmax + 1) * (nmax + 1)));
    const SpMat I = identity(b.size());

    std::vector<SpMat> bp, bpd, bm, bmd, a, ad;
    for (int i = 0; i < nf; ++i) {
        bp.push_back(fermion_op(b, true, false, i));
        bpd.push_back(fermion_op(b, true, true, i));
        bm.push_back(fermion_op(b, false, false, i));
        bmd.push_back(fermion_op(b, false, true, i));
        CHECK(max_abs(SpMat(bpd[i] - SpMat(bp[i].adjoint()))) == 0.0);
        CHECK(max_abs(SpMat(bmd[i] - SpMat(bm[i].adjoint()))) == 0.0);
    }
    for (int k = 0; k < nb; ++k) {
        a.push_back(boson_op(b, false, k));
        ad.push_back(boson_op(b, true, k));
    }
    auto anti = [](const SpMat& x, const SpMat& y) { return SpMat(x * y + y * x); };
    auto comm = [](const SpMat& x, const SpMat& y) { return SpMat(x * y - y * x); };

    for (int i = 0; i < nf; ++i)
        for (int j = 0; j < nf; ++j) {
            const SpMat d = (i == j) ? I : SpMat(b.size(), b.size());
            CHECK(max_abs(SpMat(anti(bp[i], bpd[j]) - d)) < 1e-15);
            CHECK(max_abs(SpMat(anti(bm[i], bmd[j]) - d)) < 1e-15);
            CHECK(max_abs(anti(bp[i], bp[j])) < 1e-15);
            CHECK(max_abs(anti(bm[i], bm[j])) < 1e-15);
            CHECK(max_abs(anti(bp[i], bm[j])) < 1e-15);
            CHECK(max_abs(anti(bp[i], bmd[j])) < 1e-15);
        }
    // Truncated CCR: [a, a*] = 1 - (n_max + 1) P_{n = n_max}
    for (int k = 0; k < nb; ++k)
        for (int l = 0; l < nb; ++l) {
            SpMat expected(b.size(), b.size());
            if (k == l) {
                std::vector<Eigen::Triplet<cplx>> t;
                for (std::size_t s = 0; s < b.size(); ++s) {
                    const bool full = b.state(s).bosons[k] == nmax;
                    t.emplace_back(int(s), int(s), full ? 1.0 - (nmax + 1) : 1.0);
                }
                expected.setFromTriplets(t.begin(), t.end());
            }
            CHECK(max_abs(SpMat(comm(a[k], ad[l]) - expected)) < 1e-13);
            CHECK(max_abs(comm(a[k], a[l])) < 1e-15);
        }
    for (int i = 0; i < nf; ++i)
        for (int k = 0; k < nb; ++k) {
            CHECK(max_abs(comm(bp[i], ad[k])) < 1e-15);
            CHECK(max_abs(comm(bmd[i], a[k])) < 1e-15);
        }
}

TEST_CASE("fermion sign conventions on explicit states") {
    OccupationState s;
    s.bosons = {0};
    s.electrons.set(1);
    s.electrons.set(3);
    auto r = apply_b_plus_dagger(s, 2);
    REQUIRE(r);
    CHECK(r->sign == -1);
    CHECK(!apply_b_plus_dagger(s, 3));
    auto r0 = apply_b_plus_dagger(s, 0);
    CHECK(r0->sign == 1);
    // positron operators anticommute past every electron
    auto q = apply_b_minus_dagger(s, 0);
    CHECK(q->sign == 1);
    s.electrons.reset(3);
    q = apply_b_minus_dagger(s, 0);
    CHECK(q->sign == -1);
    CHECK(!apply_a(s, 0));
    auto up = apply_a_dagger(s, 0, 1);
    CHECK(up->amplitude == 1.0);
    CHECK(!apply_a_dagger(up->state, 0, 1));
}

TEST_CASE("grid weights integrate smooth functions") {
    auto f = [](double p) { return p * p * std::exp(-p); };
    for (auto kind : {GridKind::UniformEnergy, GridKind::UniformMomentum}) {
        // q-uniform nodes see a sqrt(q) edge, so only order > 1 is expected
        double prev_err = 1.0;
        for (int n : {100, 200, 400}) {
            const auto g = kind == GridKind::UniformEnergy ? MomentumGrid::uniform_energy(n, 40.0, 1.0)
                                                           : MomentumGrid::uniform_momentum(n, 40.0, 1.0);
            double s = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) s += g.w[i] * f(g.p[i]);
            const double err = std::abs(s - 2.0);
            CHECK(err < 0.5 * prev_err);
            prev_err = err;
        }
        CHECK(prev_err < 1e-2);
    }
    auto g = MomentumGrid::uniform_energy(4, 2.0, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(omega(g.p[i], 1.0) - 1.0 - g.q[i]) < 1e-14);
}

TEST_CASE("directional boson weights discretize d^3k") {
    const double kmax = 2.0;
    auto set = BosonModeSet::directional(6, 4, kmax, 5.0, 2);
    CHECK(set.size() == 72);
    double s = 0.0;
    for (const auto& m : set.modes) s += m.w;
    CHECK(std::abs(s - 3.0 * 4.0 * std::numbers::pi * kmax * kmax * kmax / 3.0) < 1e-11);
    CHECK(std::abs(set.omega3(0) - std::sqrt(set.modes[0].k.squaredNorm() + 25.0)) < 1e-15);
}

TEST_CASE("partition of unity and the split map") {
    CHECK(partition_j0(0.2) == 1.0);
    CHECK(partition_j0(1.3) == 0.0);
    for (double s = 0.0; s < 1.5; s += 0.01) {
        const double v = partition_j0(s);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(partition_j0(s + 0.01) <= v);
    }
    const auto grid = MomentumGrid::uniform_momentum(12, 3.0, 1.0);
    const auto y = position_operator(grid);
    CHECK((y - y.adjoint()).cwiseAbs().maxCoeff() < 1e-15);
    for (double R : {0.5, 2.0, 8.0}) {
        const auto rep = partition_check(grid, R, 40, 5);
        CHECK(rep.samples == 40);
        CHECK(rep.unity_error < 1e-12);
        CHECK(rep.isometry_error < 1e-8);
        CHECK(rep.product_formula_error < 1e-12);
        CHECK(rep.pass());
    }
    CHECK_THROWS(position_operator(MomentumGrid::uniform_energy(4, 1.0, 1.0)));
}
