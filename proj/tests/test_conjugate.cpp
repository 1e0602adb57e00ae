#include "doctest.h"
#include "zdecay/conjugate.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace zdecay;

namespace {

using Maybe = std::optional<std::pair<cplx, OccupationState>>;
const cplx I1(0.0, 1.0);

// exp(1 - 1/(1 - x^2)) on (lo, hi), sampled as c_i = sqrt(h) v(q_i)
Eigen::VectorXcd bump_in_q(const MomentumGrid& g, double lo, double hi) {
    Eigen::VectorXcd v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = (2.0 * g.q[i] - lo - hi) / (hi - lo);
        v(i) = std::abs(x) < 1.0 ? std::sqrt(g.step) * std::exp(1.0 - 1.0 / (1.0 - x * x)) : 0.0;
    }
    return v;
}

double spectral_norm(const Eigen::MatrixXcd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m.adjoint() * m, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

struct Small {
    KernelGrid grid;
    FockBasis basis;
    KernelTensor F1, F2;
};

Small small_setup(int nodes, std::optional<int> sector = 0, GFamily g = GFamily::smooth_bump(2.0, 3.0)) {
    Small s{{FermionModeTable(MomentumGrid::uniform_energy(nodes, 2.0, 1.0), std::vector<AngularQN>{{1, 1, -1}, {1, 1, 1}}),
             BosonModeSet::toy(3, 1, 5.0), 1.0},
            {},
            {},
            {}};
    s.basis = FockBasis(int(s.grid.fermions.size()), int(s.grid.bosons.size()), {1, 1, 1}, 1, sector);
    s.F1 = model_kernel(1, s.grid, SFamily::oscillatory(), g);
    s.F2 = model_kernel(2, s.grid, SFamily::oscillatory(), g);
    return s;
}

} // namespace

TEST_CASE("flow map identities") {
    const FlowMap fl{1.3};
    for (double p : {0.05, 0.4, 1.0, 3.7}) {
        for (double t : {0.01, 0.3, 2.0}) {
            const double x = fl.phi(t, p);
            CHECK(fl.g(x) == doctest::Approx(fl.g(p) + t).epsilon(1e-13));
            CHECK(fl.psi(t, x) == doctest::Approx(p).epsilon(1e-12));
            CHECK(fl.phi(0.5, x) == doctest::Approx(fl.phi(t + 0.5, p)).epsilon(1e-13));
            // d/dt phi = f(phi)
            const double e = 1e-5;
            CHECK((fl.phi(t + e, p) - fl.phi(t - e, p)) / (2 * e) == doctest::Approx(f_of_p(x, fl.m)).epsilon(1e-6));
        }
        CHECK(fl.psi(fl.g(p) + 0.1, p) == 0.0);
    }
}

TEST_CASE("a_h is Hermitian on both grid kinds") {
    for (const auto& g : {MomentumGrid::uniform_energy(40, 2.0, 1.0), MomentumGrid::uniform_momentum(40, 3.0, 1.0)}) {
        const auto a = build_a_matrix(g);
        CHECK((a - a.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    }
    const auto a = build_a_matrix(MomentumGrid::uniform_energy(5, 1.0, 1.0));
    const auto a3 = direct_sum(a, 3);
    CHECK(a3.rows() == 15);
    CHECK((a3.block(5, 5, 5, 5) - a).norm() == 0.0);
    CHECK(a3.block(0, 5, 5, 5).norm() == 0.0);
}

TEST_CASE("i[omega, a_h] tends to the identity on smooth vectors at order h^2") {
    std::vector<double> err;
    for (int n : {50, 100, 200}) {
        const auto g = MomentumGrid::uniform_energy(n, 2.0, 1.0);
        const auto a = build_a_matrix(g);
        Eigen::MatrixXcd om = Eigen::MatrixXcd::Zero(n, n);
        for (int i = 0; i < n; ++i) om(i, i) = omega(g.p[i], 1.0);
        const Eigen::MatrixXcd c = I1 * (om * a - a * om);
        const auto v = bump_in_q(g, 0.4, 1.6);
        err.push_back(std::abs(v.dot(c * v) / v.squaredNorm() - 1.0));
    }
    CHECK(err[0] < 1e-2);
    CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.15));
    CHECK(err[1] / err[2] == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("a_h acts on u(p) = p^2 exp(-p^2) as (i/2)(f u' + (f u)')") {
    const double m = 1.0;
    auto u = [](double p) { return p * p * std::exp(-p * p); };
    auto du = [](double p) { return (2 * p - 2 * p * p * p) * std::exp(-p * p); };
    auto exact = [&](double p) {
        const double w = omega(p, m);
        const double f = w / p, df = -m * m / (p * p * w);
        return I1 * (f * du(p) + 0.5 * df * u(p));
    };
    for (int kind = 0; kind < 2; ++kind) {
        std::vector<double> err;
        for (int n : {200, 400, 800}) {
            const auto g = kind == 0 ? MomentumGrid::uniform_energy(n, 6.0, m) : MomentumGrid::uniform_momentum(n, 7.0, m);
            Eigen::VectorXcd c(n);
            for (int i = 0; i < n; ++i) c(i) = std::sqrt(g.w[i]) * u(g.p[i]);
            const Eigen::VectorXcd ac = build_a_matrix(g) * c;
            double e = 0.0;
            for (int i = 0; i < n; ++i)
                if (g.p[i] > 0.5 && g.p[i] < 4.0) e = std::max(e, std::abs(ac(i) / std::sqrt(g.w[i]) - exact(g.p[i])));
            err.push_back(e);
        }
        CHECK(err[2] < 1e-3);
        CHECK(err[0] / err[1] > 3.5);
        CHECK(err[1] / err[2] > 3.5);
    }
}

TEST_CASE("w_t is a contraction and w_t* its transpose") {
    const auto g = MomentumGrid::uniform_energy(60, 1.0, 1.0);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> N;
    for (double t : {0.0, 0.013, 0.1, 0.5, 1.0}) {
        const auto w = semigroup_w(t, g);
        const auto ws = semigroup_w_star(t, g);
        CHECK((ws - w.transpose()).norm() == 0.0);
        CHECK(spectral_norm(w.cast<cplx>()) <= 1.0 + 1e-12);
        for (int s = 0; s < 100; ++s) {
            Eigen::VectorXd v(60);
            for (auto& x : v) x = N(rng);
            CHECK((w * v).norm() <= v.norm() * (1.0 + 1e-12));
            CHECK((ws * v).norm() <= v.norm() * (1.0 + 1e-12));
        }
    }
    CHECK((semigroup_w(0.0, g) - Eigen::MatrixXd::Identity(60, 60)).norm() < 1e-14);
    // integer steps are exact shifts
    const auto w3 = semigroup_w(3 * g.step, g);
    for (int i = 0; i < 60; ++i)
        for (int j = 0; j < 60; ++j) CHECK(w3(i, j) == doctest::Approx(j == i + 3 ? 1.0 : 0.0));
    CHECK_THROWS_AS(semigroup_w(0.1, MomentumGrid::uniform_momentum(10, 1.0, 1.0)), std::invalid_argument);
}

TEST_CASE("w_t* is isometric on vectors supported away from the top edge") {
    const auto g = MomentumGrid::uniform_energy(400, 1.0, 1.0);
    for (double t : {0.0123, 0.1, 0.3}) {
        const Eigen::VectorXd v = bump_in_q(g, 0.1, 0.6).real();
        CHECK((semigroup_w_star(t, g) * v).norm() == doctest::Approx(v.norm()).epsilon(1e-10));
        CHECK((semigroup_w(t, g) * bump_in_q(g, 0.35, 0.9).real()).norm() ==
              doctest::Approx(bump_in_q(g, 0.35, 0.9).real().norm()).epsilon(1e-10));
    }
}

TEST_CASE("generator of w_t is -i a_h up to O(t) + O(h^2)") {
    const auto g = MomentumGrid::uniform_energy(800, 1.0, 1.0);
    const auto a = build_a_matrix(g);
    const Eigen::VectorXcd u = bump_in_q(g, 0.2, 0.8);
    std::vector<double> res;
    for (double t : {0.04, 0.02, 0.01}) {
        const Eigen::VectorXcd wu = semigroup_w(t, g).cast<cplx>() * u;
        res.push_back(((wu - u) / t + I1 * (a * u)).norm() / u.norm());
    }
    CHECK(res[0] / res[1] == doctest::Approx(2.0).epsilon(0.1));
    CHECK(res[1] / res[2] == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("semigroup law on smooth supported vectors") {
    for (int n : {100, 400}) {
        const auto g = MomentumGrid::uniform_energy(n, 1.0, 1.0);
        const Eigen::VectorXd v = bump_in_q(g, 0.4, 0.7).real();
        for (auto [s, t] : {std::pair{0.05, 0.1}, {0.0311, 0.0777}, {0.2, 0.15}}) {
            const Eigen::VectorXd lhs = semigroup_w(s, g) * (semigroup_w(t, g) * v);
            const Eigen::VectorXd rhs = semigroup_w(s + t, g) * v;
            CHECK((lhs - rhs).norm() <= g.step * g.step * v.norm());
        }
    }
}

TEST_CASE("dGamma(a) on the Fock space") {
    const auto g = MomentumGrid::uniform_energy(3, 1.0, 1.0);
    const FermionModeTable ft(g, std::vector<AngularQN>{{1, 1, -1}, {1, 1, 1}});
    const int nf = int(ft.size());
    const auto a = direct_sum(build_a_matrix(g), 2);
    const FockBasis basis(nf, 2, {2, 2, 1}, 1, std::nullopt);
    const SpMat A = second_quantize_one_body(basis, a);

    // oracle: sum_kl a_kl (b+*_k b+_l + b-*_k b-_l) from single-operator matrices
    Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(basis.size(), basis.size());
    for (int k = 0; k < nf; ++k)
        for (int l = 0; l < nf; ++l) {
            if (a(k, l) == 0.0) continue;
            for (int species = 0; species < 2; ++species) {
                const SpMat up = operator_matrix(basis, [&](const OccupationState& s) -> Maybe {
                    const auto r = species == 0 ? apply_b_plus_dagger(s, k) : apply_b_minus_dagger(s, k);
                    if (!r) return std::nullopt;
                    return std::pair{cplx(r->sign), r->state};
                });
                const SpMat down = operator_matrix(basis, [&](const OccupationState& s) -> Maybe {
                    const auto r = species == 0 ? apply_b_plus(s, l) : apply_b_minus(s, l);
                    if (!r) return std::nullopt;
                    return std::pair{cplx(r->sign), r->state};
                });
                ref += a(k, l) * Eigen::MatrixXcd(up * down);
            }
        }
    CHECK((Eigen::MatrixXcd(A) - ref).cwiseAbs().maxCoeff() < 1e-14);

    const auto Aop = second_quantize_A(basis, a);
    CHECK(Aop.hermitian);
    OccupationState vac;
    vac.bosons = {0, 0};
    const auto v0 = *basis.find(vac);
    CHECK(Eigen::MatrixXcd(A).col(v0).norm() == 0.0);

    // one-electron block equals a; bosons are spectators
    for (int b : {0, 1}) {
        for (int i = 0; i < nf; ++i)
            for (int k = 0; k < nf; ++k) {
                OccupationState si = vac, sk = vac;
                si.bosons[b] = 1;
                sk.bosons[b] = 1;
                si.electrons.set(i);
                sk.electrons.set(k);
                CHECK(A.coeff(*basis.find(sk), *basis.find(si)) == a(k, i));
            }
        OccupationState z = vac;
        z.bosons[b] = 1;
        CHECK(Eigen::MatrixXcd(A).col(*basis.find(z)).norm() == 0.0);
    }

    // additivity: expectation in e_i p_j is <a>_ii + <a>_jj (both zero here), and
    // the off-diagonal moves one particle at a time
    int two_moves = 0;
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) {
            const auto& s = basis.state(it.row());
            const auto& t = basis.state(it.col());
            int moved = 0;
            for (int i = 0; i < nf; ++i) moved += s.electrons.test(i) != t.electrons.test(i);
            for (int i = 0; i < nf; ++i) moved += s.positrons.test(i) != t.positrons.test(i);
            two_moves += moved != 2;
        }
    CHECK(two_moves == 0);
}

TEST_CASE("Gamma(w) intertwines creation operators") {
    const auto g = MomentumGrid::uniform_energy(4, 1.0, 1.0);
    const FermionModeTable ft(g, std::vector<AngularQN>{{1, 1, -1}});
    const int nf = int(ft.size());
    const FockBasis basis(nf, 1, {2, 2, 1}, 1, std::nullopt);
    const Eigen::MatrixXcd w = semigroup_w(0.37, g).cast<cplx>();
    const Eigen::MatrixXcd W(second_quantize_W(basis, w));

    OccupationState vac;
    vac.bosons = {0};
    const auto v0 = *basis.find(vac);
    CHECK(std::abs(W(v0, v0) - 1.0) < 1e-15);
    CHECK(std::abs(W.col(v0).norm() - 1.0) < 1e-15);

    // Gamma(w) b*(e_i) = b*(w e_i) Gamma(w) on states below the cap
    for (int species = 0; species < 2; ++species)
        for (int i = 0; i < nf; ++i) {
            auto create = [&](int k) {
                return Eigen::MatrixXcd(operator_matrix(basis, [&, k](const OccupationState& s) -> Maybe {
                    const auto r = species == 0 ? apply_b_plus_dagger(s, k) : apply_b_minus_dagger(s, k);
                    if (!r) return std::nullopt;
                    return std::pair{cplx(r->sign), r->state};
                }));
            };
            Eigen::MatrixXcd bw = Eigen::MatrixXcd::Zero(basis.size(), basis.size());
            for (int k = 0; k < nf; ++k) bw += w(k, i) * create(k);
            const Eigen::MatrixXcd lhs = W * create(i), rhs = bw * W;
            double e = 0.0;
            for (std::size_t c = 0; c < basis.size(); ++c) {
                const auto& s = basis.state(c);
                if ((species == 0 ? s.n_electrons() : s.n_positrons()) >= 2) continue;
                e = std::max(e, (lhs.col(c) - rhs.col(c)).cwiseAbs().maxCoeff());
            }
            CHECK(e < 1e-14);
        }
}

TEST_CASE("[H0, iA] is N+ + N-") {
    const auto s = small_setup(3);
    const auto N = commutator_H0(s.basis);
    const auto no = number_operators(s.basis);
    for (std::size_t i = 0; i < s.basis.size(); ++i)
        CHECK(N.matrix.coeff(i, i).real() == no.n_plus(i) + no.n_minus(i));

    // discrete deviation on a smooth one-electron state falls like h^2
    std::vector<double> dev;
    for (int n : {40, 80}) {
        const auto g = MomentumGrid::uniform_energy(n, 2.0, 1.0);
        const FermionModeTable ft(g, std::vector<AngularQN>{{1, 1, -1}});
        const BosonModeSet bos = BosonModeSet::toy(1, 1, 5.0);
        const FockBasis b(n, 1, {1, 1, 1}, 1, std::nullopt);
        const auto H0 = assemble_H0(b, ft, bos);
        const SpMat A = second_quantize_one_body(b, build_a_matrix(g));
        const auto Nb = commutator_H0(b);
        const auto u = bump_in_q(g, 0.4, 1.6);
        Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(b.size());
        OccupationState st;
        st.bosons = {0};
        for (int i = 0; i < n; ++i) {
            OccupationState e = st;
            e.electrons.set(i);
            psi(*b.find(e)) = u(i);
        }
        dev.push_back(h0_commutator_deviation(H0, A, Nb, psi));
    }
    CHECK(dev[0] < 2e-2);
    CHECK(dev[0] / dev[1] == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("[H_I, iA] in grid-consistent mode equals the matrix commutator") {
    const auto s = small_setup(4);
    const auto HI = assemble_HI(s.basis, s.grid, s.F1, s.F2);
    const auto a = direct_sum(build_a_matrix(s.grid.fermions.grid), 2);
    const SpMat A = second_quantize_one_body(s.basis, a);
    const Eigen::MatrixXcd Ad(A), Hd(HI.matrix);
    const Eigen::MatrixXcd ref = I1 * (Hd * Ad - Ad * Hd);

    const auto C = commutator_HI(s.basis, s.grid, s.F1, s.F2, CommutatorMode::GridConsistent);
    CHECK((Eigen::MatrixXcd(C.matrix) - ref).cwiseAbs().maxCoeff() <= 1e-6 * ref.cwiseAbs().maxCoeff());
    CHECK((Eigen::MatrixXcd(C.matrix) - ref).cwiseAbs().maxCoeff() < 1e-12);

    const auto C2 = second_commutator_HI(s.basis, s.grid, s.F1, s.F2, CommutatorMode::GridConsistent);
    const Eigen::MatrixXcd ref2 = I1 * (ref * Ad - Ad * ref);
    CHECK((Eigen::MatrixXcd(C2.matrix) - ref2).cwiseAbs().maxCoeff() <= 1e-5 * ref2.cwiseAbs().maxCoeff());

    // linearity in the kernel
    auto scaled = [&](const KernelTensor& F, double c) {
        auto v = F.F;
        for (auto& x : v) x *= c;
        return kernel_from_values(F.alpha, s.grid, v, "scaled");
    };
    const auto C3 = commutator_HI(s.basis, s.grid, scaled(s.F1, 3.0), scaled(s.F2, 3.0), CommutatorMode::GridConsistent);
    CHECK((Eigen::MatrixXcd(C3.matrix) - 3.0 * Eigen::MatrixXcd(C.matrix)).cwiseAbs().maxCoeff() < 1e-12);

    const auto Z1 = model_kernel(1, s.grid, SFamily::oscillatory(), GFamily::zero());
    const auto Z2 = model_kernel(2, s.grid, SFamily::oscillatory(), GFamily::zero());
    for (auto mode : {CommutatorMode::GridConsistent, CommutatorMode::Analytic}) {
        CHECK(commutator_HI(s.basis, s.grid, Z1, Z2, mode).matrix.nonZeros() == 0);
        CHECK(second_commutator_HI(s.basis, s.grid, Z1, Z2, mode).matrix.nonZeros() == 0);
    }
}

TEST_CASE("analytic and grid-consistent commuted kernels converge together") {
    std::vector<double> gap;
    for (int n : {100, 200}) {
        KernelGrid kg{FermionModeTable(MomentumGrid::uniform_energy(n, 1.5, 1.0), std::vector<AngularQN>{{1, 1, -1}}),
                      BosonModeSet::toy(1, 1, 5.0), 1.0};
        const auto F = model_kernel(1, kg, SFamily::oscillatory(), GFamily::smooth_bump(1.5, 3.0));
        const auto ka = commuted_kernel(F, kg, CommutatorMode::Analytic, 1);
        const auto kgc = commuted_kernel(F, kg, CommutatorMode::GridConsistent, 1);
        double e = 0.0, scale = 0.0;
        // interior nodes: the p^3 profile is not smooth in q at threshold
        for (std::size_t x = 0; x < ka.size(); ++x) {
            const auto i = x / n, j = x % n;
            if (kg.fermions.modes[i].p < 0.3 || kg.fermions.modes[j].p < 0.3) continue;
            e = std::max(e, std::abs(ka[x] - kgc[x]) / std::sqrt(kg.fermions.grid.step));
            scale = std::max(scale, std::abs(ka[x]) / std::sqrt(kg.fermions.grid.step));
        }
        gap.push_back(e / scale);
    }
    CHECK(gap[1] < 5e-3);
    CHECK(gap[0] / gap[1] > 3.0);

    KernelGrid kg{FermionModeTable(MomentumGrid::uniform_energy(5, 1.5, 1.0), 1), BosonModeSet::toy(1, 1, 5.0), 1.0};
    const auto raw = kernel_from_values(1, kg, std::vector<cplx>(20 * 20, 1.0), "flat");
    CHECK_THROWS_AS(commuted_kernel(raw, kg, CommutatorMode::Analytic, 1), std::invalid_argument);
    CHECK(commuted_kernel(raw, kg, CommutatorMode::GridConsistent, 2).size() == 400);
}

TEST_CASE("commutators refuse kernels that fail the second kernel hypothesis") {
    const auto ir = GFamily::infrared_violating(2.0, 3.0);
    const auto s = small_setup(3, 0, ir);
    const auto rep = check_hypothesis2(ir, s.grid, 0.5, {16, 2, 1.1});
    REQUIRE_FALSE(rep.hyp2_pass());
    CHECK_THROWS_AS(commutator_HI(s.basis, s.grid, s.F1, s.F2, CommutatorMode::Analytic, &rep), HypothesisError);
    try {
        second_commutator_HI(s.basis, s.grid, s.F1, s.F2, CommutatorMode::Analytic, &rep);
        FAIL("expected HypothesisError");
    } catch (const HypothesisError& e) {
        CHECK_FALSE(e.report.hyp2_infrared_ok);
    }
    const auto good = check_hypothesis2(GFamily::smooth_bump(2.0, 3.0), s.grid, 0.5, {16, 2, 1.1});
    REQUIRE(good.hyp2_pass());
    const auto t = small_setup(3);
    CHECK_NOTHROW(commutator_HI(t.basis, t.grid, t.F1, t.F2, CommutatorMode::Analytic, &good));
}

TEST_CASE("C11 block formula matches the Fock-space double commutator") {
    KernelGrid kg{FermionModeTable(MomentumGrid::uniform_energy(6, 1.0, 1.0), std::vector<AngularQN>{{1, 1, -1}}),
                  BosonModeSet::toy(2, 1, 5.0), 1.0};
    const int nf = 6;
    const FockBasis basis(nf, 2, {1, 1, 1}, 1, 0);
    const auto F1 = model_kernel(1, kg, SFamily::oscillatory(), GFamily::smooth_bump(1.5, 3.0));
    const auto F2 = model_kernel(2, kg, SFamily::oscillatory(), GFamily::smooth_bump(1.5, 3.0, 0.6));
    const Eigen::MatrixXcd H(assemble_HI(basis, kg, F1, F2).matrix);
    const auto k1 = factorize_pair_kernel(F1.weighted(kg), nf, 2);
    const auto k2 = factorize_pair_kernel(F2.weighted(kg), nf, 2);
    CHECK(k1.max_rank() <= nf);
    for (double t : {0.0, 0.05, 0.3, 0.9}) {
        const Eigen::MatrixXcd w = semigroup_w(t, kg.fermions.grid).cast<cplx>();
        const Eigen::MatrixXcd W(second_quantize_W(basis, w));
        const Eigen::MatrixXcd Ws(second_quantize_W(basis, Eigen::MatrixXcd(w.adjoint())));
        const double exact = std::max(double_commutator_norm(W, H), double_commutator_norm(Ws, H));
        CHECK(c11_norm(t, kg.fermions.grid, k1, k2) == doctest::Approx(exact).epsilon(1e-10).scale(1e-14));
        if (t == 0.0) CHECK(exact < 1e-14);
    }
}

TEST_CASE("low-rank factorization reproduces the kernel") {
    KernelGrid kg{FermionModeTable(MomentumGrid::uniform_energy(30, 1.0, 1.0), std::vector<AngularQN>{{1, 1, -1}}),
                  BosonModeSet::toy(2, 1, 5.0), 1.0};
    const auto K = model_kernel(1, kg, SFamily::oscillatory(), GFamily::smooth_bump(1.5, 3.0)).weighted(kg);
    const auto f = factorize_pair_kernel(K, 30, 2);
    double e = 0.0, mx = 0.0;
    for (int k = 0; k < 2; ++k) {
        const Eigen::MatrixXcd M = f.U[k] * f.V[k].transpose();
        for (int i = 0; i < 30; ++i)
            for (int j = 0; j < 30; ++j) {
                e = std::max(e, std::abs(M(i, j) - K[(i * 30 + j) * 2 + k]));
                mx = std::max(mx, std::abs(K[(i * 30 + j) * 2 + k]));
            }
    }
    CHECK(e <= 1e-12 * mx);
    CHECK(f.max_rank() < 30);
}

TEST_CASE("C11 diagnostic separates admissible kernels from violators") {
    const int n = 500;
    KernelGrid kg{FermionModeTable(MomentumGrid::uniform_energy(n, 1.0, 1.0), std::vector<AngularQN>{{1, 1, -1}}),
                  BosonModeSet::toy(2, 1, 5.0), 1.0};
    auto run = [&](const GFamily& g) {
        const auto k1 = factorize_pair_kernel(model_kernel(1, kg, SFamily::oscillatory(), g).weighted(kg), n, 2);
        const auto k2 = factorize_pair_kernel(model_kernel(2, kg, SFamily::oscillatory(), g).weighted(kg), n, 2);
        return c11_diagnostic(kg.fermions.grid, k1, k2, {1e-3, 20});
    };
    const auto good = run(GFamily::smooth_bump(1.5, 3.0));
    CHECK(good.stabilizes());
    CHECK_FALSE(good.grows());
    CHECK(good.refined.t.size() == 39);
    CHECK(good.refined.partial_at(1.0) == 0.0);
    const auto bad = run(GFamily::infrared_violating(1.5, 3.0));
    CHECK(bad.grows());
    CHECK_FALSE(bad.stabilizes());

    const LowRankSlices none{n, {}, {}};
    const auto zero = c11_diagnostic(kg.fermions.grid, none, none, {1e-3, 5});
    CHECK(zero.stabilizes());
    CHECK(zero.refined.partial.front() == 0.0);
}

TEST_CASE("form domain: H0^{1/2} W (H0^{1/2} + 1)^{-1} stays bounded by one") {
    const auto s = small_setup(4);
    BosonModeSet bos = s.grid.bosons;
    const auto H0 = assemble_H0(s.basis, s.grid.fermions, bos);
    const std::vector<double> ts{0.1, 0.25, 0.5, 1.0};
    const auto rep = form_domain_check(s.basis, H0, s.grid.fermions, ts);
    CHECK(rep.rows.size() == 8);
    CHECK(rep.pass());
    CHECK(rep.max_norm > 0.5);

    // dense oracle for one t
    const Eigen::MatrixXcd w = direct_sum(semigroup_w_star(0.25, s.grid.fermions.grid).cast<cplx>(), 2);
    const Eigen::MatrixXcd W(second_quantize_W(s.basis, w));
    const Eigen::VectorXd d = Eigen::MatrixXcd(H0.matrix).diagonal().real();
    const Eigen::VectorXd sq = d.cwiseSqrt();
    const Eigen::MatrixXcd M = sq.asDiagonal() * W * (sq.array() + 1.0).inverse().matrix().asDiagonal();
    double row = 0.0;
    for (const auto& r : rep.rows)
        if (r.t == 0.25 && r.adjoint) row = r.norm;
    CHECK(row == doctest::Approx(spectral_norm(M)).epsilon(1e-10));
}
