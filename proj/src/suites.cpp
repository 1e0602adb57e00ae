#include "zdecay/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace zdecay {

namespace {

const cplx I1(0.0, 1.0);

using Maybe = std::optional<std::pair<cplx, OccupationState>>;

double max_abs(const SpMat& m) {
    double v = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) v = std::max(v, std::abs(it.value()));
    return v;
}

double spectral_norm(const Eigen::MatrixXcd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m.adjoint() * m, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

std::vector<double> log_space(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int k = 0; k < n; ++k) v[k] = lo * std::pow(hi / lo, double(k) / (n - 1));
    return v;
}

// exp(1 - 1/(1 - x^2)) on (lo, hi) in q, as coefficients sqrt(h) v(q_i)
Eigen::VectorXd bump_in_q(const MomentumGrid& g, double lo, double hi) {
    Eigen::VectorXd v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = (2.0 * g.q[i] - lo - hi) / (hi - lo);
        v(i) = std::abs(x) < 1.0 ? std::sqrt(g.step) * std::exp(1.0 - 1.0 / (1.0 - x * x)) : 0.0;
    }
    return v;
}

// 1F1(a; b; i z) by its power series in quad precision
cplx kummer_series_q(double a, double b, double z) {
    using q = __float128;
    q re = 1, im = 0, tr = 1, ti = 0;
    for (int n = 0; n < 400; ++n) {
        const q f = (q(a) + n) / (q(b) + n) * q(z) / (n + 1);
        const q nr = -ti * f, ni = tr * f;
        tr = nr;
        ti = ni;
        re += tr;
        im += ti;
    }
    return {double(re), double(im)};
}

template <class F>
Check guarded(std::string id, std::string description, bool diagnostic, F&& body) {
    Check c;
    c.id = std::move(id);
    c.description = std::move(description);
    c.diagnostic = diagnostic;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const HypothesisError& e) {
        c.error = e.what();
        c.details["hypothesis_report"] = nlohmann::json::parse(hypothesis_report_json(e.report));
    } catch (const std::exception& e) {
        c.error = e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return c;
}

const char* sign_name(EnergySign s) { return s == EnergySign::Plus ? "+" : "-"; }

FockBasis full_fock(int nf, int nb, int nmax) { return FockBasis(nf, nb, {nf, nf, nb * nmax}, nmax, std::nullopt); }

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

MomentumGrid make_grid(const RunConfig& c, int nodes, double max) {
    return c.grid_kind == "uniform_momentum" ? MomentumGrid::uniform_momentum(nodes, max, c.m_e)
                                             : MomentumGrid::uniform_energy(nodes, max, c.m_e);
}

SFamily make_s(const std::string& name) { return name == "unit" ? SFamily::unit() : SFamily::oscillatory(); }

} // namespace

//==============================================================================
// Claims and checks
//==============================================================================

bool Claim::holds() const {
    if (!std::isfinite(value)) return false;
    if (relation == "<=") return value <= bound;
    if (relation == "<") return value < bound;
    if (relation == ">=") return value >= bound;
    if (relation == ">") return value > bound;
    if (relation == "==") return std::abs(value - bound) <= tolerance;
    return false;
}

bool Check::pass() const {
    return error.empty() && std::all_of(claims.begin(), claims.end(), [](const Claim& c) { return c.holds(); });
}

Check& Check::claim(std::string name, double value, std::string relation, double bound, double tol) {
    claims.push_back({std::move(name), value, std::move(relation), bound, tol});
    return *this;
}

bool SuiteResult::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.diagnostic || c.pass(); });
}

//==============================================================================
// Workspace
//==============================================================================

GFamily make_g_family(const std::string& name, double p_support, double k_support, double amplitude) {
    if (name == "smooth_bump") return GFamily::smooth_bump(p_support, k_support, amplitude);
    if (name == "infrared_violating") return GFamily::infrared_violating(p_support, k_support, amplitude);
    if (name == "with_jump") return GFamily::with_jump(p_support, k_support);
    if (name == "zero") return GFamily::zero();
    throw ConfigError("unknown G family " + name);
}

Workspace::Workspace(RunConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

const KernelGrid& Workspace::grid() {
    std::call_once(grid_.once, [&] {
        const auto& c = cfg_;
        BosonModeSet bos = c.boson_kind == "toy"
                               ? BosonModeSet::toy(c.boson_count, c.boson_n_max, c.m_z)
                               : BosonModeSet::directional(c.boson_directions, c.boson_radial, c.boson_k_max, c.m_z,
                                                           c.boson_n_max);
        grid_.value = KernelGrid{FermionModeTable(make_grid(c, c.grid_nodes, c.grid_max), c.two_j_max), bos, c.m_e};
    });
    return *grid_.value;
}

const FockBasis& Workspace::basis() {
    std::call_once(basis_.once, [&] {
        const auto& g = grid();
        basis_.value = FockBasis(int(g.fermions.size()), int(g.bosons.size()),
                                 {cfg_.cap_electrons, cfg_.cap_positrons, cfg_.cap_bosons}, cfg_.boson_n_max,
                                 cfg_.sector);
    });
    return *basis_.value;
}

const GFamily& Workspace::g_family() {
    std::call_once(family_.once, [&] {
        family_.value = make_g_family(cfg_.g_family, cfg_.p_support, cfg_.k_support, cfg_.kernel_amplitude);
    });
    return *family_.value;
}

namespace {
KernelTensor build_kernel(int alpha, const RunConfig& c, const KernelGrid& g, const GFamily& fam) {
    if (c.kernel_kind == "physical") {
        PhysicalParams par;
        par.f_loc = LocalizationFn::bump(c.loc_r0, c.loc_scale);
        par.g_v_prime = c.g_v_prime;
        par.m_e = c.m_e;
        return physical_kernel(alpha, g, fam, par);
    }
    return model_kernel(alpha, g, make_s(c.s_family), fam);
}
} // namespace

const KernelTensor& Workspace::F1() {
    std::call_once(f1_.once, [&] { f1_.value = build_kernel(1, cfg_, grid(), g_family()); });
    return *f1_.value;
}

const KernelTensor& Workspace::F2() {
    std::call_once(f2_.once, [&] { f2_.value = build_kernel(2, cfg_, grid(), g_family()); });
    return *f2_.value;
}

const HypothesisReport& Workspace::hypothesis() {
    std::call_once(hyp_.once, [&] {
        Hyp2Options opt{cfg_.hyp_n_aux, cfg_.hyp_padding, cfg_.hyp_growth_tol};
        auto rep = check_hypothesis2(g_family(), grid(), cfg_.hyp_epsilon, opt);
        rep.hyp1_value = check_hypothesis1(F1().G, grid(), a_weights());
        hyp_.value = rep;
    });
    return *hyp_.value;
}

std::string Workspace::hypothesis_digest() { return fnv1a_hex(hypothesis_report_json(hypothesis())); }

const std::vector<double>& Workspace::a_weights() {
    std::call_once(aw_.once, [&] {
        aw_.value = zdecay::a_weights(grid().fermions, LocalizationFn::bump(cfg_.loc_r0, cfg_.loc_scale), cfg_.m_e);
    });
    return *aw_.value;
}

const Constants& Workspace::constants() {
    std::call_once(constants_.once, [&] {
        constants_.value = zdecay::constants(F1(), F2(), grid(), a_weights(), fit_polarization_constant(cfg_.m_z).c_mz,
                                             cfg_.beta, cfg_.eta);
    });
    return *constants_.value;
}

const SparseHermitianOperator& Workspace::H0() {
    std::call_once(h0_.once, [&] { h0_.value = assemble_H0(basis(), grid().fermions, grid().bosons); });
    return *h0_.value;
}

const SparseHermitianOperator& Workspace::HI() {
    std::call_once(hi_.once, [&] { hi_.value = assemble_HI(basis(), grid(), F1(), F2()); });
    return *hi_.value;
}

double Workspace::coupling(double value, bool absolute) {
    if (absolute) return value;
    const auto& c = constants();
    if (c.g0_unbounded()) throw ConfigError("couplings are fractions of g0_max, which is unbounded for this kernel");
    return value * c.g0_max;
}

const EigenPairs& Workspace::low_spectrum(double g) {
    std::lock_guard<std::mutex> lock(spectra_mutex_);
    auto it = spectra_.find(g);
    if (it != spectra_.end()) return *it->second;
    const auto H = assemble_H(H0(), HI(), g);
    LanczosOptions opt;
    opt.tol = cfg_.tol_eigen;
    opt.seed = cfg_.seed;
    auto p = std::make_shared<EigenPairs>(eigenpairs_below(H, cfg_.m_z + cfg_.m_e, opt));
    spectra_[g] = p;
    return *p;
}

const WeightedSpectrum& Workspace::lap_spectrum(int nodes) {
    std::lock_guard<std::mutex> lock(spectra_mutex_);
    auto it = lap_.find(nodes);
    if (it != lap_.end()) return *it->second;

    const auto& c = cfg_;
    const KernelGrid kg{FermionModeTable(MomentumGrid::uniform_energy(nodes, c.lap_q_max, c.m_e),
                                         std::vector<AngularQN>{{1, 1, -1}}),
                        BosonModeSet::toy(1, 1, c.m_z), c.m_e};
    const FockBasis basis(nodes, 1, {1, 1, 1}, 1, 0);
    const auto fam = make_g_family(c.g_family, c.lap_p_support, c.k_support, c.kernel_amplitude);
    const auto F1 = model_kernel(1, kg, make_s(c.s_family), fam);
    const auto F2 = model_kernel(2, kg, make_s(c.s_family), fam);
    const auto H0 = assemble_H0(basis, kg.fermions, kg.bosons);
    const auto HI = assemble_HI(basis, kg, F1, F2);
    const auto k = zdecay::constants(F1, F2, kg, zdecay::a_weights(kg.fermions, LocalizationFn::bump(), c.m_e),
                                     fit_polarization_constant(c.m_z).c_mz, c.beta, c.eta);
    const double g = k.g0_unbounded() ? 0.0 : c.lap_g * k.g0_max;
    const auto H = assemble_H(H0, HI, g);
    const SpMat A = second_quantize_one_body(basis, build_a_spectral(kg.fermions.grid));

    // one pair without a boson, or a single boson
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const auto& s = basis.state(i);
        if (s.n_electrons() + s.n_bosons() == 1) idx.push_back(i);
    }
    auto p = std::make_shared<WeightedSpectrum>(
        WeightedSpectrum::build(dense_block(H.matrix, idx), dense_block(A, idx), c.lap_s));
    lap_[nodes] = p;
    return *p;
}

//==============================================================================
// Checks: modes
//==============================================================================

Check check_kummer(Workspace& ws) {
    return guarded("kummer_integral", "Gauss-Jacobi evaluation of 1F1(gamma+1; 2gamma+1; iz) against the power series",
                   false, [&](Check& c) {
                       double worst = 0.0, wz = 0.0;
                       int wg = 0;
                       std::vector<double> zs;
                       for (double z = -40.0; z <= 40.0 + 1e-12; z += 0.5) zs.push_back(z);
                       for (int g = 1; g <= 5; ++g)
                           for (double z : zs) {
                               const cplx q = kummer_radial(g, z);
                               const cplx s = kummer_series_q(g + 1.0, 2.0 * g + 1.0, z);
                               const double e = std::abs(q - s) / std::abs(s);
                               if (e > worst) worst = e, wz = z, wg = g;
                           }
                       c.claim("max_relative_error", worst, "<=", ws.config().tol_kummer);
                       c.details["worst_gamma"] = wg;
                       c.details["worst_z"] = wz;
                       c.details["samples"] = 5 * zs.size();
                   });
}

Check check_magnitude_bounds(Workspace& ws) {
    return guarded("magnitude_bounds", "pointwise radial magnitude estimates with zero slack, gamma in {1,2,3}", false,
                   [&](Check& c) {
                       const double m = ws.config().m_e;
                       const auto rep = zdecay::check_magnitude_bounds({1, 2, 3}, 20, 1e-3, m);
                       c.claim("violations", double(rep.violations.size()), "==", 0.0);
                       c.claim("worst_ratio", rep.worst_ratio, "<=", 1.0);
                       c.details["checked"] = rep.checked;
                       Curve t{"modes_bounds",
                               {"kappa [1]", "sign [1]", "p [m_e]", "r [1/m_e]", "abs_g [1]", "abs_f [1]", "bound_g [1]",
                                "bound_f [1]"},
                               {}};
                       const auto pr = log_space(1e-3, 1.0, 8);
                       for (int kappa : {-1, 1, -2, 2, -3, 3})
                           for (auto s : {EnergySign::Plus, EnergySign::Minus})
                               for (double p : pr)
                                   for (double r : pr)
                                       t.rows.push_back({double(kappa), double(sign_value(s)), p, r,
                                                         std::abs(radial_g(kappa, s, p, r, m)),
                                                         std::abs(radial_f(kappa, s, p, r, m)),
                                                         magnitude_bound(RadialComponent::G, kappa, s, p, r, m),
                                                         magnitude_bound(RadialComponent::F, kappa, s, p, r, m)});
                       c.curves.push_back(std::move(t));
                   });
}

Check check_derivative_bounds(Workspace& ws) {
    return guarded("derivative_constants", "first and second derivative constants fitted and stable under grid halving",
                   false, [&](Check& c) {
                       const auto rep = verify_derivative_bounds({1, 2, 3}, 20, 1e-3, ws.config().m_e);
                       double worst = 0.0;
                       int infinite = 0;
                       nlohmann::json fits = nlohmann::json::array();
                       for (const auto& f : rep.fits) {
                           if (!f.finite()) ++infinite;
                           worst = std::max(worst, f.relative_change());
                           fits.push_back({{"component", f.component == RadialComponent::G ? "g" : "f"},
                                           {"kappa", f.kappa},
                                           {"sign", sign_name(f.sign)},
                                           {"order", f.order},
                                           {"c_coarse", f.c_coarse},
                                           {"c_fine", f.c_fine}});
                       }
                       c.claim("non_finite_constants", infinite, "==", 0.0);
                       c.claim("max_relative_change", worst, "<=", rep.tolerance);
                       c.details["fits"] = fits;
                   });
}

Check check_dirac_residual(Workspace& ws) {
    return guarded("dirac_residual_order",
                   "finite-difference residual of H_D psi = +-omega psi over three refinement levels", false,
                   [&](Check& c) {
                       const Vec3 x(0.7, -0.4, 0.5);
                       const std::vector<double> hs{0.2, 0.1, 0.05};
                       double min_order = std::numeric_limits<double>::infinity(), max_res = 0.0;
                       for (const auto& q : angular_channels(3))
                           for (auto s : {EnergySign::Plus, EnergySign::Minus}) {
                               std::vector<double> r;
                               for (double h : hs) r.push_back(dirac_residual(s, 1.3, q, x, h, ws.config().m_e));
                               for (int k = 0; k + 1 < int(r.size()); ++k)
                                   min_order = std::min(min_order, std::log2(r[k] / r[k + 1]));
                               max_res = std::max(max_res, r.back());
                           }
                       c.claim("min_observed_order", min_order, ">=", 1.8);
                       c.details["finest_residual"] = max_res;
                       c.details["steps"] = hs;
                   });
}

//==============================================================================
// Checks: kernels
//==============================================================================

Check check_polarization(Workspace& ws) {
    return guarded("polarization_constant", "fitted polarization constant and C_Z = 156 C_mZ", false, [&](Check& c) {
        const auto fit = fit_polarization_constant(ws.config().m_z);
        c.claim("c_mz_refinement_change", std::abs(fit.c_mz_refined - fit.c_mz) / fit.c_mz, "<=", 1e-3);
        const auto& k = ws.constants();
        c.claim("c_z_over_c_mz", k.c_z / k.c_mz, "==", kCZOverCmZ, 1e-12 * kCZOverCmZ);
        c.details["c_mz"] = fit.c_mz;
        c.details["c_z"] = k.c_z;
    });
}

Check check_kernel_hypotheses(Workspace& ws) {
    return guarded("kernel_hypotheses", "first and second kernel hypotheses for the configured kernel family", true,
                   [&](Check& c) {
                       const auto& h = ws.hypothesis();
                       c.claim("hyp1_value", h.hyp1_value, "<", std::numeric_limits<double>::infinity());
                       c.claim("hyp2_support_ok", h.hyp2_support_ok, "==", 1.0);
                       c.claim("hyp2_sobolev_bounded", h.hyp2_sobolev_bounded, "==", 1.0);
                       c.claim("hyp2_infrared_ok", h.hyp2_infrared_ok, "==", 1.0);
                       c.details["report"] = nlohmann::json::parse(hypothesis_report_json(h));
                       c.details["family"] = ws.g_family().name;
                   });
}

Check check_kernel_constants(Workspace& ws) {
    return guarded("kernel_constants", "derived constants K1 <= K2 and a finite coupling bound g0_max", false,
                   [&](Check& c) {
                       const auto& k = ws.constants();
                       c.claim("K2_minus_K1", k.K2 - k.K1, ">=", 0.0);
                       c.claim("g0_max", k.g0_max, ">", 0.0);
                       c.details["K1"] = k.K1;
                       c.details["K2"] = k.K2;
                       c.details["K"] = k.K;
                       c.details["C_be"] = k.C_be;
                       c.details["B_be"] = k.B_be;
                       c.details["g0_max"] = k.g0_unbounded() ? nlohmann::json("inf") : nlohmann::json(k.g0_max);
                       c.details["F1_l2"] = ws.F1().l2_norm;
                       c.details["F2_l2"] = ws.F2().l2_norm;
                   });
}

//==============================================================================
// Checks: assemble
//==============================================================================

Check check_car_ccr(Workspace& ws) {
    return guarded("car_ccr", "CAR and truncated CCR as matrix identities on the full Fock space of 6 fermion and 2 boson modes (cap 2)",
                   false, [&](Check& c) {
                       const int nf = 6, nb = 2, nmax = 2;
                       const FockBasis b = full_fock(nf, nb, nmax);
                       SpMat I(b.size(), b.size());
                       I.setIdentity();
                       const SpMat Z(b.size(), b.size());
                       std::vector<SpMat> bp, bpd, bm, bmd, a, ad;
                       double adj = 0.0;
                       for (int i = 0; i < nf; ++i) {
                           bp.push_back(fermion_op(b, true, false, i));
                           bpd.push_back(fermion_op(b, true, true, i));
                           bm.push_back(fermion_op(b, false, false, i));
                           bmd.push_back(fermion_op(b, false, true, i));
                           adj = std::max(adj, max_abs(SpMat(bpd[i] - SpMat(bp[i].adjoint()))));
                           adj = std::max(adj, max_abs(SpMat(bmd[i] - SpMat(bm[i].adjoint()))));
                       }
                       for (int k = 0; k < nb; ++k) {
                           a.push_back(boson_op(b, false, k));
                           ad.push_back(boson_op(b, true, k));
                           adj = std::max(adj, max_abs(SpMat(ad[k] - SpMat(a[k].adjoint()))));
                       }
                       auto anti = [](const SpMat& x, const SpMat& y) { return SpMat(x * y + y * x); };
                       auto comm = [](const SpMat& x, const SpMat& y) { return SpMat(x * y - y * x); };
                       double car = 0.0, ccr = 0.0, mixed = 0.0;
                       for (int i = 0; i < nf; ++i)
                           for (int j = 0; j < nf; ++j) {
                               const SpMat& d = i == j ? I : Z;
                               car = std::max({car, max_abs(SpMat(anti(bp[i], bpd[j]) - d)),
                                               max_abs(SpMat(anti(bm[i], bmd[j]) - d)), max_abs(anti(bp[i], bp[j])),
                                               max_abs(anti(bm[i], bm[j])), max_abs(anti(bp[i], bm[j])),
                                               max_abs(anti(bp[i], bmd[j]))});
                           }
                       // on the truncated space [a, a*] = 1 - (n_max + 1) P_{n = n_max}
                       for (int k = 0; k < nb; ++k)
                           for (int l = 0; l < nb; ++l) {
                               SpMat expected(b.size(), b.size());
                               if (k == l) {
                                   std::vector<Eigen::Triplet<cplx>> t;
                                   for (std::size_t s = 0; s < b.size(); ++s)
                                       t.emplace_back(int(s), int(s), b.state(s).bosons[k] == nmax ? -double(nmax) : 1.0);
                                   expected.setFromTriplets(t.begin(), t.end());
                               }
                               ccr = std::max({ccr, max_abs(SpMat(comm(a[k], ad[l]) - expected)),
                                               max_abs(comm(a[k], a[l]))});
                           }
                       for (int i = 0; i < nf; ++i)
                           for (int k = 0; k < nb; ++k)
                               mixed = std::max({mixed, max_abs(comm(bp[i], a[k])), max_abs(comm(bp[i], ad[k])),
                                                 max_abs(comm(bm[i], a[k])), max_abs(comm(bmd[i], ad[k]))});
                       const double tol = ws.config().tol_algebra;
                       c.claim("adjoint_error", adj, "<=", tol);
                       c.claim("car_error", car, "<=", tol);
                       c.claim("ccr_error", ccr, "<=", tol);
                       c.claim("fermion_boson_commutator", mixed, "<=", tol);
                       c.details["dimension"] = b.size();
                       c.details["ccr_form"] = "[a_k, a_l*] = delta_kl (1 - (n_max + 1) P_{n_k = n_max})";
                   });
}

Check check_relative_bound(Workspace& ws) {
    return guarded("relative_bound", "||H_I psi|| <= K (C ||H0 psi|| + B ||psi||) on random states", false,
                   [&](Check& c) {
                       const auto& k = ws.constants();
                       const auto rep = relative_bound_check(ws.H0(), ws.HI(), ws.basis(), k,
                                                             ws.config().relative_bound_samples, ws.config().seed);
                       c.claim("max_ratio", rep.max_ratio, "<", 1.0);
                       c.claim("violating_samples", double(rep.violating_seeds.size()), "==", 0.0);
                       c.claim("K2_minus_K1", k.K2 - k.K1, ">=", 0.0);
                       c.claim("c_z_over_c_mz", k.c_z / k.c_mz, "==", kCZOverCmZ, 1e-12 * kCZOverCmZ);
                       c.details["samples"] = rep.samples;
                       c.details["vacuum_ratio"] = rep.vacuum_ratio;
                       c.details["beta"] = k.beta;
                       c.details["eta"] = k.eta;
                       c.details["dimension"] = ws.basis().size();
                   });
}

Check check_partition(Workspace& ws) {
    return guarded("partition_of_unity", "split-map isometry, j0^2 + jinf^2 = 1 and the single-particle product formula",
                   false, [&](Check& c) {
                       const auto& cf = ws.config();
                       const auto grid = MomentumGrid::uniform_momentum(12, 3.0, cf.m_e);
                       double iso = 0.0, unity = 0.0, prod = 0.0;
                       int samples = 0;
                       for (double R : {0.5, 2.0, 8.0}) {
                           const auto rep = partition_check(grid, R, cf.partition_samples, cf.seed);
                           iso = std::max(iso, rep.isometry_error);
                           unity = std::max(unity, rep.unity_error);
                           prod = std::max(prod, rep.product_formula_error);
                           samples += rep.samples;
                       }
                       c.claim("isometry_error", iso, "<=", cf.tol_partition_isometry);
                       c.claim("unity_error", unity, "<=", cf.tol_partition_unity);
                       c.claim("product_formula_error", prod, "<=", 1e-12);
                       c.details["samples"] = samples;
                       c.details["R"] = {0.5, 2.0, 8.0};
                   });
}

//==============================================================================
// Checks: spectrum
//==============================================================================

Check check_free_spectrum(Workspace& ws) {
    return guarded("free_spectrum", "H0 has the vacuum as simple eigenvalue 0 and nothing else below m_e", false,
                   [&](Check& c) {
                       const auto& H0 = ws.H0();
                       LanczosOptions opt;
                       opt.seed = ws.config().seed;
                       const auto rep = eigs_lowest(H0, 3, opt, &ws.basis());
                       OccupationState vac;
                       vac.bosons.assign(ws.basis().n_boson_modes(), 0);
                       const auto iv = ws.basis().find(vac);
                       if (!iv) throw std::runtime_error("vacuum missing from the basis");
                       const double overlap = std::abs(rep.pairs.vectors(Eigen::Index(*iv), 0));
                       double min_excited = std::numeric_limits<double>::infinity();
                       for (Eigen::Index i = 0; i < H0.matrix.rows(); ++i) {
                           const double d = H0.matrix.coeff(i, i).real();
                           if (i != Eigen::Index(*iv)) min_excited = std::min(min_excited, d);
                       }
                       c.claim("E0", rep.E, "==", 0.0, 1e-12);
                       c.claim("degeneracy", rep.degeneracy, "==", 1.0);
                       c.claim("vacuum_overlap", overlap, "==", 1.0, 1e-12);
                       c.claim("first_excited_level", rep.gap, ">=", ws.config().m_e);
                       c.claim("min_excited_diagonal", min_excited, ">=", ws.config().m_e);
                       c.details["dimension"] = ws.basis().size();
                       c.details["first_excited_free_level"] = first_excited_free_level(H0);
                   });
}

Check check_ground_state(Workspace& ws) {
    return guarded("ground_state_envelope", "E(g) inside |g| K B / (1 - |g| K C), gap and degeneracy over the g sweep",
                   false, [&](Check& c) {
                       const auto& cf = ws.config();
                       std::vector<double> gs;
                       for (double v : cf.g_sweep) gs.push_back(ws.coupling(v, cf.g_absolute));
                       LanczosOptions opt;
                       opt.tol = cf.tol_eigen;
                       opt.seed = cf.seed;
                       const auto rows = ground_state_report(ws.H0(), ws.HI(), ws.constants(), gs, opt);
                       Curve t{"ground_state", {"g [1]", "E [m_e]", "gap [m_e]", "envelope [m_e]", "degeneracy [1]", "residual [m_e]"}, {}};
                       for (const auto& r : rows) {
                           std::ostringstream name;
                           name << "g=" << std::setprecision(6) << r.g;
                           c.claim(name.str() + " |E| - envelope", std::abs(r.E) - r.envelope, "<=", 1e-12);
                           c.claim(name.str() + " degeneracy", r.degeneracy, "==", 1.0);
                           t.rows.push_back({r.g, r.E, r.gap, r.envelope, double(r.degeneracy), r.residual});
                       }
                       c.details["g0_max"] = ws.constants().g0_max;
                       c.curves.push_back(std::move(t));
                   });
}

Check check_virial(Workspace& ws) {
    return guarded("virial", "|<phi, [H, iA] phi>| <= max(1e-8, 10 residual ||M||) for the four lowest eigenvectors",
                   false, [&](Check& c) {
                       const auto& cf = ws.config();
                       const double g = ws.coupling(cf.virial_g);
                       const auto H = assemble_H(ws.H0(), ws.HI(), g);
                       const int nch = int(ws.grid().fermions.channels.size());
                       const SpMat A =
                           second_quantize_one_body(ws.basis(), direct_sum(build_a_matrix(ws.grid().fermions.grid), nch));
                       const auto M = exact_commutator(H, A);
                       const double nM = hermitian_norm(M.matrix, cf.seed);
                       const auto& eig = ws.low_spectrum(g);
                       const auto rows = virial_check(eig, M, nM, 4);
                       if (rows.size() < 4) throw std::runtime_error("fewer than four eigenpairs below the ceiling");
                       nlohmann::json js = nlohmann::json::array();
                       for (std::size_t i = 0; i < rows.size(); ++i) {
                           const auto& r = rows[i];
                           c.claim("state " + std::to_string(i) + " expectation", r.expectation, "<=",
                                   std::max(cf.tol_virial, r.tolerance));
                           js.push_back({{"eigenvalue", r.eigenvalue}, {"expectation", r.expectation},
                                         {"residual", r.residual}, {"tolerance", r.tolerance}});
                       }
                       // negative control: the top eigenvector of M
                       LanczosOptions opt;
                       opt.seed = cf.seed;
                       const auto top = eigs_lowest(SparseHermitianOperator::make(SpMat(-M.matrix), "-M"), 1, opt);
                       const Eigen::VectorXcd v = top.pairs.vectors.col(0);
                       const double ctl = std::abs(v.dot(M.matrix * v));
                       const Eigen::VectorXcd Hv = H.matrix * v;
                       c.claim("negative_control_expectation", ctl, ">=", 0.1);
                       c.details["rows"] = js;
                       c.details["norm_M"] = nM;
                       c.details["g"] = g;
                       c.details["negative_control_residual"] = (Hv - v.dot(Hv) * v).norm();
                   });
}

//==============================================================================
// Checks: mourre
//==============================================================================

Check check_h0_commutator(Workspace& ws) {
    return guarded("h0_commutator", "[H0, iA] = N+ + N- exactly; the discretized form deviation decays like h^2", false,
                   [&](Check& c) {
                       const auto& cf = ws.config();
                       const auto N = commutator_H0(ws.basis());
                       const auto no = number_operators(ws.basis());
                       double exact = 0.0;
                       for (std::size_t i = 0; i < ws.basis().size(); ++i)
                           exact = std::max(exact, std::abs(N.matrix.coeff(Eigen::Index(i), Eigen::Index(i)) -
                                                            cplx(no.n_plus(Eigen::Index(i)) + no.n_minus(Eigen::Index(i)))));
                       exact = std::max(exact, double(N.matrix.nonZeros() > Eigen::Index(ws.basis().size())));
                       c.claim("operator_level_error", exact, "==", 0.0);

                       std::vector<double> dev;
                       for (int n : {40, 80}) {
                           const auto g = MomentumGrid::uniform_energy(n, 2.0, cf.m_e);
                           const FermionModeTable ft(g, std::vector<AngularQN>{{1, 1, -1}});
                           const FockBasis b(n, 1, {1, 1, 1}, 1, std::nullopt);
                           const auto H0 = assemble_H0(b, ft, BosonModeSet::toy(1, 1, cf.m_z));
                           const SpMat A = second_quantize_one_body(b, build_a_matrix(g));
                           const auto u = bump_in_q(g, 0.4, 1.6);
                           Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(b.size());
                           OccupationState st;
                           st.bosons = {0};
                           for (int i = 0; i < n; ++i) {
                               OccupationState e = st;
                               e.electrons.set(i);
                               psi(Eigen::Index(*b.find(e))) = u(i);
                           }
                           dev.push_back(h0_commutator_deviation(H0, A, commutator_H0(b), psi));
                       }
                       c.claim("deviation_order", std::log2(dev[0] / dev[1]), ">=", 1.8);
                       c.details["deviation"] = dev;
                       c.details["nodes"] = {40, 80};
                   });
}

Check check_hi_commutator(Workspace& ws) {
    return guarded("hi_commutator", "kernel-level [H_I, iA] against i(H_I A - A H_I) on a toy basis", false,
                   [&](Check& c) {
                       const auto& cf = ws.config();
                       const KernelGrid kg{FermionModeTable(MomentumGrid::uniform_energy(3, 2.0, cf.m_e),
                                                            std::vector<AngularQN>{{1, 1, -1}, {1, 1, 1}}),
                                           BosonModeSet::toy(3, 1, cf.m_z), cf.m_e};
                       const FockBasis b(6, 3, {1, 1, 1}, 1, 0);
                       const auto fam = ws.g_family();
                       const auto F1 = model_kernel(1, kg, make_s(cf.s_family), fam);
                       const auto F2 = model_kernel(2, kg, make_s(cf.s_family), fam);
                       const Eigen::MatrixXcd Hd(assemble_HI(b, kg, F1, F2).matrix);
                       const Eigen::MatrixXcd Ad(second_quantize_one_body(b, direct_sum(build_a_matrix(kg.fermions.grid), 2)));
                       const Eigen::MatrixXcd ref = I1 * (Hd * Ad - Ad * Hd);
                       const auto C = commutator_HI(b, kg, F1, F2, CommutatorMode::GridConsistent);
                       const double scale = ref.cwiseAbs().maxCoeff();
                       const double err = (Eigen::MatrixXcd(C.matrix) - ref).cwiseAbs().maxCoeff();
                       c.claim("relative_error", scale > 0.0 ? err / scale : err, "<=", cf.tol_commutator);
                       c.claim("basis_size", double(b.size()), "<=", 200.0);
                       c.details["max_entry"] = scale;
                   });
}

Check check_semigroup(Workspace& ws) {
    return guarded("semigroup", "w_t contraction, w_t* isometry, semigroup law and the form-domain bound", false,
                   [&](Check& c) {
                       const auto& cf = ws.config();
                       const double m = cf.m_e;
                       double contraction = 0.0;
                       {
                           const auto g = MomentumGrid::uniform_energy(60, 1.0, m);
                           for (double t : cf.semigroup_t)
                               contraction = std::max(contraction, spectral_norm(semigroup_w(t, g).cast<cplx>()));
                       }
                       double iso = 0.0;
                       {
                           const auto g = MomentumGrid::uniform_energy(400, 1.0, m);
                           const Eigen::VectorXd v = bump_in_q(g, 0.1, 0.5);
                           for (double t : {0.0123, 0.1, 0.3})
                               iso = std::max(iso, std::abs((semigroup_w_star(t, g) * v).norm() / v.norm() - 1.0));
                       }
                       double law = 0.0;
                       for (int n : {100, 400}) {
                           const auto g = MomentumGrid::uniform_energy(n, 1.0, m);
                           const Eigen::VectorXd v = bump_in_q(g, 0.4, 0.7);
                           for (auto [s, t] : {std::pair{0.05, 0.1}, {0.0311, 0.0777}, {0.2, 0.15}}) {
                               const Eigen::VectorXd lhs = semigroup_w(s, g) * (semigroup_w(t, g) * v);
                               const Eigen::VectorXd rhs = semigroup_w(s + t, g) * v;
                               law = std::max(law, (lhs - rhs).norm() / (g.step * g.step * v.norm()));
                           }
                       }
                       const auto fd = form_domain_check(ws.basis(), ws.H0(), ws.grid().fermions, cf.semigroup_t);
                       c.claim("contraction_norm", contraction, "<=", 1.0 + 1e-10);
                       c.claim("isometry_error", iso, "<=", 1e-6);
                       c.claim("law_residual_over_h2", law, "<=", 1.0);
                       c.claim("form_domain_norm", fd.max_norm, "<=", 1.0 + 1e-8);
                       c.details["t"] = cf.semigroup_t;
                       nlohmann::json rows = nlohmann::json::array();
                       for (const auto& r : fd.rows) rows.push_back({{"t", r.t}, {"adjoint", r.adjoint}, {"norm", r.norm}});
                       c.details["form_domain"] = rows;
                   });
}

Check check_mourre(Workspace& ws) {
    return guarded("mourre", "compressed [H, iA] on the window [delta, m_Z - delta] above E", false, [&](Check& c) {
        const auto& cf = ws.config();
        const auto& hyp = ws.hypothesis();
        c.details["hypothesis_report_digest"] = ws.hypothesis_digest();
        const auto mode = ws.F1().has_derivatives() ? CommutatorMode::Analytic : CommutatorMode::GridConsistent;
        const auto C = commutator_HI(ws.basis(), ws.grid(), ws.F1(), ws.F2(), mode, &hyp);
        const auto N = commutator_H0(ws.basis());
        const double delta = cf.mourre_delta * cf.m_e;

        // enumeration: at g = 0 every state with H0 level in the window carries N+ + N- particles
        const auto no = number_operators(ws.basis());
        double enum_min = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < ws.basis().size(); ++i) {
            const double e = ws.H0().matrix.coeff(Eigen::Index(i), Eigen::Index(i)).real();
            if (e >= delta - 1e-8 && e <= cf.m_z - delta + 1e-8)
                enum_min = std::min(enum_min, no.n_plus(Eigen::Index(i)) + no.n_minus(Eigen::Index(i)));
        }
        c.details["enumeration_min"] = enum_min;
        c.details["commutator_mode"] = mode == CommutatorMode::Analytic ? "analytic" : "grid_consistent";

        Curve t{"mourre", {"g [1]", "E [m_e]", "n_window [1]", "c_delta [1]"}, {}};
        std::vector<double> fr{0.0};
        fr.insert(fr.end(), cf.mourre_g.begin(), cf.mourre_g.end());
        for (double f : fr) {
            const double g = ws.coupling(f);
            const auto& eig = ws.low_spectrum(g);
            const auto M = SparseHermitianOperator::make(SpMat(N.matrix + g * C.matrix), "M");
            const auto rep = mourre_window_check(eig, M, eig.values(0), delta, cf.m_z);
            std::ostringstream name;
            name << "g/g0=" << f;
            c.claim(name.str() + " n_window", double(rep.n_window), ">", 0.0);
            if (f == 0.0)
                c.claim(name.str() + " c_delta", rep.c_delta, "==", enum_min, 1e-12);
            else
                c.claim(name.str() + " c_delta", rep.c_delta, ">", 1.0);
            t.rows.push_back({g, eig.values(0), double(rep.n_window), rep.c_delta});
        }
        c.curves.push_back(std::move(t));
    });
}

Check check_c11(Workspace& ws) {
    return guarded("c11", "partial integrals of t^-2 ||[W_t, [W_t, H_I]]|| for an admissible kernel and an infrared violator",
                   true, [&](Check& c) {
                       const auto& cf = ws.config();
                       const int n = cf.c11_nodes;
                       const KernelGrid kg{FermionModeTable(MomentumGrid::uniform_energy(n, cf.c11_q_max, cf.m_e),
                                                            std::vector<AngularQN>{{1, 1, -1}}),
                                           BosonModeSet::toy(2, 1, cf.m_z), cf.m_e};
                       auto run = [&](const GFamily& g) {
                           const auto s = make_s(cf.s_family);
                           const auto k1 = factorize_pair_kernel(model_kernel(1, kg, s, g).weighted(kg), n, 2);
                           const auto k2 = factorize_pair_kernel(model_kernel(2, kg, s, g).weighted(kg), n, 2);
                           return c11_diagnostic(kg.fermions.grid, k1, k2, {cf.c11_t_min, cf.c11_points});
                       };
                       const auto good = run(GFamily::smooth_bump(cf.c11_p_support, cf.k_support));
                       const auto bad = run(GFamily::infrared_violating(cf.c11_p_support, cf.k_support));
                       c.claim("admissible decade_ratio", good.decade_ratio, "<", 0.5);
                       c.claim("admissible refinement_change", good.refinement_change, "<", 0.05);
                       c.claim("violator decade_ratio", bad.decade_ratio, ">=", 1.0);
                       c.details["violator_refinement_change"] = bad.refinement_change;
                       for (auto [name, rep] : {std::pair{"c11_admissible", &good}, {"c11_violator", &bad}}) {
                           Curve t{name, {"t [1]", "norm [m_e]", "partial_integral [m_e]"}, {}};
                           for (std::size_t i = 0; i < rep->refined.t.size(); ++i)
                               t.rows.push_back({rep->refined.t[i], rep->refined.norm[i], rep->refined.partial[i]});
                           c.curves.push_back(std::move(t));
                       }
                   });
}

//==============================================================================
// Checks: lap
//==============================================================================

Check check_lap(Workspace& ws) {
    return guarded("lap_growth", "weighted resolvent growth exponent above the level-spacing floor under one refinement",
                   true, [&](Check& c) {
                       const auto& cf = ws.config();
                       const auto eps = log_space(cf.lap_eps_min, cf.lap_eps_max, cf.lap_eps_points);
                       std::vector<double> maxes;
                       bool bounded = true;
                       for (int k = 0; k < 2; ++k) {
                           const int n = cf.lap_nodes[k];
                           const auto rep = lap_probe(ws.lap_spectrum(n), cf.lap_lambdas, eps, 1e-8, cf.seed);
                           maxes.push_back(rep.max_exponent);
                           bounded = bounded && rep.bounded_by_unweighted;
                           Curve t{"lap_n" + std::to_string(n), {"lambda [m_e]", "eps [m_e]", "weighted [1/m_e]", "unweighted [1/m_e]"}, {}};
                           nlohmann::json cs = nlohmann::json::array();
                           for (const auto& cv : rep.curves) {
                               for (std::size_t i = 0; i < cv.eps.size(); ++i)
                                   t.rows.push_back({cv.lambda, cv.eps[i], cv.weighted[i], cv.unweighted[i]});
                               cs.push_back({{"lambda", cv.lambda}, {"floor", cv.floor}, {"exponent", cv.exponent},
                                             {"unweighted_exponent", cv.unweighted_exponent}, {"fit_points", cv.fit_points}});
                           }
                           c.details["n" + std::to_string(n)] = cs;
                           c.curves.push_back(std::move(t));
                       }
                       c.claim("coarse max_exponent", maxes[0], "<", 1.0);
                       c.claim("refined max_exponent", maxes[1], "<", 1.0);
                       c.claim("refined minus coarse", maxes[1] - maxes[0], "<", 0.0);
                       c.claim("weighted_le_unweighted", bounded, "==", 1.0);
                   });
}

Check check_local_decay(Workspace& ws) {
    return guarded("local_decay", "pre-recurrence decay exponent of ||<A>^-s e^{-itH} 1_window(H) <A>^-s||", true,
                   [&](Check& c) {
                       const auto& cf = ws.config();
                       const auto ts = log_space(cf.decay_t_min, cf.decay_t_max, cf.decay_t_points);
                       const double target = -(cf.lap_s - 0.5) + 0.2;
                       for (int k = 0; k < 2; ++k) {
                           const int n = cf.lap_nodes[k];
                           const auto& spec = ws.lap_spectrum(n);
                           // the window is absolute: the probe sector excludes the vacuum, whose energy is 0 at g = 0
                           const auto d = local_decay_probe(spec, 0.0, cf.decay_lo, cf.decay_hi, ts,
                                                            cf.decay_t_fit_min, 1e-8, cf.seed);
                           const std::string key = "n" + std::to_string(n);
                           c.details[key] = {{"exponent", d.exponent}, {"t_rec", d.t_rec}, {"fit_points", d.fit_points},
                                             {"n_window", d.n_window}};
                           Curve t{"decay_" + key, {"t [1/m_e]", "norm [1]"}, {}};
                           for (std::size_t i = 0; i < d.t.size(); ++i) t.rows.push_back({d.t[i], d.norm[i]});
                           c.curves.push_back(std::move(t));
                           if (k == 1) {
                               c.claim("refined exponent", d.exponent, "<=", target);
                               c.claim("refined fit_points", d.fit_points, ">=", 3.0);
                           }
                       }
                   });
}

//==============================================================================
// Suites and documents
//==============================================================================

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> n{"modes", "kernels", "assemble", "spectrum", "mourre", "lap"};
    return n;
}

SuiteResult run_suite(const std::string& name, Workspace& ws, const std::string& out_dir) {
    using Fn = Check (*)(Workspace&);
    static const std::map<std::string, std::vector<Fn>> table{
        {"modes", {check_kummer, check_magnitude_bounds, check_derivative_bounds, check_dirac_residual}},
        {"kernels", {check_polarization, check_kernel_hypotheses, check_kernel_constants}},
        {"assemble", {check_car_ccr, check_relative_bound, check_partition}},
        {"spectrum", {check_free_spectrum, check_ground_state, check_virial}},
        {"mourre", {check_h0_commutator, check_hi_commutator, check_semigroup, check_mourre, check_c11}},
        {"lap", {check_lap, check_local_decay}},
    };
    auto it = table.find(name);
    if (it == table.end()) throw ConfigError("unknown suite " + name);

    SuiteResult r;
    r.suite = name;
    for (Fn f : it->second) r.checks.push_back(f(ws));

    namespace fs = std::filesystem;
    if (!out_dir.empty()) fs::create_directories(out_dir);
    for (const auto& ch : r.checks)
        for (const auto& cv : ch.curves) {
            r.artifacts.push_back(cv.name + ".csv");
            if (!out_dir.empty()) write_curve_csv((fs::path(out_dir) / (cv.name + ".csv")).string(), cv);
        }
    if (name == "kernels") {
        for (auto [file, k] : {std::pair{"kernel_F1.bin", &ws.F1()}, {"kernel_F2.bin", &ws.F2()}}) {
            r.artifacts.push_back(file);
            r.artifacts.push_back(std::string(file) + ".json");
            if (!out_dir.empty()) write_kernel((fs::path(out_dir) / file).string(), *k, &ws.hypothesis());
        }
    }
    if (name == "assemble") {
        for (auto [file, op] : {std::pair{"H0.bin", &ws.H0()}, {"HI.bin", &ws.HI()}}) {
            r.artifacts.push_back(file);
            if (!out_dir.empty()) write_operator_binary((fs::path(out_dir) / file).string(), *op);
        }
    }
    return r;
}

nlohmann::json result_document(const SuiteResult& r, Workspace& ws) {
    nlohmann::json d;
    d["schema_version"] = kResultSchemaVersion;
    d["suite"] = r.suite;
    d["config_digest"] = ws.config().digest();
    d["hypothesis_report_digest"] = ws.hypothesis_digest();
    d["basis_digest"] = ws.basis().digest();
    d["pass"] = r.pass();
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : r.checks) {
        nlohmann::json j;
        j["id"] = c.id;
        j["description"] = c.description;
        j["kind"] = c.diagnostic ? "diagnostic" : "assertion";
        j["pass"] = c.pass();
        nlohmann::json cl = nlohmann::json::array();
        for (const auto& x : c.claims) {
            nlohmann::json e{{"name", x.name}, {"relation", x.relation}, {"bound", x.bound}, {"holds", x.holds()}};
            e["value"] = std::isfinite(x.value) ? nlohmann::json(x.value) : nlohmann::json(std::to_string(x.value));
            if (x.relation == "==") e["tolerance"] = x.tolerance;
            cl.push_back(e);
        }
        j["claims"] = cl;
        j["details"] = c.details;
        if (!c.error.empty()) j["error"] = c.error;
        checks.push_back(j);
    }
    d["checks"] = checks;
    d["artifacts"] = r.artifacts;
    return d;
}

nlohmann::json timing_document(const std::vector<SuiteResult>& rs) {
    nlohmann::json d;
    d["schema_version"] = kResultSchemaVersion;
    double total = 0.0;
    for (const auto& r : rs) {
        nlohmann::json s;
        double sum = 0.0;
        for (const auto& c : r.checks) {
            s["checks"][c.id] = c.seconds;
            sum += c.seconds;
        }
        s["seconds"] = sum;
        total += sum;
        d["suites"][r.suite] = s;
    }
    d["seconds"] = total;
    return d;
}

void write_curve_csv(const std::string& path, const Curve& c) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < c.columns.size(); ++i) os << (i ? "," : "") << c.columns[i];
    os << "\n" << std::setprecision(17);
    for (const auto& row : c.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << "\n";
    }
}

} // namespace zdecay
