#include "zdecay/kernels.hpp"

#include "json.hpp"

#include <unsupported/Eigen/FFT>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

namespace zdecay {

namespace {
constexpr double kPi = std::numbers::pi;
const cplx I1(0.0, 1.0);
} // namespace

//==============================================================================
// Conventions
//==============================================================================

const DiracAlgebra& DiracAlgebra::standard() {
    static const DiracAlgebra alg = [] {
        DiracAlgebra a;
        Eigen::Matrix2cd s[3], id = Eigen::Matrix2cd::Identity(), z = Eigen::Matrix2cd::Zero();
        s[0] << 0, 1, 1, 0;
        s[1] << 0, -I1, I1, 0;
        s[2] << 1, 0, 0, -1;
        a.gamma[0].setZero();
        a.gamma[0].topLeftCorner<2, 2>() = id;
        a.gamma[0].bottomRightCorner<2, 2>() = -id;
        for (int i = 0; i < 3; ++i) {
            a.gamma[i + 1].setZero();
            a.gamma[i + 1].topRightCorner<2, 2>() = s[i];
            a.gamma[i + 1].bottomLeftCorner<2, 2>() = -s[i];
        }
        a.gamma5.setZero();
        a.gamma5.topRightCorner<2, 2>() = id;
        a.gamma5.bottomLeftCorner<2, 2>() = id;
        (void)z;
        return a;
    }();
    return alg;
}

Vec4c polarization(const Vec3& k, int lambda, double m_z) {
    if (m_z <= 0.0) throw std::invalid_argument("polarization: m_Z must be positive");
    const double r2 = std::sqrt(0.5);
    Eigen::Vector3cd e;
    switch (lambda) {
    case 1: e << -r2, -r2 * I1, 0.0; break;
    case 0: e << 0.0, 0.0, 1.0; break;
    case -1: e << r2, -r2 * I1, 0.0; break;
    default: throw std::invalid_argument("polarization: lambda must be -1, 0 or 1");
    }
    const double w = std::sqrt(k.squaredNorm() + m_z * m_z);
    const cplx ke = k(0) * e(0) + k(1) * e(1) + k(2) * e(2);
    Vec4c out;
    out(0) = ke / m_z;
    for (int i = 0; i < 3; ++i) out(i + 1) = e(i) + ke * k(i) / (m_z * (w + m_z));
    return out;
}

double polarization_ratio(const Vec3& k, int lambda, double m_z) {
    const Vec4c eps = polarization(k, lambda, m_z);
    const double w = std::sqrt(k.squaredNorm() + m_z * m_z);
    double mx = 0.0;
    for (int mu = 0; mu < 4; ++mu) mx = std::max(mx, std::abs(eps(mu)));
    return mx / std::sqrt(2.0 * w) / std::pow(1.0 + k.squaredNorm(), 0.25);
}

bool PolarizationFit::stable(double tol) const {
    return std::isfinite(c_mz) && std::abs(c_mz_refined - c_mz) <= tol * c_mz_refined;
}

PolarizationFit fit_polarization_constant(double m_z, double k_max, int n_k) {
    const Vec3 dirs[] = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 1).normalized(),
                         Vec3(1, -2, 0.5).normalized(), Vec3(-0.3, 0.1, -1).normalized()};
    auto sup = [&](int n) {
        double best = 0.0;
        for (const auto& d : dirs)
            for (int lam : {-1, 0, 1})
                for (int i = 0; i <= n; ++i)
                    best = std::max(best, polarization_ratio(d * (k_max * i / n), lam, m_z));
        return best;
    };
    return {sup(n_k), sup(2 * n_k), k_max};
}

//==============================================================================
// Families
//==============================================================================

std::array<double, 3> bump3(double x) {
    if (std::abs(x) >= 1.0) return {0.0, 0.0, 0.0};
    const double u = 1.0 - x * x;
    const double b = std::exp(1.0 - 1.0 / u);
    const double b1 = -2.0 * x * b / (u * u);
    const double b2 = b * (4.0 * x * x / (u * u * u * u) - 2.0 / (u * u) - 8.0 * x * x / (u * u * u));
    return {b, b1, b2};
}

SFamily SFamily::unit() {
    return {"unit", [](double, double) { return std::array<double, 6>{1, 0, 0, 0, 0, 0}; }};
}

SFamily SFamily::oscillatory() {
    return {"cos(p1p2)/(1+p1p2)", [](double p1, double p2) {
                const double u = p1 * p2, c = std::cos(u), s = std::sin(u), d = 1.0 + u;
                const double f0 = c / d;
                const double f1 = -s / d - c / (d * d);
                const double f2 = -c / d + 2.0 * s / (d * d) + 2.0 * c / (d * d * d);
                return std::array<double, 6>{f0, p2 * f1, p1 * f1, p2 * p2 * f2, f1 + u * f2, p1 * p1 * f2};
            }};
}

bool GrowthReport::pass() const {
    return std::isfinite(sup_coarse) && std::isfinite(sup_fine) && sup_fine <= 1.5 * sup_coarse;
}

GrowthReport check_s_growth(const SFamily& s, int n) {
    auto sup = [&](double lo) {
        double best = 0.0;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const double p1 = std::exp(std::log(lo) * (1.0 - double(a) / (n - 1)));
                const double p2 = std::exp(std::log(lo) * (1.0 - double(b) / (n - 1)));
                const auto d = s.eval(p1, p2);
                const double w[6] = {1.0, p1, p2, p1 * p1, p1 * p2, p2 * p2};
                for (int i = 0; i < 6; ++i) {
                    const double v = std::abs(d[i]) * w[i];
                    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
                    best = std::max(best, v);
                }
            }
        return best;
    };
    return {sup(1e-3), sup(1e-6)};
}

namespace {

// radial profile beta(p) with two derivatives
using Profile = std::function<std::array<double, 3>(double)>;

GFamily separable(std::string name, double P, double K, double amp, Profile beta) {
    GFamily g;
    g.name = std::move(name);
    g.p_support = P;
    g.k_support = K;
    g.eval = [=](double p1, const AngularQN&, double p2, const AngularQN&, const BosonMode& b) {
        const auto c = bump3(b.k.norm() / K);
        const auto u = beta(p1), v = beta(p2);
        const double a = amp * c[0];
        return std::array<cplx, 6>{a * u[0] * v[0], a * u[1] * v[0], a * u[0] * v[1],
                                   a * u[2] * v[0], a * u[1] * v[1], a * u[0] * v[2]};
    };
    return g;
}

} // namespace

GFamily GFamily::smooth_bump(double P, double K, double amplitude) {
    return separable("p^3 bump", P, K, amplitude, [P](double p) {
        const auto b = bump3(p / P);
        return std::array<double, 3>{p * p * p * b[0], 3 * p * p * b[0] + p * p * p * b[1] / P,
                                     6 * p * b[0] + 6 * p * p * b[1] / P + p * p * p * b[2] / (P * P)};
    });
}

GFamily GFamily::infrared_violating(double P, double K, double amplitude) {
    return separable("bump", P, K, amplitude, [P](double p) {
        const auto b = bump3(p / P);
        return std::array<double, 3>{b[0], b[1] / P, b[2] / (P * P)};
    });
}

GFamily GFamily::with_jump(double P, double K) {
    GFamily g = smooth_bump(P, K);
    auto inner = g.eval;
    g.name = "p^3 bump with jump";
    g.eval = [inner, P](double p1, const AngularQN& g1, double p2, const AngularQN& g2, const BosonMode& b) {
        std::array<cplx, 6> v{};
        if (p1 < 0.5 * P) v[0] = inner(p1, g1, p2, g2, b)[0];
        return v;
    };
    return g;
}

GFamily GFamily::zero() {
    GFamily g;
    g.name = "zero";
    g.p_support = 1.0;
    g.k_support = 1.0;
    g.eval = [](double, const AngularQN&, double, const AngularQN&, const BosonMode&) {
        return std::array<cplx, 6>{};
    };
    return g;
}

//==============================================================================
// Kernel tensors
//==============================================================================

bool KernelTensor::is_zero() const {
    for (const auto& v : F)
        if (v != 0.0) return false;
    return true;
}

std::vector<cplx> KernelTensor::weighted(const KernelGrid& grid) const {
    std::vector<cplx> out(F.size());
    const auto& fm = grid.fermions.modes;
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j)
            for (std::size_t k = 0; k < n3; ++k) {
                const double w = std::sqrt(fm[i].w * fm[j].w * grid.bosons.modes[k].w);
                out[index(i, j, k)] = w * F[index(i, j, k)];
            }
    return out;
}

double kernel_l2_norm(const std::vector<cplx>& F, const KernelGrid& grid) {
    const auto& fm = grid.fermions.modes;
    const std::size_t nf = fm.size(), nb = grid.bosons.size();
    double s = 0.0;
    for (std::size_t i = 0; i < nf; ++i)
        for (std::size_t j = 0; j < nf; ++j)
            for (std::size_t k = 0; k < nb; ++k)
                s += fm[i].w * fm[j].w * grid.bosons.modes[k].w * std::norm(F[(i * nf + j) * nb + k]);
    return std::sqrt(s);
}

KernelTensor model_kernel(int alpha, const KernelGrid& grid, const SFamily& s, const GFamily& g) {
    if (alpha != 1 && alpha != 2) throw std::invalid_argument("model_kernel: alpha must be 1 or 2");
    if (!check_s_growth(s).pass())
        throw std::invalid_argument("model_kernel: s family '" + s.name + "' violates the growth estimate");
    KernelTensor t;
    t.alpha = alpha;
    t.provenance = KernelProvenance::Model;
    t.n1 = t.n2 = grid.fermions.size();
    t.n3 = grid.bosons.size();
    const std::size_t total = t.n1 * t.n2 * t.n3;
    for (auto* v : {&t.F, &t.G, &t.F1, &t.F2, &t.F11, &t.F12, &t.F22}) v->assign(total, 0.0);
    const auto& fm = grid.fermions.modes;
    for (std::size_t i = 0; i < t.n1; ++i)
        for (std::size_t j = 0; j < t.n2; ++j) {
            const double p1 = fm[i].p, p2 = fm[j].p, P = p1 * p2;
            const auto d = s.eval(p1, p2);
            const double S = d[0], S1 = d[1], S2 = d[2], S11 = d[3], S12 = d[4], S22 = d[5];
            for (std::size_t k = 0; k < t.n3; ++k) {
                const auto G = g.eval(p1, fm[i].qn, p2, fm[j].qn, grid.bosons.modes[k]);
                const cplx G0 = G[0], G1 = G[1], G2 = G[2], G11 = G[3], G12 = G[4], G22 = G[5];
                const std::size_t x = t.index(i, j, k);
                t.G[x] = G0;
                t.F[x] = P * S * G0;
                t.F1[x] = p2 * S * G0 + P * S1 * G0 + P * S * G1;
                t.F2[x] = p1 * S * G0 + P * S2 * G0 + P * S * G2;
                t.F11[x] = 2.0 * (p2 * S1 * G0 + p2 * S * G1 + P * S1 * G1) + P * S11 * G0 + P * S * G11;
                t.F22[x] = 2.0 * (p1 * S2 * G0 + p1 * S * G2 + P * S2 * G2) + P * S22 * G0 + P * S * G22;
                t.F12[x] = S * G0 + p2 * S2 * G0 + p2 * S * G2 + p1 * S1 * G0 + P * S12 * G0 + P * S1 * G2 +
                           p1 * S * G1 + P * S2 * G1 + P * S * G12;
            }
        }
    t.description = "model: p1 p2 s G~, s = " + s.name + ", G~ = " + g.name;
    t.l2_norm = kernel_l2_norm(t.F, grid);
    return t;
}

KernelTensor kernel_from_values(int alpha, const KernelGrid& grid, std::vector<cplx> F, std::string description) {
    KernelTensor t;
    t.alpha = alpha;
    t.n1 = t.n2 = grid.fermions.size();
    t.n3 = grid.bosons.size();
    if (F.size() != t.n1 * t.n2 * t.n3) throw std::invalid_argument("kernel_from_values: size mismatch");
    t.F = std::move(F);
    t.G = t.F;
    t.description = std::move(description);
    t.l2_norm = kernel_l2_norm(t.F, grid);
    return t;
}

//==============================================================================
// Physical kernel
//==============================================================================

namespace {

struct CubaturePoint {
    Vec3 x;
    double r, theta, phi, weight;
};

std::vector<CubaturePoint> ball_cubature(double r0, const CubatureSpec& c) {
    const auto radial = gauss_legendre(c.n_radial, 0.0, r0);
    const auto sph = sphere_product_rule(c.n_theta, c.n_phi);
    std::vector<CubaturePoint> pts;
    for (std::size_t a = 0; a < radial.size(); ++a)
        for (std::size_t b = 0; b < sph.size(); ++b) {
            const double r = radial.nodes[a], th = sph.theta[b], ph = sph.phi[b];
            const Vec3 x(r * std::sin(th) * std::cos(ph), r * std::sin(th) * std::sin(ph), r * std::cos(th));
            pts.push_back({x, r, th, ph, radial.weights[a] * r * r * sph.weight[b]});
        }
    return pts;
}

// Gamma^mu = gamma^0 gamma^mu (g'_V - gamma5), so that psibar gamma^mu (...) chi = psi^dag Gamma^mu chi
std::array<Eigen::Matrix4cd, 4> vertex(double gv) {
    const auto& alg = DiracAlgebra::standard();
    const Eigen::Matrix4cd v = gv * Eigen::Matrix4cd::Identity() - alg.gamma5;
    std::array<Eigen::Matrix4cd, 4> out;
    for (int mu = 0; mu < 4; ++mu) out[mu] = alg.gamma[0] * alg.gamma[mu] * v;
    return out;
}

Vec4c lower(const Vec4c& v) {
    Vec4c out = v;
    for (int mu = 1; mu < 4; ++mu) out(mu) = -v(mu);
    return out;
}

} // namespace

cplx physical_h_custom(const FermionMode& xi1, const FermionMode& xi2, const Vec3& k, const Vec4c& eps_lower,
                       int phase_sign, double m_z, const PhysicalParams& par) {
    const auto G = vertex(par.g_v_prime);
    Eigen::Matrix4cd M = Eigen::Matrix4cd::Zero();
    for (int mu = 0; mu < 4; ++mu) M += eps_lower(mu) * G[mu];
    const double norm = 1.0 / std::sqrt(2.0 * std::sqrt(k.squaredNorm() + m_z * m_z));
    cplx sum = 0.0;
    for (const auto& pt : ball_cubature(par.f_loc.r0, par.cubature)) {
        const double fl = par.f_loc(pt.r);
        if (fl == 0.0) continue;
        const Spinor4 a = psi(EnergySign::Plus, xi1.p, xi1.qn, pt.x, par.m_e);
        const Spinor4 b = psi_tilde_minus(xi2.p, xi2.qn, pt.x, par.m_e);
        sum += pt.weight * fl * std::polar(1.0, phase_sign * k.dot(pt.x)) * a.dot(M * b);
    }
    return sum * norm;
}

cplx physical_h(int alpha, const FermionMode& xi1, const FermionMode& xi2, const BosonMode& xi3, double m_z,
                const PhysicalParams& par) {
    const Vec4c eps = polarization(xi3.k, xi3.lambda, m_z);
    if (alpha == 1) return physical_h_custom(xi1, xi2, xi3.k, lower(eps), +1, m_z, par);
    if (alpha == 2) return physical_h_custom(xi1, xi2, xi3.k, lower(eps.conjugate()), -1, m_z, par);
    throw std::invalid_argument("physical_h: alpha must be 1 or 2");
}

std::vector<cplx> physical_h_table(int alpha, const KernelGrid& grid, const PhysicalParams& par) {
    if (alpha != 1 && alpha != 2) throw std::invalid_argument("physical_h_table: alpha must be 1 or 2");
    const auto& fm = grid.fermions.modes;
    const auto& chans = grid.fermions.channels;
    const int nf = int(fm.size()), nb = int(grid.bosons.size()), nc = int(chans.size());
    const double m_z = grid.bosons.mass;
    const auto radial = gauss_legendre(par.cubature.n_radial, 0.0, par.f_loc.r0);
    const auto sph = sphere_product_rule(par.cubature.n_theta, par.cubature.n_phi);
    const auto V = vertex(par.g_v_prime);

    // boson factors eps_mu / sqrt(2 omega3) and the per-boson vertex matrix
    std::vector<Eigen::Matrix4cd> Mk(nb);
    std::vector<Vec3> kv(nb);
    for (int k = 0; k < nb; ++k) {
        const auto& b = grid.bosons.modes[k];
        Vec4c eps = polarization(b.k, b.lambda, m_z);
        if (alpha == 2) eps = eps.conjugate();
        const Vec4c el = lower(eps) / std::sqrt(2.0 * grid.bosons.omega3(k));
        Mk[k].setZero();
        for (int mu = 0; mu < 4; ++mu) Mk[k] += el(mu) * V[mu];
        kv[k] = alpha == 1 ? b.k : Vec3(-b.k);
    }

    // angular spinors per channel: Phi1, Phi2 for (m, kappa) and (-m, -kappa)
    const std::size_t na = sph.size();
    std::vector<Spinor2> u1(nc * na), u2(nc * na), v1(nc * na), v2(nc * na);
    for (int c = 0; c < nc; ++c)
        for (std::size_t a = 0; a < na; ++a) {
            const auto& q = chans[c];
            u1[c * na + a] = spinor_phi(1, q.two_m, q.kappa, sph.theta[a], sph.phi[a]);
            u2[c * na + a] = spinor_phi(2, q.two_m, q.kappa, sph.theta[a], sph.phi[a]);
            v1[c * na + a] = spinor_phi(1, -q.two_m, -q.kappa, sph.theta[a], sph.phi[a]);
            v2[c * na + a] = spinor_phi(2, -q.two_m, -q.kappa, sph.theta[a], sph.phi[a]);
        }

    std::vector<Eigen::MatrixXcd> acc(nb, Eigen::MatrixXcd::Zero(nf, nf));
    Eigen::Matrix<cplx, 4, Eigen::Dynamic> U(4, nf), W(4, nf);
    std::vector<cplx> gp(nf), fp(nf), gm(nf), fm_(nf);
    for (std::size_t ir = 0; ir < radial.size(); ++ir) {
        const double r = radial.nodes[ir];
        const double fl = par.f_loc(r);
        if (fl == 0.0) continue;
        for (int i = 0; i < nf; ++i) {
            const auto& q = fm[i].qn;
            gp[i] = radial_g(q.kappa, EnergySign::Plus, fm[i].p, r, par.m_e);
            fp[i] = radial_f(q.kappa, EnergySign::Plus, fm[i].p, r, par.m_e);
            gm[i] = radial_g(-q.kappa, EnergySign::Minus, fm[i].p, r, par.m_e);
            fm_[i] = radial_f(-q.kappa, EnergySign::Minus, fm[i].p, r, par.m_e);
        }
        for (std::size_t a = 0; a < na; ++a) {
            const double th = sph.theta[a], ph = sph.phi[a];
            const Vec3 x(r * std::sin(th) * std::cos(ph), r * std::sin(th) * std::sin(ph), r * std::cos(th));
            const double wt = radial.weights[ir] * r * r * sph.weight[a] * fl;
            for (int i = 0; i < nf; ++i) {
                const std::size_t c = std::size_t(fm[i].channel) * na + a;
                U(0, i) = I1 * gp[i] * u1[c](0);
                U(1, i) = I1 * gp[i] * u1[c](1);
                U(2, i) = -fp[i] * u2[c](0);
                U(3, i) = -fp[i] * u2[c](1);
                W(0, i) = I1 * gm[i] * v1[c](0);
                W(1, i) = I1 * gm[i] * v1[c](1);
                W(2, i) = -fm_[i] * v2[c](0);
                W(3, i) = -fm_[i] * v2[c](1);
            }
            const Eigen::MatrixXcd Ud = U.adjoint();
            for (int k = 0; k < nb; ++k) {
                const cplx ph_k = wt * std::polar(1.0, kv[k].dot(x));
                acc[k].noalias() += Ud * (ph_k * (Mk[k] * W));
            }
        }
    }
    std::vector<cplx> out(std::size_t(nf) * nf * nb);
    for (int i = 0; i < nf; ++i)
        for (int j = 0; j < nf; ++j)
            for (int k = 0; k < nb; ++k) out[(std::size_t(i) * nf + j) * nb + k] = acc[k](i, j);
    return out;
}

KernelTensor physical_kernel(int alpha, const KernelGrid& grid, const GFamily& g, const PhysicalParams& par) {
    KernelTensor t;
    t.alpha = alpha;
    t.provenance = KernelProvenance::Physical;
    t.n1 = t.n2 = grid.fermions.size();
    t.n3 = grid.bosons.size();
    const auto h = physical_h_table(alpha, grid, par);
    t.F.resize(h.size());
    t.G.resize(h.size());
    const auto& fm = grid.fermions.modes;
    for (std::size_t i = 0; i < t.n1; ++i)
        for (std::size_t j = 0; j < t.n2; ++j)
            for (std::size_t k = 0; k < t.n3; ++k) {
                const std::size_t x = t.index(i, j, k);
                t.G[x] = g(fm[i].p, fm[i].qn, fm[j].p, fm[j].qn, grid.bosons.modes[k]);
                t.F[x] = h[x] * t.G[x];
            }
    t.description = "physical: h G, G = " + g.name;
    t.l2_norm = kernel_l2_norm(t.F, grid);
    return t;
}

CubatureConvergence physical_h_convergence(int alpha, const KernelGrid& grid, const PhysicalParams& par,
                                           int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> F(0, grid.fermions.size() - 1), B(0, grid.bosons.size() - 1);
    PhysicalParams fine = par;
    fine.cubature = par.cubature.doubled();
    CubatureConvergence rep;
    double max_diff = 0.0;
    for (int s = 0; s < samples; ++s) {
        const auto& a = grid.fermions.modes[F(rng)];
        const auto& b = grid.fermions.modes[F(rng)];
        const auto& z = grid.bosons.modes[B(rng)];
        const cplx h0 = physical_h(alpha, a, b, z, grid.bosons.mass, par);
        const cplx h1 = physical_h(alpha, a, b, z, grid.bosons.mass, fine);
        max_diff = std::max(max_diff, std::abs(h1 - h0));
        rep.max_abs_h = std::max(rep.max_abs_h, std::abs(h1));
    }
    rep.samples = samples;
    rep.max_rel_diff = rep.max_abs_h > 0.0 ? max_diff / rep.max_abs_h : max_diff;
    return rep;
}

//==============================================================================
// Hypotheses and constants
//==============================================================================

std::vector<double> a_weights(const FermionModeTable& modes, const LocalizationFn& f_loc, double m_e) {
    std::map<std::pair<int, int>, double> cache;
    std::vector<double> out;
    for (const auto& m : modes.modes) {
        const auto key = std::pair{m.qn.gamma(), m.node};
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, weight_A(m.p, m.qn.gamma(), f_loc, m_e)).first;
        out.push_back(it->second);
    }
    return out;
}

double check_hypothesis1(const std::vector<cplx>& G, const KernelGrid& grid, const std::vector<double>& A) {
    const auto& fm = grid.fermions.modes;
    const std::size_t nf = fm.size(), nb = grid.bosons.size();
    if (G.size() != nf * nf * nb || A.size() != nf) throw std::invalid_argument("check_hypothesis1: size mismatch");
    const double mz2 = grid.bosons.mass * grid.bosons.mass;
    double s = 0.0;
    for (std::size_t i = 0; i < nf; ++i)
        for (std::size_t j = 0; j < nf; ++j)
            for (std::size_t k = 0; k < nb; ++k) {
                const auto& b = grid.bosons.modes[k];
                s += fm[i].w * fm[j].w * b.w * A[i] * A[i] * A[j] * A[j] * std::sqrt(b.k.squaredNorm() + mz2) *
                     std::norm(G[(i * nf + j) * nb + k]);
            }
    return s;
}

bool HypothesisReport::hyp1_pass() const { return std::isfinite(hyp1_value); }

std::string HypothesisReport::failed_items() const {
    std::string s;
    if (!hyp1_pass()) s += "hyp1 ";
    if (!hyp2_support_ok) s += "hyp2(i) ";
    if (!hyp2_sobolev_bounded) s += "hyp2(ii) ";
    if (!hyp2_infrared_ok) s += "hyp2(iii) ";
    if (!s.empty()) s.pop_back();
    return s;
}

namespace {

// Even extension of one (gamma1, gamma2, boson) slice on a zero-padded
// M x M grid; returns sum (1 + x1^2 + x2^2)^{1+eps} |G^|^2 dx1 dx2.
struct SobolevGrid {
    int n, M;
    double h, dx;
    std::vector<double> weight; // (1 + x1^2 + x2^2)^{1+eps} dx^2, M x M
    Eigen::FFT<double> fft;

    SobolevGrid(double P, int n_, int padding, double eps) : n(n_) {
        h = P / n;
        M = 1;
        while (M < padding * (2 * n + 1)) M *= 2;
        dx = 2.0 * kPi / (M * h);
        weight.resize(std::size_t(M) * M);
        for (int a = 0; a < M; ++a)
            for (int b = 0; b < M; ++b) {
                const double x1 = (a <= M / 2 ? a : a - M) * dx, x2 = (b <= M / 2 ? b : b - M) * dx;
                weight[std::size_t(a) * M + b] = std::pow(1.0 + x1 * x1 + x2 * x2, 1.0 + eps) * dx * dx;
            }
    }

    double slice(const std::function<cplx(double, double)>& g) {
        std::vector<cplx> base(std::size_t(n + 1) * (n + 1));
        bool any = false;
        for (int a = 0; a <= n; ++a)
            for (int b = 0; b <= n; ++b) {
                base[std::size_t(a) * (n + 1) + b] = g(a * h, b * h);
                any = any || base[std::size_t(a) * (n + 1) + b] != 0.0;
            }
        if (!any) return 0.0;
        // slices that are multiples of an earlier one reuse its transform
        const Eigen::Map<const Eigen::VectorXcd> v(base.data(), Eigen::Index(base.size()));
        for (const auto& [ref, val] : seen) {
            const cplx c = ref.dot(v) / ref.squaredNorm();
            if ((v - c * ref).norm() <= 1e-13 * v.norm()) return std::norm(c) * val;
        }
        const double val = transform(base);
        if (seen.size() < 64) seen.emplace_back(v, val);
        return val;
    }

    std::vector<std::pair<Eigen::VectorXcd, double>> seen;

    double transform(const std::vector<cplx>& base) {
        const int len = 2 * n + 1;
        std::vector<std::vector<cplx>> rows(len, std::vector<cplx>(M, 0.0));
        std::vector<cplx> tmp(M);
        for (int a = 0; a < len; ++a) {
            for (int b = 0; b < len; ++b) tmp[b] = base[std::size_t(std::abs(a - n)) * (n + 1) + std::abs(b - n)];
            std::fill(tmp.begin() + len, tmp.end(), 0.0);
            fft.fwd(rows[a], tmp);
        }
        std::vector<cplx> col(M, 0.0), out(M);
        const double scale = h * h / (2.0 * kPi);
        double sum = 0.0;
        for (int b = 0; b < M; ++b) {
            for (int a = 0; a < len; ++a) col[a] = rows[a][b];
            fft.fwd(out, col);
            for (int a = 0; a < M; ++a) sum += weight[std::size_t(a) * M + b] * std::norm(scale * out[a]);
        }
        return sum;
    }
};

} // namespace

HypothesisReport check_hypothesis2(const GFamily& g, const KernelGrid& grid, double epsilon, const Hyp2Options& opt) {
    HypothesisReport rep;
    rep.epsilon = epsilon;
    const auto& chans = grid.fermions.channels;
    const auto& bos = grid.bosons.modes;
    const double P = g.p_support, K = g.k_support;

    // (i) samples outside the declared box
    rep.hyp2_support_ok = true;
    std::vector<BosonMode> far;
    for (double f : {1.05, 1.3, 2.0})
        for (int lam : {-1, 0, 1}) far.push_back({Vec3(0.6, -0.48, 0.64) * K * f, lam, 1.0});
    for (const auto& c1 : chans)
        for (const auto& c2 : chans) {
            for (int m = 1; m <= 5 && rep.hyp2_support_ok; ++m)
                for (int a = 0; a <= opt.n_aux; ++a) {
                    const double out = P * (1.0 + 0.1 * m), in = P * a / opt.n_aux;
                    for (const auto& b : bos)
                        if (g(out, c1, in, c2, b) != 0.0 || g(in, c1, out, c2, b) != 0.0) rep.hyp2_support_ok = false;
                }
            for (const auto& b : far)
                for (int a = 0; a <= opt.n_aux; a += 4)
                    for (int c = 0; c <= opt.n_aux; c += 4)
                        if (g(P * a / opt.n_aux, c1, P * c / opt.n_aux, c2, b) != 0.0) rep.hyp2_support_ok = false;
        }

    // (ii) weighted Fourier-side norm at two resolutions
    auto norm_at = [&](int n) {
        SobolevGrid sg(P, n, opt.padding, epsilon);
        double total = 0.0;
        for (const auto& c1 : chans)
            for (const auto& c2 : chans)
                for (const auto& b : bos) {
                    auto slice = [&](double p1, double p2) { return g(p1, c1, p2, c2, b); };
                    total += b.w * sg.slice(slice);
                }
        return total;
    };
    rep.hyp2_sobolev_norm = norm_at(opt.n_aux);
    rep.hyp2_sobolev_norm_refined = norm_at(2 * opt.n_aux);
    rep.hyp2_sobolev_bounded = std::isfinite(rep.hyp2_sobolev_norm_refined) &&
                               rep.hyp2_sobolev_norm_refined <= opt.growth_tol * rep.hyp2_sobolev_norm;

    // (iii) vanishing at p = 0 for gamma_j = 1 channels
    double gmax = 0.0, at_zero = 0.0;
    for (const auto& c1 : chans)
        for (const auto& c2 : chans)
            for (const auto& b : bos)
                for (int a = 0; a <= opt.n_aux; ++a) {
                    const double p = P * a / opt.n_aux;
                    for (int c = 0; c <= opt.n_aux; c += 2)
                        gmax = std::max(gmax, std::abs(g(p, c1, P * c / opt.n_aux, c2, b)));
                    if (c1.gamma() == 1 || c2.gamma() == 1)
                        at_zero = std::max({at_zero, std::abs(g(0.0, c1, p, c2, b)), std::abs(g(p, c1, 0.0, c2, b))});
                }
    rep.hyp2_infrared_ok = at_zero <= 1e-14 * gmax;
    return rep;
}

bool Constants::g0_unbounded() const { return std::isinf(g0_max); }

Constants constants(const KernelTensor& t1, const KernelTensor& t2, const KernelGrid& grid,
                    const std::vector<double>& A, double c_mz, double beta, double eta) {
    if (beta <= 0.0 || eta <= 0.0) throw std::invalid_argument("constants: beta and eta must be positive");
    Constants c;
    c.beta = beta;
    c.eta = eta;
    c.c_mz = c_mz;
    c.c_z = kCZOverCmZ * c_mz;
    const auto& fm = grid.fermions.modes;
    const std::size_t nf = fm.size(), nb = grid.bosons.size();
    double k1 = 0.0, k2 = 0.0;
    for (const KernelTensor* t : {&t1, &t2}) {
        if (t->G.size() != nf * nf * nb) throw std::invalid_argument("constants: kernel size mismatch");
        for (std::size_t i = 0; i < nf; ++i)
            for (std::size_t j = 0; j < nf; ++j)
                for (std::size_t k = 0; k < nb; ++k) {
                    const auto& b = grid.bosons.modes[k];
                    const double v = fm[i].w * fm[j].w * b.w * A[i] * A[i] * A[j] * A[j] *
                                     std::norm(t->G[(i * nf + j) * nb + k]);
                    k1 += v;
                    k2 += v * std::sqrt(b.k.squaredNorm() + 1.0);
                }
    }
    const double m2 = grid.m_e * grid.m_e;
    c.K1 = c.c_z * std::sqrt(k1);
    c.K2 = c.c_z * std::sqrt(k2);
    c.K = c.K2;
    c.C1b = std::sqrt(1.0 / m2 + 1.0 + 2.0 * beta);
    c.C2be = std::sqrt(eta / m2 * (1.0 + 2.0 * beta));
    c.B1b = std::sqrt(1.0 + 1.0 / (2.0 * beta));
    c.B2be = std::sqrt(eta * (1.0 + 1.0 / (2.0 * beta)) + 1.0 / (4.0 * eta));
    c.C_be = c.C1b + c.C2be;
    c.B_be = c.B1b + c.B2be;
    c.g0_max = c.K1 == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / (c.K1 * std::sqrt(1.0 / m2 + 1.0));
    return c;
}

//==============================================================================
// Persistence
//==============================================================================

namespace {

constexpr char kMagic[4] = {'Z', 'D', 'K', 'T'};

template <class T> void put(std::ofstream& os, T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        os.write(bytes.data(), sizeof(T));
    } else {
        os.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
}

template <class T> T get(std::ifstream& is) {
    std::array<char, sizeof(T)> bytes;
    is.read(bytes.data(), sizeof(T));
    if (!is) throw std::runtime_error("read_kernel: truncated file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

nlohmann::json report_to_json(const HypothesisReport& r) {
    return {{"hyp1_value", r.hyp1_value},
            {"hyp2_support_ok", r.hyp2_support_ok},
            {"hyp2_sobolev_norm", r.hyp2_sobolev_norm},
            {"hyp2_sobolev_norm_refined", r.hyp2_sobolev_norm_refined},
            {"hyp2_sobolev_bounded", r.hyp2_sobolev_bounded},
            {"hyp2_infrared_ok", r.hyp2_infrared_ok},
            {"epsilon", r.epsilon},
            {"extension", r.extension}};
}

} // namespace

std::string hypothesis_report_json(const HypothesisReport& r) { return report_to_json(r).dump(); }

void write_kernel(const std::string& path, const KernelTensor& t, const HypothesisReport* report) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_kernel: cannot open " + path);
    os.write(kMagic, 4);
    put<std::uint32_t>(os, 1);
    put<std::int32_t>(os, t.alpha);
    put<std::int32_t>(os, t.provenance == KernelProvenance::Physical ? 0 : 1);
    put<std::uint64_t>(os, t.n1);
    put<std::uint64_t>(os, t.n2);
    put<std::uint64_t>(os, t.n3);
    put<std::uint32_t>(os, t.G.empty() ? 1 : 2);
    for (const auto* block : {&t.F, &t.G}) {
        if (block->empty()) continue;
        for (const auto& v : *block) {
            put<double>(os, v.real());
            put<double>(os, v.imag());
        }
    }
    nlohmann::json j = {{"format", "ZDKT"},
                        {"version", 1},
                        {"alpha", t.alpha},
                        {"provenance", t.provenance == KernelProvenance::Physical ? "physical" : "model"},
                        {"dims", {t.n1, t.n2, t.n3}},
                        {"blocks", t.G.empty() ? nlohmann::json{"F"} : nlohmann::json{"F", "G"}},
                        {"encoding", "f64 little-endian (re, im), row-major (xi1, xi2, xi3)"},
                        {"description", t.description},
                        {"l2_norm", t.l2_norm}};
    if (report) j["hypothesis_report"] = report_to_json(*report);
    std::ofstream js(path + ".json");
    js << j.dump(2) << '\n';
}

KernelTensor read_kernel(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_kernel: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("read_kernel: bad magic");
    if (get<std::uint32_t>(is) != 1) throw std::runtime_error("read_kernel: unsupported version");
    KernelTensor t;
    t.alpha = get<std::int32_t>(is);
    t.provenance = get<std::int32_t>(is) == 0 ? KernelProvenance::Physical : KernelProvenance::Model;
    t.n1 = get<std::uint64_t>(is);
    t.n2 = get<std::uint64_t>(is);
    t.n3 = get<std::uint64_t>(is);
    const auto blocks = get<std::uint32_t>(is);
    const std::size_t total = t.n1 * t.n2 * t.n3;
    for (std::uint32_t b = 0; b < blocks; ++b) {
        auto& dst = b == 0 ? t.F : t.G;
        dst.resize(total);
        for (auto& v : dst) {
            const double re = get<double>(is);
            const double im = get<double>(is);
            v = cplx(re, im);
        }
    }
    return t;
}

} // namespace zdecay
