#include "zdecay/dirac_modes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace zdecay {

namespace {

constexpr double kPi = std::numbers::pi;
const cplx I1(0.0, 1.0);

// Common factor (2pr)^gamma / r * Gamma(gamma) / (2 sqrt(pi) Gamma(2gamma+1))
// times the first bracket term t1 = e^{-ipr} e^{i eta} gamma F(.., 2ipr).
// The second term is conj(t1).
struct RadialParts {
    double pref;
    cplx t1;
};

RadialParts radial_parts(int gamma, double p, double r, double eta) {
    const double x = p * r;
    const double lp = gamma * std::log(2.0 * x) - std::log(r) + log_gamma(gamma) -
                      log_gamma(2.0 * gamma + 1.0);
    const double pref = std::exp(lp) / (2.0 * std::sqrt(kPi));
    const cplx t1 = std::polar(1.0, eta - x) * double(gamma) * kummer_radial(gamma, 2.0 * x);
    return {pref, t1};
}

} // namespace

//==============================================================================
// Quantum numbers
//==============================================================================

bool AngularQN::valid() const {
    if (two_j < 1 || two_j % 2 == 0) return false;
    if (std::abs(two_m) > two_j || (two_m - two_j) % 2 != 0) return false;
    return kappa == (two_j + 1) / 2 || kappa == -(two_j + 1) / 2;
}

std::string AngularQN::label() const {
    std::ostringstream os;
    os << "j=" << two_j << "/2,m=" << two_m << "/2,kappa=" << kappa;
    return os.str();
}

std::vector<AngularQN> angular_channels(int two_j_max) {
    std::vector<AngularQN> out;
    for (int tj = 1; tj <= two_j_max; tj += 2)
        for (int tm = -tj; tm <= tj; tm += 2)
            for (int s : {-1, 1}) out.push_back({tj, tm, s * (tj + 1) / 2});
    return out;
}

double omega(double p, double mass) { return std::sqrt(mass * mass + p * p); }

double default_phase(int kappa) { return kappa > 0 ? 0.5 * kPi : 0.0; }

//==============================================================================
// Radial functions
//==============================================================================

cplx radial_g(int kappa, EnergySign s, double p, double r, double mass, std::optional<double> eta) {
    const int gamma = std::abs(kappa);
    const double w = omega(p, mass);
    const double c1 = s == EnergySign::Plus ? std::sqrt(w + mass) : std::sqrt(w - mass);
    const auto parts = radial_parts(gamma, p, r, eta.value_or(default_phase(kappa)));
    return c1 / std::sqrt(w) * parts.pref * 2.0 * parts.t1.real();
}

cplx radial_f(int kappa, EnergySign s, double p, double r, double mass, std::optional<double> eta) {
    const int gamma = std::abs(kappa);
    const double w = omega(p, mass);
    const double c2 = s == EnergySign::Plus ? std::sqrt(w - mass) : -std::sqrt(w + mass);
    const auto parts = radial_parts(gamma, p, r, eta.value_or(default_phase(kappa)));
    // i * (t1 - conj t1) = -2 Im t1; the kappa > 0 branch carries an extra
    // sign so that (i g Phi1, -f Phi2) solves the Dirac equation.
    const double branch = kappa > 0 ? -1.0 : 1.0;
    return branch * c2 / std::sqrt(w) * parts.pref * (-2.0) * parts.t1.imag();
}

//==============================================================================
// Spinor harmonics
//==============================================================================

namespace {

// Y_l^{m} with a zero coefficient guard for |m| > l
cplx ylm_or_zero(int l, int two_m_half, double theta, double phi) {
    if (l < 0 || std::abs(two_m_half) > l) return 0.0;
    return spherical_harmonic(l, two_m_half, theta, phi);
}

// kappa = +(j+1/2): orbital l = j + 1/2 in the first spinor, j - 1/2 in the second
Spinor2 phi_positive(int which, int two_j, int two_m, double theta, double phi) {
    const double j = 0.5 * two_j, m = 0.5 * two_m;
    const int m_lo = (two_m - 1) / 2; // m - 1/2
    const int m_hi = (two_m + 1) / 2; // m + 1/2
    Spinor2 out;
    if (which == 1) {
        const int l = (two_j + 1) / 2;
        out(0) = std::sqrt((j - m + 1.0) / (2.0 * j + 2.0)) * ylm_or_zero(l, m_lo, theta, phi);
        out(1) = -std::sqrt((j + m + 1.0) / (2.0 * j + 2.0)) * ylm_or_zero(l, m_hi, theta, phi);
    } else {
        const int l = (two_j - 1) / 2;
        const double a = std::sqrt((j + m) / (2.0 * j));
        const double b = std::sqrt((j - m) / (2.0 * j));
        out(0) = a == 0.0 ? cplx(0.0) : a * ylm_or_zero(l, m_lo, theta, phi);
        out(1) = b == 0.0 ? cplx(0.0) : b * ylm_or_zero(l, m_hi, theta, phi);
    }
    return out;
}

} // namespace

Spinor2 spinor_phi(int which, int two_m, int kappa, double theta, double phi) {
    if (which != 1 && which != 2) throw std::domain_error("spinor_phi: which must be 1 or 2");
    const int two_j = 2 * std::abs(kappa) - 1;
    const AngularQN q{two_j, two_m, kappa};
    if (!q.valid()) throw std::domain_error("spinor_phi: invalid (m_j, kappa_j)");
    if (kappa > 0) return phi_positive(which, two_j, two_m, theta, phi);
    if (which == 1) return phi_positive(2, two_j, two_m, theta, phi);
    return -phi_positive(1, two_j, two_m, theta, phi);
}

Spinor4 psi(EnergySign s, double p, const AngularQN& q, const Vec3& x, double mass,
            std::optional<double> eta) {
    const double r = x.norm();
    if (!(r > 0.0)) throw std::domain_error("psi: |x| must be positive");
    const double theta = std::acos(std::clamp(x(2) / r, -1.0, 1.0));
    const double ph = std::atan2(x(1), x(0));
    const cplx g = radial_g(q.kappa, s, p, r, mass, eta);
    const cplx f = radial_f(q.kappa, s, p, r, mass, eta);
    const Spinor2 u = spinor_phi(1, q.two_m, q.kappa, theta, ph);
    const Spinor2 d = spinor_phi(2, q.two_m, q.kappa, theta, ph);
    Spinor4 out;
    out << I1 * g * u(0), I1 * g * u(1), -f * d(0), -f * d(1);
    return out;
}

Spinor4 psi_tilde_minus(double p, const AngularQN& q, const Vec3& x, double mass,
                        std::optional<double> eta) {
    const AngularQN flipped{q.two_j, -q.two_m, -q.kappa};
    return psi(EnergySign::Minus, p, flipped, x, mass, eta);
}

double dirac_residual(EnergySign s, double p, const AngularQN& q, const Vec3& x, double h,
                      double mass) {
    auto at = [&](const Vec3& y) { return psi(s, p, q, y, mass); };
    const Spinor4 v = at(x);
    // beta m psi
    Spinor4 hv;
    hv << mass * v(0), mass * v(1), -mass * v(2), -mass * v(3);
    for (int i = 0; i < 3; ++i) {
        Vec3 e = Vec3::Zero();
        e(i) = h;
        const Spinor4 d = (-at(x + 2 * e) + 8.0 * at(x + e) - 8.0 * at(x - e) + at(x - 2 * e)) / (12.0 * h);
        const Spinor4 md = -I1 * d;
        // alpha_i = [[0, sigma_i], [sigma_i, 0]]
        Spinor2 up(md(2), md(3)), lo(md(0), md(1));
        Spinor2 su, sl;
        if (i == 0) {
            su << up(1), up(0);
            sl << lo(1), lo(0);
        } else if (i == 1) {
            su << -I1 * up(1), I1 * up(0);
            sl << -I1 * lo(1), I1 * lo(0);
        } else {
            su << up(0), -up(1);
            sl << lo(0), -lo(1);
        }
        hv(0) += su(0);
        hv(1) += su(1);
        hv(2) += sl(0);
        hv(3) += sl(1);
    }
    const double w = sign_value(s) * omega(p, mass);
    return (hv - w * v).norm() / v.norm();
}

//==============================================================================
// Bounds
//==============================================================================

double magnitude_bound(RadialComponent c, int kappa, EnergySign s, double p, double r, double mass) {
    const int gamma = std::abs(kappa);
    const double w = omega(p, mass);
    const double plus = std::sqrt((w + mass) / w);
    const double minus = std::sqrt((w - mass) / w);
    const double gg = gamma_fn(gamma);
    const double a = p / std::sqrt(kPi) * std::pow(2.0 * p * r, gamma) / gg;
    const double b = 2.0 * p / std::sqrt(kPi) * std::pow(2.0 * p * r, gamma - 1) / gg;
    const bool up = kappa > 0;
    const bool isg = c == RadialComponent::G;
    if (s == EnergySign::Plus) {
        if (isg) return up ? plus * a : plus * b;
        return up ? minus * b : minus * a;
    }
    if (isg) return up ? minus * a : minus * b;
    return up ? plus * b : plus * a;
}

MagnitudeBoundReport check_magnitude_bounds(const std::vector<int>& gammas, int n, double lo,
                                            double mass) {
    MagnitudeBoundReport rep;
    std::vector<double> axis(n);
    for (int i = 0; i < n; ++i)
        axis[i] = std::exp(std::log(lo) + (std::log(1.0) - std::log(lo)) * i / (n - 1));
    for (int g : gammas)
        for (int kappa : {g, -g})
            for (EnergySign s : {EnergySign::Plus, EnergySign::Minus})
                for (double p : axis)
                    for (double r : axis)
                        for (RadialComponent c : {RadialComponent::G, RadialComponent::F}) {
                            const cplx v = c == RadialComponent::G ? radial_g(kappa, s, p, r, mass)
                                                                   : radial_f(kappa, s, p, r, mass);
                            const double b = magnitude_bound(c, kappa, s, p, r, mass);
                            const double ratio = std::abs(v) / b;
                            rep.worst_ratio = std::max(rep.worst_ratio, ratio);
                            ++rep.checked;
                            if (std::abs(v) > b) rep.violations.push_back({c, kappa, s, p, r, std::abs(v), b});
                        }
    return rep;
}

namespace {

// Which of the four positive-energy shapes applies; negative energy maps
// g_{+k} -> shape of f_{-k}, f_{+k} -> g_{-k}, g_{-k} -> f_{+k}, f_{-k} -> g_{+k}.
int shape_index(RadialComponent c, int kappa, EnergySign s) {
    const bool isg = c == RadialComponent::G;
    const bool up = kappa > 0;
    int idx = up ? (isg ? 0 : 1) : (isg ? 2 : 3);
    if (s == EnergySign::Minus) {
        static constexpr int map[4] = {3, 2, 1, 0};
        idx = map[idx];
    }
    return idx;
}

} // namespace

double first_derivative_bracket(RadialComponent c, int kappa, EnergySign s, double p, double r) {
    const int g = std::abs(kappa);
    const double x = 2.0 * p * r;
    auto pw = [&](int k) { return std::pow(x, k); };
    double v = 0.0;
    switch (shape_index(c, kappa, s)) {
    case 0: v = pw(g) + p * r * (g - 1) * pw(g - 1) + p * r * pw(g - 1); break;
    case 1: v = p * pw(g - 1) + p * p * r * (g - 1) * pw(g - 2) + p * p * r * pw(g); break;
    case 2: v = pw(g - 1) + p * r * (g - 1) * pw(g - 2) + p * r * pw(g); break;
    case 3: v = p * pw(g) + p * p * r * (g - 1) * pw(g - 1) + p * p * r * pw(g - 1); break;
    }
    return v / gamma_fn(g);
}

double second_derivative_bracket(RadialComponent c, int kappa, EnergySign s, double p, double r) {
    const int g = std::abs(kappa);
    double v = 0.0;
    switch (shape_index(c, kappa, s)) {
    case 0: v = std::pow(p, g - 1) * std::pow(r, g); break;
    case 1: v = std::pow(p, g - 1) * std::pow(r, g - 1); break;
    case 2: v = std::pow(p, g - 2) * std::pow(r, g - 1); break;
    case 3: v = std::pow(p, g - 1) * std::pow(r, g - 1); break;
    }
    return g * g * v / gamma_fn(g);
}

bool DerivativeFit::finite() const { return std::isfinite(c_coarse) && std::isfinite(c_fine); }

double DerivativeFit::relative_change() const {
    const double d = std::max(std::abs(c_fine), std::abs(c_coarse));
    return d == 0.0 ? 0.0 : std::abs(c_fine - c_coarse) / d;
}

bool DerivativeReport::pass() const {
    for (const auto& f : fits)
        if (!f.finite() || f.relative_change() > tolerance) return false;
    return true;
}

DerivativeReport verify_derivative_bounds(const std::vector<int>& gammas, int n, double lo,
                                          double mass) {
    if (n < 2) throw std::invalid_argument("verify_derivative_bounds: n >= 2");
    DerivativeReport rep;
    auto make_axis = [&](int k) {
        std::vector<double> a(k);
        for (int i = 0; i < k; ++i) a[i] = std::exp(std::log(lo) * (1.0 - double(i) / (k - 1)));
        return a;
    };
    const auto coarse = make_axis(n);
    const auto fine = make_axis(2 * n - 1);

    for (int g : gammas)
        for (int kappa : {g, -g})
            for (EnergySign s : {EnergySign::Plus, EnergySign::Minus})
                for (RadialComponent c : {RadialComponent::G, RadialComponent::F})
                    for (int order : {1, 2}) {
                        auto value = [&](double p, double r) {
                            return c == RadialComponent::G ? radial_g(kappa, s, p, r, mass).real()
                                                           : radial_f(kappa, s, p, r, mass).real();
                        };
                        auto fit = [&](const std::vector<double>& axis, double& wp, double& wr) {
                            double best = 0.0;
                            for (double p : axis)
                                for (double r : axis) {
                                    const double dp = 1e-3 * p;
                                    double d;
                                    double b;
                                    if (order == 1) {
                                        d = (value(p + dp, r) - value(p - dp, r)) / (2.0 * dp);
                                        b = first_derivative_bracket(c, kappa, s, p, r);
                                    } else {
                                        d = (value(p + dp, r) - 2.0 * value(p, r) + value(p - dp, r)) / (dp * dp);
                                        b = second_derivative_bracket(c, kappa, s, p, r);
                                    }
                                    const double ratio = std::abs(d) / b;
                                    if (ratio > best) {
                                        best = ratio;
                                        wp = p;
                                        wr = r;
                                    }
                                }
                            return best;
                        };
                        DerivativeFit df{c, kappa, s, order, 0.0, 0.0, 0.0, 0.0};
                        double tp, tr;
                        df.c_coarse = fit(coarse, tp, tr);
                        df.c_fine = fit(fine, df.worst_p, df.worst_r);
                        rep.fits.push_back(df);
                    }
    return rep;
}

//==============================================================================
// Localization and A
//==============================================================================

double LocalizationFn::operator()(double r) const {
    if (r < 0.0 || r >= r0) return 0.0;
    const double x = r / r0;
    if (shape) return scale * shape(x);
    return scale * std::exp(1.0 - 1.0 / (1.0 - x * x));
}

LocalizationFn LocalizationFn::bump(double r0, double scale) {
    LocalizationFn f;
    f.r0 = r0;
    f.scale = scale;
    return f;
}

LocalizationFn LocalizationFn::zero(double r0) {
    LocalizationFn f;
    f.r0 = r0;
    f.scale = 0.0;
    return f;
}

namespace {

double gl_panel(const std::function<double(double)>& fn, const QuadratureRule& rule, double a, double b) {
    double s = 0.0;
    for (std::size_t k = 0; k < rule.size(); ++k) s += rule.weights[k] * fn(a + (b - a) * rule.nodes[k]);
    return s * (b - a);
}

double adaptive_step(const std::function<double(double)>& fn, const QuadratureRule& lo,
                     const QuadratureRule& hi, double a, double b, double abs_tol, int depth) {
    const double c = gl_panel(fn, lo, a, b);
    const double f = gl_panel(fn, hi, a, b);
    if (std::abs(f - c) <= abs_tol || depth >= 30) return f;
    const double mid = 0.5 * (a + b);
    return adaptive_step(fn, lo, hi, a, mid, 0.5 * abs_tol, depth + 1) +
           adaptive_step(fn, lo, hi, mid, b, 0.5 * abs_tol, depth + 1);
}

} // namespace

double adaptive_integrate(const std::function<double(double)>& fn, double a, double b, double tol) {
    static const QuadratureRule lo = gauss_legendre01(10);
    static const QuadratureRule hi = gauss_legendre01(20);
    // absolute target from a coarse estimate of the whole integral
    double scale = 0.0;
    const int panels = 16;
    for (int k = 0; k < panels; ++k)
        scale += std::abs(gl_panel(fn, hi, a + (b - a) * k / panels, a + (b - a) * (k + 1) / panels));
    if (scale == 0.0) return 0.0;
    return adaptive_step(fn, lo, hi, a, b, tol * scale, 0);
}

double weight_A(double p, int gamma_j, const LocalizationFn& f_loc, double mass) {
    if (p <= 0.0) return 0.0;
    const double w = omega(p, mass);
    const double integral = adaptive_integrate(
        [&](double r) { return std::abs(f_loc(r)) * std::pow(r, 2 * gamma_j) * (1.0 + r * r); }, 0.0,
        f_loc.r0);
    return std::pow(2.0 * p, gamma_j + 1) / gamma_fn(gamma_j) * std::sqrt((w + mass) / w) *
           std::sqrt(integral);
}

} // namespace zdecay
