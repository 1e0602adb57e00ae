#include "zdecay/special_functions.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace zdecay {

namespace {

constexpr double kPi = std::numbers::pi;

// Golub-Welsch for the monic Jacobi recurrence on [-1,1], mapped to [0,1].
QuadratureRule golub_welsch_jacobi(int n, double alpha, double beta) {
    if (n < 1) throw std::invalid_argument("quadrature order must be >= 1");
    if (alpha <= -1.0 || beta <= -1.0)
        throw std::invalid_argument("Jacobi exponents must exceed -1");

    // Jacobi P^{(a,b)} with weight (1-x)^a (1+x)^b. Under u = (1+x)/2 the
    // weight becomes u^beta (1-u)^alpha up to 2^{a+b+1}.
    const double a = alpha, b = beta;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const double s = 2.0 * k + a + b;
        double diag;
        if (k == 0)
            diag = (b - a) / (a + b + 2.0);
        else
            diag = (b * b - a * a) / (s * (s + 2.0));
        J(k, k) = diag;
        if (k + 1 < n) {
            const double m = k + 1.0;
            const double t = 2.0 * m + a + b;
            const double num = 4.0 * m * (m + a) * (m + b) * (m + a + b);
            const double den = t * t * (t + 1.0) * (t - 1.0);
            const double off = std::sqrt(num / den);
            J(k, k + 1) = off;
            J(k + 1, k) = off;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    const double mu0 = beta_fn(alpha + 1.0, beta + 1.0); // total mass on [0,1]

    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int k = 0; k < n; ++k) {
        const double v0 = es.eigenvectors()(0, k);
        rule.nodes[k] = 0.5 * (1.0 + es.eigenvalues()(k));
        rule.weights[k] = mu0 * v0 * v0;
    }
    rule.alpha = alpha;
    rule.beta = beta;
    return rule;
}

struct RuleCache {
    std::mutex mu;
    std::map<std::tuple<int, double, double>, QuadratureRule> rules;
};

RuleCache& rule_cache() {
    static RuleCache cache;
    return cache;
}

} // namespace

//==============================================================================
// Quadrature
//==============================================================================

QuadratureRule gauss_legendre01(int n) {
    QuadratureRule r = golub_welsch_jacobi(n, 0.0, 0.0);
    r.kind = RuleKind::GaussLegendre01;
    return r;
}

QuadratureRule gauss_jacobi01(int n, double alpha, double beta) {
    auto& cache = rule_cache();
    const auto key = std::make_tuple(n, alpha, beta);
    {
        std::lock_guard<std::mutex> lock(cache.mu);
        auto it = cache.rules.find(key);
        if (it != cache.rules.end()) return it->second;
    }
    QuadratureRule r = golub_welsch_jacobi(n, alpha, beta);
    r.kind = RuleKind::GaussJacobi01;
    std::lock_guard<std::mutex> lock(cache.mu);
    cache.rules.emplace(key, r);
    return r;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
    QuadratureRule r = gauss_legendre01(n);
    for (std::size_t k = 0; k < r.size(); ++k) {
        r.nodes[k] = a + (b - a) * r.nodes[k];
        r.weights[k] *= (b - a);
    }
    return r;
}

//==============================================================================
// Gamma
//==============================================================================

double log_gamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("log_gamma: argument must be positive");
    if (x < 0.5) {
        // reflection keeps the Lanczos sum in its accurate range
        return std::log(kPi / std::sin(kPi * x)) - log_gamma(1.0 - x);
    }
    static constexpr double g = 7.0;
    static constexpr double c[9] = {
        0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
        771.32342877765313,   -176.61502916214059,   12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    const double z = x - 1.0;
    double a = c[0];
    for (int k = 1; k < 9; ++k) a += c[k] / (z + k);
    const double t = z + g + 0.5;
    return 0.5 * std::log(2.0 * kPi) + (z + 0.5) * std::log(t) - t + std::log(a);
}

double gamma_fn(double x) { return std::exp(log_gamma(x)); }

double beta_fn(double a, double b) {
    return std::exp(log_gamma(a) + log_gamma(b) - log_gamma(a + b));
}

//==============================================================================
// Kummer
//==============================================================================

int kummer_order(double z) {
    return std::max(20, static_cast<int>(std::ceil(1.5 * std::abs(z))));
}

cplx kummer_radial(int gamma_j, double z) {
    if (gamma_j < 1) throw std::invalid_argument("kummer_radial: gamma_j must be >= 1");
    // 1F1(a;b;iz) = Gamma(b)/(Gamma(a)Gamma(b-a)) int_0^1 e^{izu} u^{a-1}(1-u)^{b-a-1} du
    // with a = gamma+1, b = 2gamma+1: weight u^gamma (1-u)^{gamma-1}.
    const double g = gamma_j;
    const QuadratureRule& rule = gauss_jacobi01(kummer_order(z), g - 1.0, g);
    double re = 0.0, im = 0.0, mass = 0.0;
    for (std::size_t k = 0; k < rule.size(); ++k) {
        const double ph = z * rule.nodes[k];
        re += rule.weights[k] * std::cos(ph);
        im += rule.weights[k] * std::sin(ph);
        mass += rule.weights[k];
    }
    return {re / mass, im / mass};
}

//==============================================================================
// Spherical harmonics
//==============================================================================

cplx spherical_harmonic(int l, int m, double theta, double phi) {
    if (l < 0 || std::abs(m) > l)
        throw std::domain_error("spherical_harmonic: need |m| <= l");
    if (m < 0) {
        const double sgn = (m % 2 == 0) ? 1.0 : -1.0;
        return sgn * std::conj(spherical_harmonic(l, -m, theta, phi));
    }
    const double x = std::cos(theta);
    const double s = std::sin(theta);
    // P_m^m with the Condon-Shortley phase, then upward in l
    double pmm = 1.0;
    for (int k = 1; k <= m; ++k) pmm *= -(2.0 * k - 1.0) * s;
    double plm = pmm;
    if (l > m) {
        double pm1 = x * (2.0 * m + 1.0) * pmm;
        double pm0 = pmm;
        for (int ll = m + 2; ll <= l; ++ll) {
            const double pn = ((2.0 * ll - 1.0) * x * pm1 - (ll + m - 1.0) * pm0) / (ll - m);
            pm0 = pm1;
            pm1 = pn;
        }
        plm = pm1;
    }
    const double norm = std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) *
                                  std::exp(std::lgamma(l - m + 1.0) - std::lgamma(l + m + 1.0)));
    return norm * plm * std::polar(1.0, m * phi);
}

SphereRule sphere_product_rule(int n_theta, int n_phi) {
    SphereRule r;
    const QuadratureRule gl = gauss_legendre(n_theta, -1.0, 1.0);
    for (int i = 0; i < n_theta; ++i) {
        const double th = std::acos(gl.nodes[i]);
        for (int k = 0; k < n_phi; ++k) {
            r.theta.push_back(th);
            r.phi.push_back(2.0 * kPi * k / n_phi);
            r.weight.push_back(gl.weights[i] * 2.0 * kPi / n_phi);
        }
    }
    return r;
}

std::vector<LebedevPoint> lebedev26() {
    std::vector<LebedevPoint> pts;
    const double w1 = 4.0 * kPi / 21.0;
    const double w2 = 4.0 * kPi * 4.0 / 105.0;
    const double w3 = 4.0 * kPi * 9.0 / 280.0;
    for (int ax = 0; ax < 3; ++ax)
        for (int s : {1, -1}) {
            double v[3] = {0, 0, 0};
            v[ax] = s;
            pts.push_back({v[0], v[1], v[2], w1});
        }
    const double h = 1.0 / std::sqrt(2.0);
    for (int pair = 0; pair < 3; ++pair)
        for (int s1 : {1, -1})
            for (int s2 : {1, -1}) {
                double v[3] = {0, 0, 0};
                const int i = pair == 2 ? 1 : 0;
                const int j = pair == 0 ? 1 : 2;
                v[i] = s1 * h;
                v[j] = s2 * h;
                pts.push_back({v[0], v[1], v[2], w2});
            }
    const double c = 1.0 / std::sqrt(3.0);
    for (int s1 : {1, -1})
        for (int s2 : {1, -1})
            for (int s3 : {1, -1}) pts.push_back({s1 * c, s2 * c, s3 * c, w3});
    return pts;
}

} // namespace zdecay
