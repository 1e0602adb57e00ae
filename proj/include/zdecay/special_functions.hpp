#pragma once
// Gamma function, the radial Kummer function, spherical harmonics and
// Gauss quadrature rules.

#include <complex>
#include <string>
#include <vector>

namespace zdecay {

using cplx = std::complex<double>;

//==============================================================================
// Quadrature rules
//==============================================================================

enum class RuleKind { GaussLegendre01, GaussJacobi01 };

//! Gauss rule on [0,1]. For the Jacobi kind the weight function is
//! u^beta (1-u)^alpha and the weights include it.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    RuleKind kind = RuleKind::GaussLegendre01;
    double alpha = 0.0; // exponent of (1-u)
    double beta = 0.0;  // exponent of u

    std::size_t size() const { return nodes.size(); }
};

//! n-point Gauss-Legendre rule on [0,1].
QuadratureRule gauss_legendre01(int n);

//! n-point Gauss rule on [0,1] for the weight u^beta (1-u)^alpha,
//! alpha, beta > -1. Built by Golub-Welsch on the Jacobi recurrence.
QuadratureRule gauss_jacobi01(int n, double alpha, double beta);

//! Gauss-Legendre rule mapped to [a,b].
QuadratureRule gauss_legendre(int n, double a, double b);

//==============================================================================
// Scalar special functions
//==============================================================================

//! ln Gamma(x) for x > 0 (Lanczos, g = 7, nine coefficients).
double log_gamma(double x);

//! Gamma(x) for x > 0.
double gamma_fn(double x);

//! Beta function B(a,b) = Gamma(a)Gamma(b)/Gamma(a+b).
double beta_fn(double a, double b);

//! Quadrature order used by kummer_radial for argument z.
int kummer_order(double z);

//! 1F1(gamma+1; 2gamma+1; i z) for integer gamma >= 1 and real z,
//! from the Euler integral with Gauss-Jacobi nodes.
cplx kummer_radial(int gamma_j, double z);

//! Orthonormal complex spherical harmonic Y_l^m(theta, phi) with the
//! Condon-Shortley phase.
cplx spherical_harmonic(int l, int m, double theta, double phi);

//! Symmetric product rule on the unit sphere: Gauss-Legendre in cos(theta)
//! times a uniform trapezoid in phi. Exact for Y_l^m products up to
//! degree 2n-1 in theta and n_phi-1 in phi.
struct SphereRule {
    std::vector<double> theta, phi, weight;
    std::size_t size() const { return weight.size(); }
};
SphereRule sphere_product_rule(int n_theta, int n_phi);

//! 26-point Lebedev rule (degree 7) as unit vectors with weights summing to 4 pi.
struct LebedevPoint {
    double x, y, z, w;
};
std::vector<LebedevPoint> lebedev26();

} // namespace zdecay
