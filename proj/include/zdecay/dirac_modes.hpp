#pragma once
// Partial-wave continuum eigenfunctions of the free Dirac operator.

#include "zdecay/special_functions.hpp"

#include <Eigen/Core>

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace zdecay {

using Vec3 = Eigen::Vector3d;
using Spinor4 = Eigen::Vector4cd;
using Spinor2 = Eigen::Vector2cd;

//! (j, m_j, kappa_j) stored with doubled half-integers.
struct AngularQN {
    int two_j = 1;
    int two_m = 1;
    int kappa = -1;

    double j() const { return 0.5 * two_j; }
    double m() const { return 0.5 * two_m; }
    int gamma() const { return kappa > 0 ? kappa : -kappa; }
    bool valid() const;
    std::string label() const;
};

//! All channels with j <= j_max, in the canonical order
//! (gamma_j, j, m_j, sign kappa).
std::vector<AngularQN> angular_channels(int two_j_max);

enum class EnergySign { Plus = 1, Minus = -1 };

inline int sign_value(EnergySign s) { return s == EnergySign::Plus ? 1 : -1; }

double omega(double p, double mass);

//! Phase eta_j used when none is supplied: 0 for kappa < 0, pi/2 for kappa > 0.
double default_phase(int kappa);

cplx radial_g(int kappa, EnergySign s, double p, double r, double mass = 1.0,
              std::optional<double> eta = std::nullopt);
cplx radial_f(int kappa, EnergySign s, double p, double r, double mass = 1.0,
              std::optional<double> eta = std::nullopt);

//! Two-component spinor harmonic Phi^{(which)}_{m_j, kappa_j}.
Spinor2 spinor_phi(int which, int two_m, int kappa, double theta, double phi);

Spinor4 psi(EnergySign s, double p, const AngularQN& q, const Vec3& x, double mass = 1.0,
            std::optional<double> eta = std::nullopt);

//! psi_-(p, (j, -m_j, -kappa_j), x)
Spinor4 psi_tilde_minus(double p, const AngularQN& q, const Vec3& x, double mass = 1.0,
                        std::optional<double> eta = std::nullopt);

//! ||H_D psi - (+-omega) psi|| / ||psi|| at x, fourth-order central
//! differences with step h.
double dirac_residual(EnergySign s, double p, const AngularQN& q, const Vec3& x, double h,
                      double mass = 1.0);

//==============================================================================
// Magnitude bounds
//==============================================================================

enum class RadialComponent { G, F };

//! Right-hand side of the pointwise magnitude estimate for |g| or |f|.
double magnitude_bound(RadialComponent c, int kappa, EnergySign s, double p, double r,
                       double mass = 1.0);

struct BoundViolation {
    RadialComponent component;
    int kappa;
    EnergySign sign;
    double p, r, value, bound;
};

struct MagnitudeBoundReport {
    std::size_t checked = 0;
    double worst_ratio = 0.0;
    std::vector<BoundViolation> violations;
    bool pass() const { return violations.empty(); }
};

//! Checks all eight estimates for each gamma on an n x n log grid over
//! [lo, 1]^2 with zero slack.
MagnitudeBoundReport check_magnitude_bounds(const std::vector<int>& gammas, int n,
                                            double lo = 1e-3, double mass = 1.0);

//! Bracket expressions of the first- and second-derivative estimates
//! (without the unknown constant C).
double first_derivative_bracket(RadialComponent c, int kappa, EnergySign s, double p, double r);
double second_derivative_bracket(RadialComponent c, int kappa, EnergySign s, double p, double r);

struct DerivativeFit {
    RadialComponent component;
    int kappa;
    EnergySign sign;
    int order;          // 1 or 2
    double c_coarse;    // smallest C on the n x n grid
    double c_fine;      // smallest C on the refined grid
    double worst_p, worst_r;
    bool finite() const;
    double relative_change() const;
};

struct DerivativeReport {
    std::vector<DerivativeFit> fits;
    double tolerance = 0.1;
    bool pass() const;
};

//! Fits the constants in the derivative estimates on a log grid over
//! [lo, 1]^2 with n and 2n-1 points per axis (the refined grid halves the
//! log spacing). Derivatives by central differences with relative step.
DerivativeReport verify_derivative_bounds(const std::vector<int>& gammas, int n, double lo = 1e-3,
                                          double mass = 1.0);

//==============================================================================
// Localization and the A weight
//==============================================================================

//! Smooth compactly supported radial profile f(|x|) with supp f in [0, r0].
struct LocalizationFn {
    double r0 = 1.0;
    double scale = 1.0;
    std::function<double(double)> shape; // on [0,1] in units of r0; empty -> default bump

    double operator()(double r) const;
    static LocalizationFn bump(double r0 = 1.0, double scale = 1.0);
    static LocalizationFn zero(double r0 = 1.0);
};

//! int_a^b fn by adaptive Gauss-Legendre to relative tolerance tol.
double adaptive_integrate(const std::function<double(double)>& fn, double a, double b,
                          double tol = 1e-13);

double weight_A(double p, int gamma_j, const LocalizationFn& f_loc, double mass = 1.0);

} // namespace zdecay
