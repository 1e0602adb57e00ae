#pragma once
// Discretized one-particle spaces and occupation-number Fock bases for
// electrons, positrons and Z bosons.

#include "zdecay/dirac_modes.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace zdecay {

using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

//==============================================================================
// Grids and modes
//==============================================================================

//! UniformEnergy: nodes equally spaced in q = omega(p) - m, i.e. in the
//! coordinate that straightens the flow of the conjugate operator.
//! UniformMomentum: nodes equally spaced in p.
enum class GridKind { UniformEnergy, UniformMomentum };

struct MomentumGrid {
    GridKind kind = GridKind::UniformEnergy;
    double mass = 1.0;
    double step = 0.0;       // spacing in q or in p
    std::vector<double> p;   // nodes, strictly increasing, > 0
    std::vector<double> w;   // weights for int_0^inf dp
    std::vector<double> q;   // omega(p) - mass at the nodes

    std::size_t size() const { return p.size(); }

    //! q_i = i h, i = 1..n, h = q_max / n; w_i = h omega(p_i) / p_i.
    static MomentumGrid uniform_energy(int n, double q_max, double mass);
    //! p_i = i h, i = 1..n, h = p_max / n; w_i = h.
    static MomentumGrid uniform_momentum(int n, double p_max, double mass);
};

struct FermionMode {
    AngularQN qn;
    int channel = 0;
    int node = 0;
    double p = 0.0;
    double w = 0.0;
};

//! Fermion modes over the grid and all channels with j <= j_max, in the
//! order (gamma_j, j, m_j, sign kappa, grid index).
struct FermionModeTable {
    MomentumGrid grid;
    std::vector<AngularQN> channels;
    std::vector<FermionMode> modes;

    FermionModeTable() = default;
    FermionModeTable(MomentumGrid g, int two_j_max);
    FermionModeTable(MomentumGrid g, std::vector<AngularQN> chans);

    std::size_t size() const { return modes.size(); }
    int index(int channel, int node) const { return channel * int(grid.size()) + node; }
};

struct BosonMode {
    Vec3 k = Vec3::Zero();
    int lambda = 0; // -1, 0, 1
    double w = 0.0;
};

struct BosonModeSet {
    std::vector<BosonMode> modes;
    int n_max = 2;
    double mass = 5.0;

    std::size_t size() const { return modes.size(); }
    double omega3(std::size_t i) const;

    //! n_dir directions (from +-x, +-y, +-z) times n_rad Gauss-Legendre radii on
    //! [0, k_max], three polarizations each. Weights discretize d^3k.
    static BosonModeSet directional(int n_dir, int n_rad, double k_max, double mass, int n_max);
    //! Plain list with unit weights, for algebra tests.
    static BosonModeSet toy(int count, int n_max, double mass = 5.0);
};

//==============================================================================
// Occupation states
//==============================================================================

constexpr int kMaxFermionModes = 256;

//! Fixed-width set of fermion modes.
class ModeBits {
public:
    bool test(int i) const { return (w_[i >> 6] >> (i & 63)) & 1u; }
    void set(int i) { w_[i >> 6] |= std::uint64_t(1) << (i & 63); }
    void reset(int i) { w_[i >> 6] &= ~(std::uint64_t(1) << (i & 63)); }
    int count() const;
    int count_below(int i) const;
    std::vector<int> members() const;
    bool operator==(const ModeBits& o) const { return w_ == o.w_; }
    std::size_t hash() const;

private:
    std::array<std::uint64_t, kMaxFermionModes / 64> w_{};
};

struct OccupationState {
    ModeBits electrons;
    ModeBits positrons;
    std::vector<std::uint8_t> bosons;

    int n_electrons() const { return electrons.count(); }
    int n_positrons() const { return positrons.count(); }
    int n_bosons() const;
    int charge() const { return n_electrons() - n_positrons(); }
    bool operator==(const OccupationState& o) const;
    std::string describe() const;
};

struct OccupationHash {
    std::size_t operator()(const OccupationState& s) const;
};

struct ParticleCaps {
    int electrons = 1;
    int positrons = 1;
    int bosons = 1; // total boson number
};

//! Ordered basis of occupation states within the caps, optionally restricted
//! to one charge sector.
class FockBasis {
public:
    FockBasis() = default;
    FockBasis(int n_fermion_modes, int n_boson_modes, ParticleCaps caps, int boson_cap_per_mode,
              std::optional<int> charge_sector);

    std::size_t size() const { return states_.size(); }
    const OccupationState& state(std::size_t i) const { return states_[i]; }
    const std::vector<OccupationState>& states() const { return states_; }
    std::optional<std::size_t> find(const OccupationState& s) const;

    int n_fermion_modes() const { return nf_; }
    int n_boson_modes() const { return nb_; }
    ParticleCaps caps() const { return caps_; }
    int boson_cap() const { return nmax_; }
    std::optional<int> sector() const { return sector_; }
    bool contains_caps(const OccupationState& s) const;

    //! FNV-1a digest of the ordered state list.
    std::string digest() const;

private:
    int nf_ = 0, nb_ = 0, nmax_ = 0;
    ParticleCaps caps_{};
    std::optional<int> sector_;
    std::vector<OccupationState> states_;
    std::unordered_map<OccupationState, std::size_t, OccupationHash> index_;
};

//==============================================================================
// Creation and annihilation
//==============================================================================

struct FermionAction {
    int sign;
    OccupationState state;
};
struct BosonAction {
    double amplitude;
    OccupationState state;
};

std::optional<FermionAction> apply_b_plus(const OccupationState& s, int mode);
std::optional<FermionAction> apply_b_plus_dagger(const OccupationState& s, int mode);
std::optional<FermionAction> apply_b_minus(const OccupationState& s, int mode);
std::optional<FermionAction> apply_b_minus_dagger(const OccupationState& s, int mode);
std::optional<BosonAction> apply_a(const OccupationState& s, int mode);
//! Returns nothing at the occupancy cap n_max.
std::optional<BosonAction> apply_a_dagger(const OccupationState& s, int mode, int n_max);

//! Matrix of a state map on the basis; targets outside the basis are dropped.
using StateMap = std::function<std::optional<std::pair<cplx, OccupationState>>(const OccupationState&)>;
SpMat operator_matrix(const FockBasis& basis, const StateMap& op);

struct NumberOperators {
    Eigen::VectorXd n_plus, n_minus, n_z, charge;
};
NumberOperators number_operators(const FockBasis& basis);

//==============================================================================
// Partition of unity
//==============================================================================

struct PartitionReport {
    double unity_error = 0.0;         // max |(j0^2 + jinf^2 - 1)_{ab}|
    double isometry_error = 0.0;      // max | ||G Phi|| / ||Phi|| - 1 |
    double product_formula_error = 0.0;
    double hermiticity_error = 0.0;   // of the discretized position operator
    int samples = 0;
    int worst_sample = -1;
    bool pass(double iso_tol = 1e-8, double unity_tol = 1e-12, double prod_tol = 1e-12) const;
};

//! Smooth cutoff: 1 on [0, 1/2], 0 on [1, inf).
double partition_j0(double s);

//! Builds y = i d/dp by spectral differentiation on the uniform-in-p grid
//! with zero padding, forms j0(|y|/R) and jinf = sqrt(1 - j0^2) by
//! eigendecomposition, and checks the split map on a single fermion species
//! with at most two particles.
PartitionReport partition_check(const MomentumGrid& grid, double R, int samples, std::uint64_t seed,
                                const std::function<double(double)>& j0 = partition_j0);

//! Position operator y on a uniform-in-p grid (Hermitian matrix).
Eigen::MatrixXcd position_operator(const MomentumGrid& grid);

} // namespace zdecay
