#include "zdecay/fock.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace zdecay {

//==============================================================================
// Grids and modes
//==============================================================================

MomentumGrid MomentumGrid::uniform_energy(int n, double q_max, double mass) {
    if (n < 1 || q_max <= 0.0 || mass <= 0.0) throw std::invalid_argument("uniform_energy: bad grid");
    MomentumGrid g;
    g.kind = GridKind::UniformEnergy;
    g.mass = mass;
    g.step = q_max / n;
    for (int i = 1; i <= n; ++i) {
        const double q = i * g.step;
        const double p = std::sqrt((q + mass) * (q + mass) - mass * mass);
        g.q.push_back(q);
        g.p.push_back(p);
        g.w.push_back(g.step * omega(p, mass) / p);
    }
    return g;
}

MomentumGrid MomentumGrid::uniform_momentum(int n, double p_max, double mass) {
    if (n < 1 || p_max <= 0.0 || mass <= 0.0) throw std::invalid_argument("uniform_momentum: bad grid");
    MomentumGrid g;
    g.kind = GridKind::UniformMomentum;
    g.mass = mass;
    g.step = p_max / n;
    for (int i = 1; i <= n; ++i) {
        const double p = i * g.step;
        g.p.push_back(p);
        g.w.push_back(g.step);
        g.q.push_back(omega(p, mass) - mass);
    }
    return g;
}

FermionModeTable::FermionModeTable(MomentumGrid g, int two_j_max)
    : FermionModeTable(std::move(g), angular_channels(two_j_max)) {}

FermionModeTable::FermionModeTable(MomentumGrid g, std::vector<AngularQN> chans)
    : grid(std::move(g)), channels(std::move(chans)) {
    for (std::size_t c = 0; c < channels.size(); ++c)
        for (std::size_t i = 0; i < grid.size(); ++i)
            modes.push_back({channels[c], int(c), int(i), grid.p[i], grid.w[i]});
}

double BosonModeSet::omega3(std::size_t i) const {
    return std::sqrt(modes[i].k.squaredNorm() + mass * mass);
}

BosonModeSet BosonModeSet::directional(int n_dir, int n_rad, double k_max, double mass, int n_max) {
    if (n_dir < 1 || n_dir > 6 || n_rad < 1) throw std::invalid_argument("directional: bad counts");
    static const Vec3 dirs[6] = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0),
                                 Vec3(0, -1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1)};
    BosonModeSet set;
    set.n_max = n_max;
    set.mass = mass;
    const QuadratureRule radial = gauss_legendre(n_rad, 0.0, k_max);
    const double solid = 4.0 * std::numbers::pi / n_dir;
    for (int d = 0; d < n_dir; ++d)
        for (int r = 0; r < n_rad; ++r)
            for (int lam : {-1, 0, 1}) {
                const double k = radial.nodes[r];
                set.modes.push_back({dirs[d] * k, lam, radial.weights[r] * k * k * solid});
            }
    return set;
}

BosonModeSet BosonModeSet::toy(int count, int n_max, double mass) {
    BosonModeSet set;
    set.n_max = n_max;
    set.mass = mass;
    for (int i = 0; i < count; ++i) set.modes.push_back({Vec3(0.1 * (i + 1), 0, 0), 0, 1.0});
    return set;
}

//==============================================================================
// Occupation states
//==============================================================================

int ModeBits::count() const {
    int c = 0;
    for (auto w : w_) c += std::popcount(w);
    return c;
}

int ModeBits::count_below(int i) const {
    int c = 0;
    const int full = i >> 6;
    for (int k = 0; k < full; ++k) c += std::popcount(w_[k]);
    const int rem = i & 63;
    if (rem) c += std::popcount(w_[full] & ((std::uint64_t(1) << rem) - 1));
    return c;
}

std::vector<int> ModeBits::members() const {
    std::vector<int> out;
    for (int k = 0; k < int(w_.size()); ++k) {
        auto w = w_[k];
        while (w) {
            out.push_back(k * 64 + std::countr_zero(w));
            w &= w - 1;
        }
    }
    return out;
}

std::size_t ModeBits::hash() const {
    std::size_t h = 1469598103934665603ull;
    for (auto w : w_) h = (h ^ w) * 1099511628211ull;
    return h;
}

int OccupationState::n_bosons() const {
    int n = 0;
    for (auto b : bosons) n += b;
    return n;
}

bool OccupationState::operator==(const OccupationState& o) const {
    return electrons == o.electrons && positrons == o.positrons && bosons == o.bosons;
}

std::string OccupationState::describe() const {
    std::ostringstream os;
    os << "e{";
    for (int m : electrons.members()) os << m << ' ';
    os << "} p{";
    for (int m : positrons.members()) os << m << ' ';
    os << "} z{";
    for (std::size_t k = 0; k < bosons.size(); ++k)
        if (bosons[k]) os << k << ':' << int(bosons[k]) << ' ';
    os << '}';
    return os.str();
}

std::size_t OccupationHash::operator()(const OccupationState& s) const {
    std::size_t h = s.electrons.hash() * 31 + s.positrons.hash();
    for (auto b : s.bosons) h = (h ^ b) * 1099511628211ull;
    return h;
}

namespace {

void combinations(int n, int k, std::vector<std::vector<int>>& out) {
    std::vector<int> c(k);
    for (int i = 0; i < k; ++i) c[i] = i;
    if (k > n) return;
    while (true) {
        out.push_back(c);
        int i = k - 1;
        while (i >= 0 && c[i] == n - k + i) --i;
        if (i < 0) break;
        ++c[i];
        for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
    }
}

void boson_configs(int nb, int total, int cap, std::vector<std::uint8_t>& cur, int pos,
                   std::vector<std::vector<std::uint8_t>>& out) {
    if (pos == nb) {
        if (total == 0) out.push_back(cur);
        return;
    }
    // lexicographic with the first mode varying slowest
    for (int n = 0; n <= std::min(cap, total); ++n) {
        cur[pos] = std::uint8_t(n);
        boson_configs(nb, total - n, cap, cur, pos + 1, out);
    }
    cur[pos] = 0;
}

} // namespace

FockBasis::FockBasis(int n_fermion_modes, int n_boson_modes, ParticleCaps caps, int boson_cap_per_mode,
                     std::optional<int> charge_sector)
    : nf_(n_fermion_modes), nb_(n_boson_modes), nmax_(boson_cap_per_mode), caps_(caps), sector_(charge_sector) {
    if (nf_ > kMaxFermionModes) throw std::invalid_argument("FockBasis: too many fermion modes");
    const int ne_max = std::min(caps.electrons, nf_);
    const int np_max = std::min(caps.positrons, nf_);
    const int nz_max = std::min(caps.bosons, nb_ * nmax_);
    for (int ne = 0; ne <= ne_max; ++ne)
        for (int np = 0; np <= np_max; ++np) {
            if (sector_ && ne - np != *sector_) continue;
            std::vector<std::vector<int>> ec, pc;
            combinations(nf_, ne, ec);
            combinations(nf_, np, pc);
            for (int nz = 0; nz <= nz_max; ++nz) {
                std::vector<std::vector<std::uint8_t>> bc;
                std::vector<std::uint8_t> cur(nb_, 0);
                boson_configs(nb_, nz, nmax_, cur, 0, bc);
                for (const auto& e : ec)
                    for (const auto& p : pc)
                        for (const auto& b : bc) {
                            OccupationState s;
                            for (int m : e) s.electrons.set(m);
                            for (int m : p) s.positrons.set(m);
                            s.bosons = b;
                            index_.emplace(s, states_.size());
                            states_.push_back(std::move(s));
                        }
            }
        }
}

std::optional<std::size_t> FockBasis::find(const OccupationState& s) const {
    auto it = index_.find(s);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool FockBasis::contains_caps(const OccupationState& s) const {
    if (s.n_electrons() > caps_.electrons || s.n_positrons() > caps_.positrons) return false;
    if (s.n_bosons() > caps_.bosons) return false;
    for (auto b : s.bosons)
        if (b > nmax_) return false;
    return !sector_ || s.charge() == *sector_;
}

std::string FockBasis::digest() const {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&](std::uint64_t v) { h = (h ^ v) * 1099511628211ull; };
    for (const auto& s : states_) {
        for (int m : s.electrons.members()) mix(std::uint64_t(m) + 1);
        mix(0xE);
        for (int m : s.positrons.members()) mix(std::uint64_t(m) + 1);
        mix(0xF);
        for (auto b : s.bosons) mix(b);
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

//==============================================================================
// Creation and annihilation
//==============================================================================

std::optional<FermionAction> apply_b_plus(const OccupationState& s, int mode) {
    if (!s.electrons.test(mode)) return std::nullopt;
    FermionAction r{(s.electrons.count_below(mode) % 2) ? -1 : 1, s};
    r.state.electrons.reset(mode);
    return r;
}

std::optional<FermionAction> apply_b_plus_dagger(const OccupationState& s, int mode) {
    if (s.electrons.test(mode)) return std::nullopt;
    FermionAction r{(s.electrons.count_below(mode) % 2) ? -1 : 1, s};
    r.state.electrons.set(mode);
    return r;
}

std::optional<FermionAction> apply_b_minus(const OccupationState& s, int mode) {
    if (!s.positrons.test(mode)) return std::nullopt;
    const int parity = s.n_electrons() + s.positrons.count_below(mode);
    FermionAction r{(parity % 2) ? -1 : 1, s};
    r.state.positrons.reset(mode);
    return r;
}

std::optional<FermionAction> apply_b_minus_dagger(const OccupationState& s, int mode) {
    if (s.positrons.test(mode)) return std::nullopt;
    const int parity = s.n_electrons() + s.positrons.count_below(mode);
    FermionAction r{(parity % 2) ? -1 : 1, s};
    r.state.positrons.set(mode);
    return r;
}

std::optional<BosonAction> apply_a(const OccupationState& s, int mode) {
    const int n = s.bosons[mode];
    if (n == 0) return std::nullopt;
    BosonAction r{std::sqrt(double(n)), s};
    r.state.bosons[mode] = std::uint8_t(n - 1);
    return r;
}

std::optional<BosonAction> apply_a_dagger(const OccupationState& s, int mode, int n_max) {
    const int n = s.bosons[mode];
    if (n >= n_max) return std::nullopt;
    BosonAction r{std::sqrt(double(n + 1)), s};
    r.state.bosons[mode] = std::uint8_t(n + 1);
    return r;
}

SpMat operator_matrix(const FockBasis& basis, const StateMap& op) {
    std::vector<Eigen::Triplet<cplx>> trips;
    for (std::size_t c = 0; c < basis.size(); ++c) {
        auto r = op(basis.state(c));
        if (!r) continue;
        auto row = basis.find(r->second);
        if (!row) continue;
        trips.emplace_back(int(*row), int(c), r->first);
    }
    SpMat m(basis.size(), basis.size());
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

NumberOperators number_operators(const FockBasis& basis) {
    const auto n = Eigen::Index(basis.size());
    NumberOperators ops{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = basis.state(i);
        ops.n_plus(i) = s.n_electrons();
        ops.n_minus(i) = s.n_positrons();
        ops.n_z(i) = s.n_bosons();
        ops.charge(i) = s.charge();
    }
    return ops;
}

//==============================================================================
// Partition of unity
//==============================================================================

double partition_j0(double s) {
    if (s <= 0.5) return 1.0;
    if (s >= 1.0) return 0.0;
    auto bump = [](double t) { return t <= 0.0 ? 0.0 : std::exp(-1.0 / t); };
    const double t = 2.0 * s - 1.0; // in (0,1)
    const double chi = bump(1.0 - t) / (bump(1.0 - t) + bump(t));
    return std::sqrt(chi);
}

Eigen::MatrixXcd position_operator(const MomentumGrid& grid) {
    if (grid.kind != GridKind::UniformMomentum)
        throw std::invalid_argument("position_operator: needs a uniform-in-p grid");
    const int n = int(grid.size());
    const int N = 2 * (n + 1); // zero padding to twice the length, even
    const double L = N * grid.step;
    Eigen::MatrixXcd y(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const int x = a - b;
            double d = 0.0;
            if (x != 0) {
                const double sgn = (std::abs(x) % 2) ? -1.0 : 1.0;
                d = std::numbers::pi / L * sgn / std::tan(std::numbers::pi * x / N);
            }
            y(a, b) = cplx(0.0, d); // y = i d/dp
        }
    return y;
}

bool PartitionReport::pass(double iso_tol, double unity_tol, double prod_tol) const {
    return isometry_error <= iso_tol && unity_error <= unity_tol && product_formula_error <= prod_tol &&
           hermiticity_error <= unity_tol;
}

namespace {

using Mask = std::uint64_t;
using TensorState = std::map<std::pair<Mask, Mask>, cplx>;

int parity_below(Mask m, int k) { return std::popcount(m & ((Mask(1) << k) - 1)) & 1; }

// B(phi) = b*(J0 phi) (x) 1 + (-1)^N (x) b*(Jinf phi)
TensorState apply_split_creator(const TensorState& in, const Eigen::VectorXcd& left,
                                const Eigen::VectorXcd& right) {
    TensorState out;
    const int n = int(left.size());
    for (const auto& [key, c] : in) {
        const auto [L, R] = key;
        for (int k = 0; k < n; ++k) {
            if (!(L >> k & 1) && left(k) != 0.0) {
                const double s = parity_below(L, k) ? -1.0 : 1.0;
                out[{L | (Mask(1) << k), R}] += s * left(k) * c;
            }
            if (!(R >> k & 1) && right(k) != 0.0) {
                const int par = (std::popcount(L) + parity_below(R, k)) & 1;
                out[{L, R | (Mask(1) << k)}] += (par ? -1.0 : 1.0) * right(k) * c;
            }
        }
    }
    return out;
}

double tensor_norm(const TensorState& t) {
    double s = 0.0;
    for (const auto& kv : t) s += std::norm(kv.second);
    return std::sqrt(s);
}

double tensor_distance(const TensorState& a, const TensorState& b) {
    TensorState d = a;
    for (const auto& [k, v] : b) d[k] -= v;
    return tensor_norm(d);
}

} // namespace

PartitionReport partition_check(const MomentumGrid& grid, double R, int samples, std::uint64_t seed,
                                const std::function<double(double)>& j0) {
    const int n = int(grid.size());
    if (n > 63) throw std::invalid_argument("partition_check: at most 63 modes");
    PartitionReport rep;
    const Eigen::MatrixXcd y = position_operator(grid);
    rep.hermiticity_error = (y - y.adjoint()).cwiseAbs().maxCoeff();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(y);
    Eigen::VectorXd d0(n), dinf(n);
    for (int k = 0; k < n; ++k) {
        const double v = std::clamp(j0(std::abs(es.eigenvalues()(k)) / R), 0.0, 1.0);
        d0(k) = v;
        dinf(k) = std::sqrt(1.0 - v * v);
    }
    const Eigen::MatrixXcd& V = es.eigenvectors();
    const Eigen::MatrixXcd J0 = V * d0.asDiagonal() * V.adjoint();
    const Eigen::MatrixXcd Jinf = V * dinf.asDiagonal() * V.adjoint();
    rep.unity_error =
        (J0.adjoint() * J0 + Jinf.adjoint() * Jinf - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();

    // Split map on basis states with up to two particles: product of B(e_i)
    // in creation order, rightmost first.
    std::vector<Mask> basis{0};
    for (int a = 0; a < n; ++a) basis.push_back(Mask(1) << a);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) basis.push_back((Mask(1) << a) | (Mask(1) << b));

    std::vector<TensorState> images;
    for (Mask m : basis) {
        TensorState t{{{0, 0}, 1.0}};
        std::vector<int> occ;
        for (int k = 0; k < n; ++k)
            if (m >> k & 1) occ.push_back(k);
        for (auto it = occ.rbegin(); it != occ.rend(); ++it)
            t = apply_split_creator(t, J0.col(*it), Jinf.col(*it));
        images.push_back(std::move(t));
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N01;
    for (int s = 0; s < samples; ++s) {
        Eigen::VectorXcd c(basis.size());
        for (Eigen::Index k = 0; k < c.size(); ++k) c(k) = cplx(N01(rng), N01(rng));
        TensorState img;
        for (std::size_t k = 0; k < basis.size(); ++k)
            for (const auto& [key, v] : images[k]) img[key] += c(k) * v;
        const double err = std::abs(tensor_norm(img) / c.norm() - 1.0);
        if (err > rep.isometry_error) {
            rep.isometry_error = err;
            rep.worst_sample = s;
        }
    }
    rep.samples = samples;

    // Product formula against the second-quantized route: Gamma(j) on the
    // doubled mode space followed by the canonical reordering, for one- and
    // two-particle vectors b*(phi1) b*(phi2) Omega.
    auto via_doubled_space = [&](const std::vector<Eigen::VectorXcd>& phis) {
        // Gamma(j) b*(phi_1)...b*(phi_k) Omega = c*(j phi_1) ... c*(j phi_k) Omega
        // with modes 0..n-1 for the near part and n..2n-1 for the far part.
        std::vector<Eigen::VectorXcd> jp;
        for (const auto& ph : phis) {
            Eigen::VectorXcd v(2 * n);
            v.head(n) = J0 * ph;
            v.tail(n) = Jinf * ph;
            jp.push_back(v);
        }
        TensorState out;
        if (jp.size() == 1) {
            for (int a = 0; a < 2 * n; ++a) {
                if (a < n)
                    out[{Mask(1) << a, 0}] += jp[0](a);
                else
                    out[{0, Mask(1) << (a - n)}] += jp[0](a);
            }
            return out;
        }
        // c*(u) c*(v) Omega = sum_{a<b} (u_a v_b - u_b v_a) c*_a c*_b Omega, and
        // the ascending product c*_a c*_b maps to |L> (x) |R> with no sign.
        for (int a = 0; a < 2 * n; ++a)
            for (int b = a + 1; b < 2 * n; ++b) {
                const cplx amp = jp[0](a) * jp[1](b) - jp[0](b) * jp[1](a);
                Mask L = 0, Rm = 0;
                for (int k : {a, b}) {
                    if (k < n)
                        L |= Mask(1) << k;
                    else
                        Rm |= Mask(1) << (k - n);
                }
                out[{L, Rm}] += amp;
            }
        return out;
    };
    for (int s = 0; s < std::max(1, samples / 10); ++s) {
        for (int k : {1, 2}) {
            std::vector<Eigen::VectorXcd> phis;
            for (int i = 0; i < k; ++i) {
                Eigen::VectorXcd v(n);
                for (int a = 0; a < n; ++a) v(a) = cplx(N01(rng), N01(rng));
                phis.push_back(v);
            }
            TensorState lhs{{{0, 0}, 1.0}};
            for (auto it = phis.rbegin(); it != phis.rend(); ++it)
                lhs = apply_split_creator(lhs, J0 * (*it), Jinf * (*it));
            const TensorState rhs = via_doubled_space(phis);
            double scale = 1.0;
            for (const auto& ph : phis) scale *= ph.norm();
            rep.product_formula_error = std::max(rep.product_formula_error, tensor_distance(lhs, rhs) / scale);
        }
    }
    return rep;
}

} // namespace zdecay
