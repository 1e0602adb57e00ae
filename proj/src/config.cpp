#include "zdecay/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <variant>

namespace zdecay {

namespace {

using FieldRef = std::variant<double*, int*, bool*, std::string*, std::vector<double>*, std::vector<int>*,
                              std::optional<int>*, std::uint64_t*>;

std::vector<std::pair<std::string, FieldRef>> fields(RunConfig& c) {
    return {
        {"physics.m_e", &c.m_e},
        {"physics.m_z", &c.m_z},
        {"physics.g_v_prime", &c.g_v_prime},
        {"physics.beta", &c.beta},
        {"physics.eta", &c.eta},
        {"coupling.g", &c.g_sweep},
        {"coupling.absolute", &c.g_absolute},
        {"grid.kind", &c.grid_kind},
        {"grid.nodes", &c.grid_nodes},
        {"grid.max", &c.grid_max},
        {"grid.two_j_max", &c.two_j_max},
        {"bosons.kind", &c.boson_kind},
        {"bosons.directions", &c.boson_directions},
        {"bosons.radial", &c.boson_radial},
        {"bosons.k_max", &c.boson_k_max},
        {"bosons.count", &c.boson_count},
        {"bosons.n_max", &c.boson_n_max},
        {"caps.electrons", &c.cap_electrons},
        {"caps.positrons", &c.cap_positrons},
        {"caps.bosons", &c.cap_bosons},
        {"caps.sector", &c.sector},
        {"kernel.kind", &c.kernel_kind},
        {"kernel.s_family", &c.s_family},
        {"kernel.g_family", &c.g_family},
        {"kernel.p_support", &c.p_support},
        {"kernel.k_support", &c.k_support},
        {"kernel.amplitude", &c.kernel_amplitude},
        {"kernel.localization.r0", &c.loc_r0},
        {"kernel.localization.scale", &c.loc_scale},
        {"hypothesis.epsilon", &c.hyp_epsilon},
        {"hypothesis.n_aux", &c.hyp_n_aux},
        {"hypothesis.padding", &c.hyp_padding},
        {"hypothesis.growth_tol", &c.hyp_growth_tol},
        {"mourre.delta", &c.mourre_delta},
        {"mourre.g", &c.mourre_g},
        {"virial.g", &c.virial_g},
        {"semigroup.t", &c.semigroup_t},
        {"c11.nodes", &c.c11_nodes},
        {"c11.q_max", &c.c11_q_max},
        {"c11.t_min", &c.c11_t_min},
        {"c11.points", &c.c11_points},
        {"c11.p_support", &c.c11_p_support},
        {"lap.s", &c.lap_s},
        {"lap.nodes", &c.lap_nodes},
        {"lap.q_max", &c.lap_q_max},
        {"lap.p_support", &c.lap_p_support},
        {"lap.g", &c.lap_g},
        {"lap.lambdas", &c.lap_lambdas},
        {"lap.eps_min", &c.lap_eps_min},
        {"lap.eps_max", &c.lap_eps_max},
        {"lap.eps_points", &c.lap_eps_points},
        {"decay.lo", &c.decay_lo},
        {"decay.hi", &c.decay_hi},
        {"decay.t_min", &c.decay_t_min},
        {"decay.t_max", &c.decay_t_max},
        {"decay.t_points", &c.decay_t_points},
        {"decay.t_fit_min", &c.decay_t_fit_min},
        {"tolerances.algebra", &c.tol_algebra},
        {"tolerances.kummer", &c.tol_kummer},
        {"tolerances.commutator", &c.tol_commutator},
        {"tolerances.eigen", &c.tol_eigen},
        {"tolerances.virial", &c.tol_virial},
        {"tolerances.partition_isometry", &c.tol_partition_isometry},
        {"tolerances.partition_unity", &c.tol_partition_unity},
        {"samples.relative_bound", &c.relative_bound_samples},
        {"samples.partition", &c.partition_samples},
        {"seed", &c.seed},
    };
}

template <class T>
T scalar(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) throw ConfigError("config: " + key + " expects a scalar");
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError("config: cannot parse " + key + " = '" + n.Scalar() + "'");
    }
}

template <class T>
std::vector<T> sequence(const YAML::Node& n, const std::string& key) {
    if (n.IsScalar()) return {scalar<T>(n, key)};
    if (!n.IsSequence()) throw ConfigError("config: " + key + " expects a list");
    std::vector<T> out;
    for (const auto& x : n) out.push_back(scalar<T>(x, key));
    return out;
}

void assign(const FieldRef& ref, const YAML::Node& n, const std::string& key) {
    std::visit(
        [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, std::vector<double>>)
                *p = sequence<double>(n, key);
            else if constexpr (std::is_same_v<T, std::vector<int>>)
                *p = sequence<int>(n, key);
            else if constexpr (std::is_same_v<T, std::optional<int>>) {
                const std::string s = scalar<std::string>(n, key);
                if (s == "none" || s == "null" || s == "~")
                    p->reset();
                else
                    *p = scalar<int>(n, key);
            } else
                *p = scalar<T>(n, key);
        },
        ref);
}

void flatten(const YAML::Node& n, const std::string& prefix, std::map<std::string, YAML::Node>& out) {
    if (n.IsMap()) {
        for (const auto& kv : n) {
            const std::string k = kv.first.as<std::string>();
            flatten(kv.second, prefix.empty() ? k : prefix + "." + k, out);
        }
    } else if (!prefix.empty()) {
        out[prefix] = n;
    }
}

} // namespace

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string env_name(const std::string& key) {
    std::string out = "ZDECAY_";
    for (char ch : key) out += ch == '.' ? '_' : char(std::toupper(static_cast<unsigned char>(ch)));
    return out;
}

std::vector<std::string> config_keys() {
    RunConfig c;
    std::vector<std::string> out;
    for (const auto& [k, _] : fields(c)) out.push_back(k);
    return out;
}

void RunConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    if (!(m_e > 0.0)) fail("physics.m_e must be positive");
    if (!(m_e < m_z)) fail("physics.m_e must be smaller than physics.m_z");
    if (grid_kind != "uniform_energy" && grid_kind != "uniform_momentum") fail("grid.kind must be uniform_energy or uniform_momentum");
    if (grid_nodes < 2) fail("grid.nodes must be at least 2");
    if (!(grid_max > 0.0)) fail("grid.max must be positive");
    if (two_j_max < 1 || two_j_max % 2 == 0) fail("grid.two_j_max must be a positive odd integer");
    if (boson_kind != "directional" && boson_kind != "toy") fail("bosons.kind must be directional or toy");
    if (boson_n_max < 1) fail("bosons.n_max must be at least 1");
    if (cap_electrons < 0 || cap_positrons < 0 || cap_bosons < 0) fail("caps must be non-negative");
    if (kernel_kind != "model" && kernel_kind != "physical") fail("kernel.kind must be model or physical");
    if (s_family != "oscillatory" && s_family != "unit") fail("kernel.s_family must be oscillatory or unit");
    static const std::set<std::string> gs{"smooth_bump", "infrared_violating", "with_jump", "zero"};
    if (!gs.count(g_family)) fail("kernel.g_family must be one of smooth_bump, infrared_violating, with_jump, zero");
    if (!(beta > 0.0) || !(eta > 0.0)) fail("physics.beta and physics.eta must be positive");
    if (g_sweep.empty()) fail("coupling.g must not be empty");
    if (!g_absolute)
        for (double g : g_sweep)
            if (std::abs(g) > 1.0) fail("coupling.g fractions must lie in [-1, 1]");
    for (double g : mourre_g)
        if (std::abs(g) > 1.0) fail("mourre.g fractions must lie in [-1, 1]");
    if (std::abs(virial_g) > 1.0 || std::abs(lap_g) > 1.0) fail("virial.g and lap.g are fractions of g0_max");
    if (!(mourre_delta > 0.0) || !(2.0 * mourre_delta * m_e < m_z)) fail("mourre.delta must lie in (0, m_z / (2 m_e))");
    if (c11_nodes < 4 || !(c11_t_min > 0.0) || c11_points < 3) fail("c11 settings out of range");
    if (lap_nodes.size() < 2 || lap_nodes[0] >= lap_nodes[1]) fail("lap.nodes needs two increasing node counts");
    if (!(lap_s > 0.5)) fail("lap.s must exceed 1/2");
    if (!(lap_eps_min > 0.0) || !(lap_eps_max > lap_eps_min) || lap_eps_points < 3) fail("lap eps range out of order");
    if (!(decay_t_min > 0.0) || !(decay_t_max > decay_t_min) || decay_t_points < 3) fail("decay t range out of order");
    if (!(decay_lo < decay_hi)) fail("decay.lo must be below decay.hi");
    if (semigroup_t.empty()) fail("semigroup.t must not be empty");
    for (double t : semigroup_t)
        if (!(t >= 0.0)) fail("semigroup.t values must be non-negative");
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, ref] : fields(const_cast<RunConfig&>(*this))) {
        std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, std::optional<int>>)
                    j[k] = p->has_value() ? nlohmann::json(**p) : nlohmann::json("none");
                else
                    j[k] = *p;
            },
            ref);
    }
    return j;
}

std::string RunConfig::digest() const { return fnv1a_hex(to_json().dump()); }

RunConfig parse_config(const std::string& yaml_text, bool use_env) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config: YAML parse error: ") + e.what());
    }
    std::map<std::string, YAML::Node> flat;
    if (root.IsDefined() && !root.IsNull()) {
        if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");
        flatten(root, "", flat);
    }

    RunConfig c;
    auto fs = fields(c);
    std::map<std::string, FieldRef> by_key(fs.begin(), fs.end());
    for (const auto& [k, node] : flat) {
        auto it = by_key.find(k);
        if (it == by_key.end()) throw ConfigError("config: unknown key " + k);
        assign(it->second, node, k);
    }
    if (use_env) {
        for (const auto& [k, ref] : fs) {
            if (const char* v = std::getenv(env_name(k).c_str())) {
                YAML::Node n;
                try {
                    n = YAML::Load(v);
                } catch (const YAML::Exception&) {
                    throw ConfigError("config: cannot parse " + env_name(k));
                }
                assign(ref, n, env_name(k));
            }
        }
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path, bool use_env) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), use_env);
}

} // namespace zdecay
