#include "qpe/cli_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <sstream>

#include "qpe/errors.hpp"

namespace qpe {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "QPEF snapshots assume a little-endian host");

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
    fail(ErrorCode::config, "config key '" + key + "': " + what);
}

std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double get_double(const std::string& key, const json& v) {
    if (!v.is_number()) config_error(key, "number expected");
    return v.get<double>();
}

long long get_int(const std::string& key, const json& v) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
        double d = v.get<double>();
        if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<long long>(d);
    }
    config_error(key, "integer expected");
}

bool get_bool(const std::string& key, const json& v) {
    if (!v.is_boolean()) config_error(key, "true or false expected");
    return v.get<bool>();
}

std::string get_string(const std::string& key, const json& v) {
    if (!v.is_string()) config_error(key, "string expected");
    return v.get<std::string>();
}

std::vector<double> get_dvec(const std::string& key, const json& v) {
    if (!v.is_array()) config_error(key, "bracketed list expected");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(get_double(key, x));
    return out;
}

std::vector<long long> get_ivec(const std::string& key, const json& v) {
    if (!v.is_array()) config_error(key, "bracketed list expected");
    std::vector<long long> out;
    for (const auto& x : v) out.push_back(get_int(key, x));
    return out;
}

ForcingMode parse_forcing(const json& v) {
    const std::string key = "forcing";
    if (!v.is_array() || v.size() != 3) config_error(key, "expected [[l...], [j1, j2, j3], [a1, a2, a3]]");
    ForcingMode m;
    for (long long x : get_ivec(key, v[0])) m.l.push_back(static_cast<int>(x));
    auto j = get_ivec(key, v[1]);
    auto a = get_dvec(key, v[2]);
    if (j.size() != 3) config_error(key, "j needs 3 entries");
    if (a.size() != 3) config_error(key, "amplitude needs 3 real entries");
    for (int k = 0; k < 3; ++k) {
        m.j[k] = static_cast<int>(j[k]);
        m.amp[k] = a[k];
    }
    return m;
}

using Setter = std::function<void(RunConfig&, const std::string&, const json&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"nu", [](RunConfig& c, const std::string& k, const json& v) { c.nu = static_cast<int>(get_int(k, v)); }},
        {"L", [](RunConfig& c, const std::string& k, const json& v) { c.L = static_cast<int>(get_int(k, v)); }},
        {"K", [](RunConfig& c, const std::string& k, const json& v) { c.K = static_cast<int>(get_int(k, v)); }},
        {"grid_factor", [](RunConfig& c, const std::string& k, const json& v) { c.grid_factor = get_double(k, v); }},
        {"s0", [](RunConfig& c, const std::string& k, const json& v) { c.s0 = get_double(k, v); }},
        {"epsilon", [](RunConfig& c, const std::string& k, const json& v) { c.epsilon = get_double(k, v); }},
        {"gamma", [](RunConfig& c, const std::string& k, const json& v) { c.gamma = get_double(k, v); }},
        {"tau", [](RunConfig& c, const std::string& k, const json& v) { c.tau = get_double(k, v); }},
        {"c0", [](RunConfig& c, const std::string& k, const json& v) { c.c0 = get_double(k, v); }},
        {"k0", [](RunConfig& c, const std::string& k, const json& v) { c.k0 = static_cast<int>(get_int(k, v)); }},
        {"N0", [](RunConfig& c, const std::string& k, const json& v) { c.N0 = get_double(k, v); }},
        {"chi", [](RunConfig& c, const std::string& k, const json& v) { c.chi = get_double(k, v); }},
        {"M_target", [](RunConfig& c, const std::string& k, const json& v) { c.M_target = static_cast<int>(get_int(k, v)); }},
        {"omega", [](RunConfig& c, const std::string& k, const json& v) { c.omega = get_dvec(k, v); }},
        {"zeta", [](RunConfig& c, const std::string& k, const json& v) { c.zeta = get_dvec(k, v); }},
        {"seed",
         [](RunConfig& c, const std::string& k, const json& v) {
             if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
                 config_error(k, "nonnegative integer expected");
             c.seed = v.get<std::uint64_t>();
         }},
        {"forcing",
         [](RunConfig& c, const std::string&, const json& v) {
             // either one mode or a list of modes
             if (v.is_array() && !v.empty() && v[0].is_array() && !v[0].empty() && v[0][0].is_array()) {
                 for (const auto& m : v) c.forcing.push_back(parse_forcing(m));
             } else {
                 c.forcing.push_back(parse_forcing(v));
             }
         }},
        {"probe_amplitude", [](RunConfig& c, const std::string& k, const json& v) { c.probe_amplitude = get_double(k, v); }},
        {"newton_max_steps",
         [](RunConfig& c, const std::string& k, const json& v) { c.newton_max_steps = static_cast<int>(get_int(k, v)); }},
        {"newton_tol", [](RunConfig& c, const std::string& k, const json& v) { c.newton_tol = get_double(k, v); }},
        {"div_tol", [](RunConfig& c, const std::string& k, const json& v) { c.div_tol = get_double(k, v); }},
        {"straighten_max_steps",
         [](RunConfig& c, const std::string& k, const json& v) { c.straighten_max_steps = static_cast<int>(get_int(k, v)); }},
        {"straighten_tol", [](RunConfig& c, const std::string& k, const json& v) { c.straighten_tol = get_double(k, v); }},
        {"symbol_max_steps",
         [](RunConfig& c, const std::string& k, const json& v) { c.symbol_max_steps = static_cast<int>(get_int(k, v)); }},
        {"symbol_tol", [](RunConfig& c, const std::string& k, const json& v) { c.symbol_tol = get_double(k, v); }},
        {"kam_max_steps",
         [](RunConfig& c, const std::string& k, const json& v) { c.kam_max_steps = static_cast<int>(get_int(k, v)); }},
        {"kam_tol", [](RunConfig& c, const std::string& k, const json& v) { c.kam_tol = get_double(k, v); }},
        {"gamma_list", [](RunConfig& c, const std::string& k, const json& v) { c.gamma_list = get_dvec(k, v); }},
        {"samples",
         [](RunConfig& c, const std::string& k, const json& v) {
             auto n = get_int(k, v);
             if (n < 1) config_error(k, "must be positive");
             c.samples = static_cast<std::size_t>(n);
         }},
        {"predicate", [](RunConfig& c, const std::string& k, const json& v) { c.predicate = get_string(k, v); }},
        {"box_lo", [](RunConfig& c, const std::string& k, const json& v) { c.box_lo = get_dvec(k, v); }},
        {"box_hi", [](RunConfig& c, const std::string& k, const json& v) { c.box_hi = get_dvec(k, v); }},
        {"check_vectors",
         [](RunConfig& c, const std::string& k, const json& v) { c.check_vectors = static_cast<int>(get_int(k, v)); }},
        {"paper_constants", [](RunConfig& c, const std::string& k, const json& v) { c.paper_constants = get_bool(k, v); }},
        {"cache_transforms",
         [](RunConfig& c, const std::string& k, const json& v) { c.cache_transforms = get_bool(k, v); }},
    };
    return table;
}

void validate(const RunConfig& c) {
    if (c.nu < 1 || c.nu > kMaxNu) config_error("nu", "must lie in [1, " + std::to_string(kMaxNu) + "]");
    if (c.L < 1 || c.L > 40) config_error("L", "must lie in [1, 40]");
    if (c.K < 1 || c.K > 40) config_error("K", "must lie in [1, 40]");
    if (!(c.grid_factor >= 2.0)) config_error("grid_factor", "must be >= 2 for alias-free products");
    if (!(c.s0 >= 0.0)) config_error("s0", "must be nonnegative");
    if (!(c.epsilon >= 0.0)) config_error("epsilon", "must be nonnegative");
    if (!(c.gamma > 0.0 && c.gamma <= 1.0)) config_error("gamma", "must lie in (0, 1]");
    if (!(c.tau >= 0.0)) config_error("tau", "must be nonnegative (0 selects the default)");
    if (!(c.c0 >= 2.0)) config_error("c0", "must be >= 2");
    if (c.k0 < 0) config_error("k0", "must be nonnegative");
    if (!(c.N0 > 1.0)) config_error("N0", "must exceed 1");
    if (c.chi != 1.5) config_error("chi", "fixed at 3/2 by the method");
    if (c.M_target < 1) config_error("M_target", "must be >= 1");
    if (!c.omega.empty() && static_cast<int>(c.omega.size()) != c.nu) config_error("omega", "needs nu entries");
    if (!c.zeta.empty() && c.zeta.size() != 3) config_error("zeta", "needs 3 entries");
    for (const auto& m : c.forcing) {
        if (static_cast<int>(m.l.size()) != c.nu) config_error("forcing", "l needs nu entries");
        if (m.j[0] == 0 && m.j[1] == 0 && m.j[2] == 0) config_error("forcing", "zero space mean violated (mode with j = 0)");
        for (int x : m.l)
            if (std::abs(x) > c.L) config_error("forcing", "l outside the box |l| <= L");
        for (int x : m.j)
            if (std::abs(x) > c.K) config_error("forcing", "j outside the box |j| <= K");
        for (double a : m.amp)
            if (!std::isfinite(a)) config_error("forcing", "amplitudes must be finite");
    }
    if (!(c.probe_amplitude >= 0.0)) config_error("probe_amplitude", "must be nonnegative");
    if (c.newton_max_steps < 0) config_error("newton_max_steps", "must be nonnegative");
    if (!(c.newton_tol > 0.0)) config_error("newton_tol", "must be positive");
    if (!(c.div_tol > 0.0)) config_error("div_tol", "must be positive");
    if (c.straighten_max_steps < 1) config_error("straighten_max_steps", "must be positive");
    if (!(c.straighten_tol > 0.0)) config_error("straighten_tol", "must be positive");
    if (c.symbol_max_steps < 1) config_error("symbol_max_steps", "must be positive");
    if (!(c.symbol_tol > 0.0)) config_error("symbol_tol", "must be positive");
    if (c.kam_max_steps < 1) config_error("kam_max_steps", "must be positive");
    if (!(c.kam_tol >= 0.0)) config_error("kam_tol", "must be nonnegative (0 selects 1e-10 eps)");
    if (c.gamma_list.empty()) config_error("gamma_list", "must not be empty");
    for (double g : c.gamma_list)
        if (!(g > 0.0 && g <= 1.0)) config_error("gamma_list", "entries must lie in (0, 1]");
    try {
        parse_predicate(c.predicate);
    } catch (const Error&) {
        config_error("predicate", "unknown predicate '" + c.predicate + "' (diophantine, melnikov1, melnikov2, full)");
    }
    const std::size_t dim = static_cast<std::size_t>(c.nu) + 3;
    if (!c.box_lo.empty() && c.box_lo.size() != dim) config_error("box_lo", "needs nu + 3 entries");
    if (!c.box_hi.empty() && c.box_hi.size() != dim) config_error("box_hi", "needs nu + 3 entries");
    if (c.check_vectors < 1) config_error("check_vectors", "must be positive");
}

}  // namespace

// ---- RunConfig ----

Lattice RunConfig::lattice() const { return Lattice(nu, L, K, grid_factor); }

ParameterPoint RunConfig::lambda() const {
    auto p = golden_parameter(nu);
    if (!omega.empty()) p.omega = omega;
    if (!zeta.empty())
        for (int k = 0; k < 3; ++k) p.zeta[k] = zeta[k];
    return p;
}

DiophantineConfig RunConfig::diophantine() const {
    auto c = paper_constants ? DiophantineConfig::paper(nu, gamma) : DiophantineConfig::practical(nu, gamma);
    if (tau > 0) c.tau = tau;
    c.c0 = c0;
    if (!paper_constants) c.k0 = k0;
    c.validate();
    return c;
}

NashMoserSchedule RunConfig::schedule() const {
    NashMoserSchedule s;
    // the proof couples the first truncation to gamma
    const double N0 = paper_constants ? 1.0 / gamma : this->N0;
    s.N0 = N0;
    s.chi = chi;
    s.max_steps = newton_max_steps;
    s.tol = newton_tol;
    s.s0 = s0;
    s.div_tol = div_tol;
    auto& st = s.stages;
    st.s0 = s0;
    st.M_target = M_target;
    st.straighten.N0 = N0;
    st.straighten.max_steps = straighten_max_steps;
    st.straighten.tol = straighten_tol;
    st.straighten.s0 = s0;
    st.symbol.N0 = N0;
    st.symbol.max_steps = symbol_max_steps;
    st.symbol.tol = symbol_tol;
    st.symbol.s0 = s0;
    st.kam.N0 = N0;
    st.kam.max_steps = kam_max_steps;
    st.kam.tol = kam_tol;
    st.kam.s0 = s0;
    st.kam.M = M_target;
    s.reuse_stages = cache_transforms;
    return s;
}

ParameterBox RunConfig::box() const {
    ParameterBox b;
    const std::size_t dim = static_cast<std::size_t>(nu) + 3;
    b.lo = box_lo.empty() ? std::vector<double>(dim, 1.0) : box_lo;
    b.hi = box_hi.empty() ? std::vector<double>(dim, 2.0) : box_hi;
    return b;
}

FourierField RunConfig::forcing_field() const {
    std::vector<TrigMode> modes;
    for (const auto& m : forcing) {
        TrigMode t;
        for (int k = 0; k < nu; ++k) t.mode.l[k] = m.l[k];
        t.mode.j = m.j;
        t.amp.assign(m.amp.begin(), m.amp.end());
        modes.push_back(t);
    }
    return trig_field(lattice(), 3, modes, true);
}

EulerProblem RunConfig::problem() const { return EulerProblem::make(lattice(), epsilon, lambda(), forcing_field()); }

json RunConfig::to_json() const {
    json j;
    j["nu"] = nu;
    j["L"] = L;
    j["K"] = K;
    j["grid_factor"] = grid_factor;
    j["s0"] = s0;
    j["epsilon"] = epsilon;
    j["gamma"] = gamma;
    j["tau"] = tau;
    j["c0"] = c0;
    j["k0"] = k0;
    j["N0"] = N0;
    j["chi"] = chi;
    j["M_target"] = M_target;
    auto lam = lambda();
    j["omega"] = lam.omega;
    j["zeta"] = std::vector<double>(lam.zeta.begin(), lam.zeta.end());
    j["seed"] = seed;
    json f = json::array();
    for (const auto& m : forcing) f.push_back(json::array({m.l, m.j, m.amp}));
    j["forcing"] = f;
    j["probe_amplitude"] = probe_amplitude;
    j["newton_max_steps"] = newton_max_steps;
    j["newton_tol"] = newton_tol;
    j["div_tol"] = div_tol;
    j["straighten_max_steps"] = straighten_max_steps;
    j["straighten_tol"] = straighten_tol;
    j["symbol_max_steps"] = symbol_max_steps;
    j["symbol_tol"] = symbol_tol;
    j["kam_max_steps"] = kam_max_steps;
    j["kam_tol"] = kam_tol;
    j["gamma_list"] = gamma_list;
    j["samples"] = samples;
    j["predicate"] = predicate;
    auto b = box();
    j["box_lo"] = b.lo;
    j["box_hi"] = b.hi;
    j["check_vectors"] = check_vectors;
    j["paper_constants"] = paper_constants;
    j["cache_transforms"] = cache_transforms;
    return j;
}

std::string RunConfig::echo() const {
    std::ostringstream os;
    auto j = to_json();
    for (const auto& [key, val] : j.items()) {
        if (key == "forcing") {
            for (const auto& m : val) os << "forcing = " << m.dump() << "\n";
        } else if (val.is_string()) {
            os << key << " = " << val.get<std::string>() << "\n";
        } else {
            os << key << " = " << val.dump() << "\n";
        }
    }
    return os.str();
}

RunConfig config_from_json(const json& j) {
    if (!j.is_object()) fail(ErrorCode::config, "config: object expected");
    RunConfig c;
    const auto& table = setters();
    for (const auto& [key, val] : j.items()) {
        auto it = table.find(key);
        if (it == table.end()) config_error(key, "unknown key");
        it->second(c, key, val);
    }
    validate(c);
    return c;
}

RunConfig parse_config(const std::string& text) {
    json j = json::object();
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        auto hash = raw.find('#');
        auto line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::config, "config line " + std::to_string(lineno) + ": expected key = value");
        auto key = trim(line.substr(0, eq));
        auto text_val = trim(line.substr(eq + 1));
        if (key.empty()) fail(ErrorCode::config, "config line " + std::to_string(lineno) + ": missing key");
        if (text_val.empty()) config_error(key, "missing value");
        json val = json::parse(text_val, nullptr, false);
        if (val.is_discarded()) {
            if (text_val.find_first_of("[]{},\"") != std::string::npos) config_error(key, "malformed value '" + text_val + "'");
            val = text_val;
        }
        if (key == "forcing") {
            if (!j.contains("forcing")) j["forcing"] = json::array();
            j["forcing"].push_back(val);
        } else {
            if (j.contains(key)) config_error(key, "duplicate key");
            j[key] = val;
        }
    }
    // repeated forcing lines each hold one mode
    if (j.contains("forcing")) {
        json modes = json::array();
        for (const auto& m : j["forcing"]) {
            if (m.is_array() && !m.empty() && m[0].is_array() && !m[0].empty() && m[0][0].is_array()) {
                for (const auto& x : m) modes.push_back(x);
            } else {
                modes.push_back(m);
            }
        }
        j["forcing"] = modes;
    }
    return config_from_json(j);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::config, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---- persistence ----

namespace {

constexpr char kMagic[4] = {'Q', 'P', 'E', 'F'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& is, const std::string& path) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) fail(ErrorCode::precondition, "snapshot '" + path + "': truncated file");
    return v;
}

std::uint64_t fnv1a(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

void write_snapshot(const std::string& path, const FourierField& f, const json& meta) {
    require(!f.empty(), "write_snapshot: empty field");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::precondition, "snapshot '" + path + "': cannot open for writing");
    const auto& lat = f.lattice();
    os.write(kMagic, 4);
    put<std::uint32_t>(os, kVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(lat.nu()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(lat.L()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(lat.K()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.ncomp()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.parity()));
    put<double>(os, lat.grid_factor());
    const auto& c = f.coeffs();
    put<std::uint64_t>(os, c.size());
    const std::size_t bytes = c.size() * sizeof(cplx);
    os.write(reinterpret_cast<const char*>(c.data()), static_cast<std::streamsize>(bytes));
    put<std::uint64_t>(os, fnv1a(c.data(), bytes));
    const std::string m = meta.dump();
    put<std::uint64_t>(os, m.size());
    os.write(m.data(), static_cast<std::streamsize>(m.size()));
    if (!os) fail(ErrorCode::precondition, "snapshot '" + path + "': write failed");
}

Snapshot read_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::precondition, "snapshot '" + path + "': cannot open");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) fail(ErrorCode::precondition, "snapshot '" + path + "': not a QPEF file");
    auto version = take<std::uint32_t>(is, path);
    if (version != kVersion) fail(ErrorCode::precondition, "snapshot '" + path + "': unsupported version");
    auto nu = take<std::uint32_t>(is, path);
    auto L = take<std::uint32_t>(is, path);
    auto K = take<std::uint32_t>(is, path);
    auto ncomp = take<std::uint32_t>(is, path);
    auto parity = take<std::uint32_t>(is, path);
    auto gf = take<double>(is, path);
    if (nu < 1 || nu > static_cast<std::uint32_t>(kMaxNu) || L < 1 || L > 40 || K < 1 || K > 40 ||
        (ncomp != 1 && ncomp != 3 && ncomp != 9) || parity > 2 || !(gf >= 2.0))
        fail(ErrorCode::precondition, "snapshot '" + path + "': corrupt header");
    Lattice lat(static_cast<int>(nu), static_cast<int>(L), static_cast<int>(K), gf);
    FourierField f(lat, static_cast<int>(ncomp), static_cast<Parity>(parity));
    auto count = take<std::uint64_t>(is, path);
    if (count != f.coeffs().size()) fail(ErrorCode::precondition, "snapshot '" + path + "': coefficient count mismatch");
    const std::size_t bytes = count * sizeof(cplx);
    is.read(reinterpret_cast<char*>(f.coeffs().data()), static_cast<std::streamsize>(bytes));
    if (!is) fail(ErrorCode::precondition, "snapshot '" + path + "': truncated coefficients");
    auto hash = take<std::uint64_t>(is, path);
    if (hash != fnv1a(f.coeffs().data(), bytes)) fail(ErrorCode::precondition, "snapshot '" + path + "': checksum mismatch");
    auto mlen = take<std::uint64_t>(is, path);
    std::string m(mlen, '\0');
    is.read(m.data(), static_cast<std::streamsize>(mlen));
    if (!is) fail(ErrorCode::precondition, "snapshot '" + path + "': truncated metadata");
    Snapshot s;
    s.field = std::move(f);
    s.meta = json::parse(m, nullptr, false);
    if (s.meta.is_discarded()) fail(ErrorCode::precondition, "snapshot '" + path + "': corrupt metadata");
    return s;
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::trunc), ncols_(header.size()) {
    if (!out_) fail(ErrorCode::precondition, "cannot open '" + path + "' for writing");
    for (const auto& h : header) *this << h;
    end_row();
}

CsvWriter::~CsvWriter() { out_.flush(); }

void CsvWriter::sep() {
    if (col_ > 0) out_ << ',';
    ++col_;
}

CsvWriter& CsvWriter::operator<<(double x) {
    sep();
    out_ << format_double(x);
    return *this;
}

CsvWriter& CsvWriter::operator<<(long long x) {
    sep();
    out_ << x;
    return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& s) {
    sep();
    if (s.find_first_of(",\"\n") != std::string::npos) {
        out_ << '"';
        for (char c : s) out_ << (c == '"' ? "\"\"" : std::string(1, c));
        out_ << '"';
    } else {
        out_ << s;
    }
    return *this;
}

void CsvWriter::end_row() {
    require(col_ == ncols_, "csv: row has " + std::to_string(col_) + " columns, header has " + std::to_string(ncols_));
    out_ << '\n';
    col_ = 0;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) fail(ErrorCode::precondition, "cannot open '" + path + "' for writing");
    os << j.dump(2) << "\n";
}

int exit_code(ErrorCode code) { return static_cast<int>(code); }

}  // namespace qpe
