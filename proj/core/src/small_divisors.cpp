#include "qpe/small_divisors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "qpe/errors.hpp"
#include "qpe/parallel.hpp"

namespace qpe {

double ParameterPoint::divisor(const int* l, const int* j) const { return divisor(l, j, zeta); }

double ParameterPoint::divisor(const int* l, const int* j, const std::array<double, 3>& m) const {
    double d = 0;
    for (std::size_t k = 0; k < omega.size(); ++k) d += omega[k] * l[k];
    for (int k = 0; k < 3; ++k) d += m[k] * j[k];
    return d;
}

void DiophantineConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) fail(ErrorCode::config, "gamma must lie in [0, 1]");
    if (!(tau > 0.0)) fail(ErrorCode::config, "tau must be positive");
    if (!(c0 >= 2.0)) fail(ErrorCode::config, "c0 must be >= 2");
    if (k0 < 0) fail(ErrorCode::config, "k0 must be >= 0");
}

ParameterPoint golden_parameter(int nu) {
    static const double roots[] = {2, 3, 5, 7, 11, 13, 17};
    ParameterPoint p;
    for (int k = 0; k < nu; ++k) p.omega.push_back(std::sqrt(roots[k % 7]) * (k >= 2 ? 0.5 : 1.0));
    for (int k = 0; k < 3; ++k) p.zeta[k] = 0.5 * std::sqrt(roots[(k + std::max(nu, 2)) % 7]);
    return p;
}

DiophantineConfig DiophantineConfig::practical(int nu, double gamma) {
    DiophantineConfig c;
    c.gamma = gamma;
    c.tau = 2.0 * (nu + 3);
    c.k0 = 0;
    return c;
}

DiophantineConfig DiophantineConfig::paper(int nu, double gamma) {
    DiophantineConfig c;
    c.gamma = gamma;
    c.tau = 9.0 * std::max(nu, 3) + 1.0;
    c.k0 = 11;
    return c;
}

namespace {
double psi(double r) { return r > 0 ? std::exp(-1.0 / r) : 0.0; }
}  // namespace

double chi(double t) {
    double r = (std::abs(t) - 1.0 / 3.0) * 3.0;
    if (r <= 0) return 0.0;
    if (r >= 1) return 1.0;
    double a = psi(r), b = psi(1.0 - r);
    return a / (a + b);
}

cplx ext_inverse_factor(double d, double bracket, const DiophantineConfig& cfg) {
    if (d == 0.0) return 0.0;
    double c = 1.0;
    if (cfg.gamma > 0) {
        double arg = d / cfg.gamma * std::pow(bracket, cfg.tau);
        c = chi(arg);
    }
    if (c == 0.0) return 0.0;
    return c / cplx(0.0, d);
}

std::string DivisorFailure::describe(int nu) const {
    std::ostringstream os;
    os << "l=(";
    for (int k = 0; k < nu; ++k) os << (k ? "," : "") << l[k];
    os << ") j=(" << j[0] << "," << j[1] << "," << j[2] << ") j'=(" << jp[0] << "," << jp[1] << "," << jp[2]
       << ") ratio=" << worst_ratio;
    return os.str();
}

namespace {

double norm_l(const std::int8_t* l, int nu) {
    double s = 0;
    for (int k = 0; k < nu; ++k) s += double(l[k]) * l[k];
    return std::sqrt(s);
}

void copy_l(std::array<int, kMaxNu>& dst, const std::int8_t* src, int nu) {
    dst.fill(0);
    for (int k = 0; k < nu; ++k) dst[k] = src[k];
}
void copy_j(std::array<int, 3>& dst, const std::int8_t* src) {
    for (int k = 0; k < 3; ++k) dst[k] = src[k];
}


}  // namespace

DivisorFailure diophantine_check(const ParameterPoint& lambda, const DiophantineConfig& cfg, const Lattice& lat) {
    require(static_cast<int>(lambda.omega.size()) == lat.nu(), "diophantine_check: omega size mismatch");
    DivisorFailure res;
    res.worst_ratio = std::numeric_limits<double>::infinity();
    if (cfg.gamma == 0.0) return res;
    const std::size_t center = lat.index(lat.time_zero(), lat.space_zero());
    // (l, j) and (-l, -j) give the same |divisor|
    for (std::size_t idx = center + 1; idx < lat.size(); ++idx) {
        const auto* lc = lat.time_coords(lat.time_of(idx));
        const auto* jc = lat.space_coords(lat.space_of(idx));
        int l[kMaxNu] = {0}, j[3];
        for (int k = 0; k < lat.nu(); ++k) l[k] = lc[k];
        for (int k = 0; k < 3; ++k) j[k] = jc[k];
        double d = std::abs(lambda.divisor(l, j));
        double ratio = d * std::pow(lat.bracket_idx(idx), cfg.tau) / (cfg.c0 * cfg.gamma);
        if (ratio < res.worst_ratio) {
            res.worst_ratio = ratio;
            copy_l(res.l, lc, lat.nu());
            copy_j(res.j, jc);
        }
    }
    res.pass = res.worst_ratio >= 1.0;
    return res;
}

FourierField transport_inverse_ext(const FourierField& u, const std::array<double, 3>& m,
                                   const ParameterPoint& lambda, const DiophantineConfig& cfg, bool drop_mean) {
    const auto& lat = u.lattice();
    require(static_cast<int>(lambda.omega.size()) == lat.nu(), "transport_inverse_ext: omega size mismatch");
    const std::size_t center = lat.index(lat.time_zero(), lat.space_zero());
    if (!drop_mean)
        for (int c = 0; c < u.ncomp(); ++c)
            require(std::abs(u.at(center, c)) <= 1e-14, "transport_inverse_ext: nonzero (phi, x)-mean");
    FourierField out(lat, u.ncomp(), flip(u.parity()));
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        if (idx == center) continue;
        const auto* lc = lat.time_coords(lat.time_of(idx));
        const auto* jc = lat.space_coords(lat.space_of(idx));
        int l[kMaxNu] = {0}, j[3];
        for (int k = 0; k < lat.nu(); ++k) l[k] = lc[k];
        for (int k = 0; k < 3; ++k) j[k] = jc[k];
        bool any = false;
        for (int c = 0; c < u.ncomp(); ++c) any = any || u.at(idx, c) != 0.0;
        if (!any) continue;
        cplx f = ext_inverse_factor(lambda.divisor(l, j, m), lat.bracket_idx(idx), cfg);
        for (int c = 0; c < u.ncomp(); ++c) out.at(idx, c) = f * u.at(idx, c);
    }
    return out;
}

Eigen::Matrix<cplx, 9, 9> homological_matrix(double d, const Mat3& Qj, const Mat3& Qjp) {
    // vec(Qj X) = (I kron Qj) vec X, vec(X Qjp) = (Qjp^T kron I) vec X
    Eigen::Matrix<cplx, 9, 9> A = Eigen::Matrix<cplx, 9, 9>::Zero();
    for (int b = 0; b < 3; ++b)
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) A(3 * b + r, 3 * b + c) += Qj(r, c);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int r = 0; r < 3; ++r) A(3 * a + r, 3 * b + r) -= Qjp(b, a);
    for (int k = 0; k < 9; ++k) A(k, k) += cplx(0.0, d);
    return A;
}

double smallest_singular_value(const Eigen::Matrix<cplx, 9, 9>& A) {
    Eigen::JacobiSVD<Eigen::Matrix<cplx, 9, 9>> svd(A);
    return svd.singularValues().minCoeff();
}

namespace {

double spectral_norm3(const Mat3& M) {
    Eigen::JacobiSVD<Mat3> svd(M);
    return svd.singularValues()(0);
}

struct SpaceTable {
    std::vector<double> norm;  // |j| per space index
    std::vector<double> qnorm;  // ||Q_j||_2
    std::vector<double> jtau;   // |j|^tau
};

SpaceTable space_table(const Lattice& lat, const DiagonalBlocks& Q, double tau) {
    SpaceTable t;
    t.norm.resize(lat.n_space());
    t.qnorm.assign(lat.n_space(), 0.0);
    t.jtau.resize(lat.n_space());
    for (std::size_t s = 0; s < lat.n_space(); ++s) {
        t.norm[s] = std::sqrt(double(lat.space_norm2(s)));
        t.jtau[s] = std::pow(t.norm[s], tau);
        if (!Q.empty()) t.qnorm[s] = spectral_norm3(Q[s]);
    }
    return t;
}

}  // namespace

DivisorFailure melnikov2_check(const ParameterPoint& lambda, const DiagonalBlocks& Q, const DiophantineConfig& cfg,
                               const Lattice& lat, double N) {
    require(static_cast<int>(lambda.omega.size()) == lat.nu(), "melnikov2_check: omega size mismatch");
    require(Q.empty() || Q.size() == lat.n_space(), "melnikov2_check: Q must have one block per space index");
    DivisorFailure res;
    res.worst_ratio = std::numeric_limits<double>::infinity();
    if (cfg.gamma == 0.0) return res;
    const SpaceTable st = space_table(lat, Q, cfg.tau);
    const double N2 = N * N;
    for (std::size_t t = 0; t < lat.n_time(); ++t) {
        if (lat.time_norm2(t) > N2) continue;
        const auto* lc = lat.time_coords(t);
        int l[kMaxNu] = {0};
        for (int k = 0; k < lat.nu(); ++k) l[k] = lc[k];
        const double wl = std::pow(std::max(1.0, norm_l(lc, lat.nu())), cfg.tau);
        for (std::size_t sp = 0; sp < lat.n_space(); ++sp) {
            if (sp == lat.space_zero()) continue;
            const auto* jp = lat.space_coords(sp);
            for (std::size_t s = 0; s < lat.n_space(); ++s) {
                if (s == lat.space_zero()) continue;
                if (t == lat.time_zero() && s == sp) continue;
                const auto* j = lat.space_coords(s);
                int dj[3] = {j[0] - jp[0], j[1] - jp[1], j[2] - jp[2]};
                if (dj[0] * dj[0] + dj[1] * dj[1] + dj[2] * dj[2] > N2) continue;
                double d = lambda.divisor(l, dj);
                double w = wl * st.jtau[s] * st.jtau[sp] / cfg.gamma;
                double lb = (std::abs(d) - st.qnorm[s] - st.qnorm[sp]) * w;
                if (lb >= res.worst_ratio) continue;
                double sigma = Q.empty() ? std::abs(d) : smallest_singular_value(homological_matrix(d, Q[s], Q[sp]));
                double ratio = sigma * w;
                if (ratio < res.worst_ratio) {
                    res.worst_ratio = ratio;
                    copy_l(res.l, lc, lat.nu());
                    copy_j(res.j, j);
                    copy_j(res.jp, jp);
                }
            }
        }
    }
    res.pass = res.worst_ratio >= 1.0;
    return res;
}

DiagonalBlocks normal_form_blocks(const ParameterPoint& lambda, const DiagonalBlocks& Q, const Lattice& lat) {
    DiagonalBlocks N(lat.n_space(), Mat3::Zero());
    for (std::size_t s = 0; s < lat.n_space(); ++s) {
        const auto* j = lat.space_coords(s);
        double zj = lambda.zeta[0] * j[0] + lambda.zeta[1] * j[1] + lambda.zeta[2] * j[2];
        N[s] = cplx(0.0, zj) * Mat3::Identity();
        if (!Q.empty()) N[s] += Q[s];
    }
    return N;
}

DivisorFailure melnikov1_check(const ParameterPoint& lambda, const DiagonalBlocks& Ninf, const DiophantineConfig& cfg,
                               const Lattice& lat) {
    require(static_cast<int>(lambda.omega.size()) == lat.nu(), "melnikov1_check: omega size mismatch");
    require(Ninf.size() == lat.n_space(), "melnikov1_check: one block per space index required");
    DivisorFailure res;
    res.worst_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < lat.n_time(); ++t) {
        const auto* lc = lat.time_coords(t);
        double wl = std::pow(std::max(1.0, norm_l(lc, lat.nu())), cfg.tau);
        double ol = 0;
        for (int k = 0; k < lat.nu(); ++k) ol += lambda.omega[k] * lc[k];
        for (std::size_t s = 0; s < lat.n_space(); ++s) {
            if (s == lat.space_zero()) continue;
            Mat3 A = Ninf[s] + cplx(0.0, ol) * Mat3::Identity();
            Eigen::JacobiSVD<Mat3> svd(A);
            double sigma = svd.singularValues()(2);
            double jn = std::sqrt(double(lat.space_norm2(s)));
            // ||A^{-1}|| = 1/sigma <= wl |j|^tau / (2 gamma)
            double ratio = cfg.gamma > 0 ? sigma * wl * std::pow(jn, cfg.tau) / (2.0 * cfg.gamma)
                                         : (sigma > 0 ? std::numeric_limits<double>::infinity() : 0.0);
            if (ratio < res.worst_ratio) {
                res.worst_ratio = ratio;
                copy_l(res.l, lc, lat.nu());
                copy_j(res.j, lat.space_coords(s));
                res.jp = res.j;
            }
        }
    }
    res.pass = res.worst_ratio >= 1.0;
    return res;
}

// ---------------------------------------------------------------------------

Predicate parse_predicate(const std::string& name) {
    if (name == "diophantine") return Predicate::diophantine;
    if (name == "melnikov1") return Predicate::melnikov1;
    if (name == "melnikov2") return Predicate::melnikov2;
    if (name == "full" || name == "melnikov") return Predicate::full;
    fail(ErrorCode::config, "unknown predicate '" + name + "'");
}

const char* to_string(Predicate p) {
    switch (p) {
        case Predicate::diophantine: return "diophantine";
        case Predicate::melnikov1: return "melnikov1";
        case Predicate::melnikov2: return "melnikov2";
        default: return "full";
    }
}

std::array<double, 2> binomial_ci(std::size_t k, std::size_t n) {
    if (n == 0) return {0.0, 1.0};
    const double z = 1.959963984540054;
    double p = double(k) / n, z2 = z * z;
    double den = 1 + z2 / n;
    double centre = (p + z2 / (2.0 * n)) / den;
    double half = z * std::sqrt(p * (1 - p) / n + z2 / (4.0 * n * n)) / den;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

namespace {

// Geometry shared by all samples of a scan: distinct (l, dj) pairs with their
// weights. Only one of each +- pair is kept.
struct ScanTables {
    int nu = 0;
    std::vector<std::int8_t> dio_l, dio_j;
    std::vector<double> dio_w;  // <l,j>^tau / c0
    std::vector<std::int8_t> m1_l, m1_j;
    std::vector<double> m1_w;  // <l>^tau |j|^tau / 2
    std::vector<std::int8_t> m2_l, m2_j;
    std::vector<double> m2_w;  // <l>^tau min |j|^tau |j'|^tau
};

ScanTables build_scan_tables(Predicate pred, const DiophantineConfig& cfg, const Lattice& lat) {
    ScanTables T;
    T.nu = lat.nu();
    const int nu = lat.nu();
    auto push = [nu](std::vector<std::int8_t>& L, std::vector<std::int8_t>& J, const std::int8_t* l, const int* j) {
        for (int k = 0; k < nu; ++k) L.push_back(l[k]);
        for (int k = 0; k < 3; ++k) J.push_back(static_cast<std::int8_t>(j[k]));
    };
    const std::size_t center = lat.index(lat.time_zero(), lat.space_zero());
    if (pred == Predicate::diophantine || pred == Predicate::full) {
        for (std::size_t idx = center + 1; idx < lat.size(); ++idx) {
            const auto* jc = lat.space_coords(lat.space_of(idx));
            int j[3] = {jc[0], jc[1], jc[2]};
            push(T.dio_l, T.dio_j, lat.time_coords(lat.time_of(idx)), j);
            T.dio_w.push_back(std::pow(lat.bracket_idx(idx), cfg.tau) / cfg.c0);
        }
    }
    if (pred == Predicate::melnikov1 || pred == Predicate::full) {
        for (std::size_t idx = center + 1; idx < lat.size(); ++idx) {
            std::size_t s = lat.space_of(idx);
            if (s == lat.space_zero()) continue;
            const auto* lc = lat.time_coords(lat.time_of(idx));
            const auto* jc = lat.space_coords(s);
            int j[3] = {jc[0], jc[1], jc[2]};
            push(T.m1_l, T.m1_j, lc, j);
            T.m1_w.push_back(std::pow(std::max(1.0, norm_l(lc, nu)), cfg.tau) *
                             std::pow(std::sqrt(double(lat.space_norm2(s))), cfg.tau) / 2.0);
        }
    }
    if (pred == Predicate::melnikov2 || pred == Predicate::full) {
        // min over j, j' != 0 in the box with j - j' = dj of |j| |j'|
        const int K = lat.K(), W = 4 * K + 1;
        std::vector<double> minprod(std::size_t(W) * W * W, std::numeric_limits<double>::infinity());
        for (std::size_t sp = 0; sp < lat.n_space(); ++sp) {
            if (sp == lat.space_zero()) continue;
            const auto* jp = lat.space_coords(sp);
            double njp = std::sqrt(double(lat.space_norm2(sp)));
            for (std::size_t s = 0; s < lat.n_space(); ++s) {
                if (s == lat.space_zero()) continue;
                const auto* j = lat.space_coords(s);
                std::size_t key = std::size_t(j[0] - jp[0] + 2 * K) * W * W + std::size_t(j[1] - jp[1] + 2 * K) * W +
                                  std::size_t(j[2] - jp[2] + 2 * K);
                minprod[key] = std::min(minprod[key], njp * std::sqrt(double(lat.space_norm2(s))));
            }
        }
        for (std::size_t t = 0; t < lat.n_time(); ++t) {
            const auto* lc = lat.time_coords(t);
            double wl = std::pow(std::max(1.0, norm_l(lc, nu)), cfg.tau);
            for (int a = -2 * K; a <= 2 * K; ++a)
                for (int b = -2 * K; b <= 2 * K; ++b)
                    for (int c = -2 * K; c <= 2 * K; ++c) {
                        // keep one of (l, dj), (-l, -dj); skip (0, 0)
                        bool positive = t > lat.time_zero() ||
                                        (t == lat.time_zero() && (a > 0 || (a == 0 && (b > 0 || (b == 0 && c > 0)))));
                        if (!positive) continue;
                        std::size_t key = std::size_t(a + 2 * K) * W * W + std::size_t(b + 2 * K) * W + (c + 2 * K);
                        if (!std::isfinite(minprod[key])) continue;
                        int j[3] = {a, b, c};
                        push(T.m2_l, T.m2_j, lc, j);
                        T.m2_w.push_back(wl * std::pow(minprod[key], cfg.tau));
                    }
        }
    }
    return T;
}

double table_min(const std::vector<std::int8_t>& L, const std::vector<std::int8_t>& J, const std::vector<double>& W,
                 int nu, const ParameterPoint& lam, double best) {
    const std::size_t n = W.size();
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0;
        for (int k = 0; k < nu; ++k) d += lam.omega[k] * L[i * nu + k];
        d += lam.zeta[0] * J[3 * i] + lam.zeta[1] * J[3 * i + 1] + lam.zeta[2] * J[3 * i + 2];
        double v = std::abs(d) * W[i];
        if (v < best) best = v;
    }
    return best;
}

double critical_from_tables(const ScanTables& T, const ParameterPoint& lam) {
    double g = std::numeric_limits<double>::infinity();
    g = table_min(T.dio_l, T.dio_j, T.dio_w, T.nu, lam, g);
    g = table_min(T.m1_l, T.m1_j, T.m1_w, T.nu, lam, g);
    g = table_min(T.m2_l, T.m2_j, T.m2_w, T.nu, lam, g);
    return g;
}

}  // namespace

double critical_gamma(const ParameterPoint& lambda, Predicate pred, const DiophantineConfig& cfg, const Lattice& lat,
                      const DiagonalBlocks& Q) {
    require(static_cast<int>(lambda.omega.size()) == lat.nu(), "critical_gamma: omega size mismatch");
    if (Q.empty()) return critical_from_tables(build_scan_tables(pred, cfg, lat), lambda);
    // General Q: every condition is sigma * weight >= gamma; evaluate at gamma = 1
    // so that worst_ratio equals the critical gamma.
    DiophantineConfig one = cfg;
    one.gamma = 1.0;
    double g = std::numeric_limits<double>::infinity();
    if (pred == Predicate::diophantine || pred == Predicate::full)
        g = std::min(g, diophantine_check(lambda, one, lat).worst_ratio);
    if (pred == Predicate::melnikov1 || pred == Predicate::full)
        g = std::min(g, melnikov1_check(lambda, normal_form_blocks(lambda, Q, lat), one, lat).worst_ratio);
    if (pred == Predicate::melnikov2 || pred == Predicate::full)
        g = std::min(g, melnikov2_check(lambda, Q, one, lat, std::numeric_limits<double>::infinity()).worst_ratio);
    return g;
}

std::vector<MeasureRow> measure_scan(const ParameterBox& box, const std::vector<double>& gamma_list,
                                     std::size_t samples, Predicate pred, const DiophantineConfig& cfg,
                                     const Lattice& lat, std::uint64_t seed, const DiagonalBlocks& Q) {
    const std::size_t dim = static_cast<std::size_t>(lat.nu()) + 3;
    if (box.lo.size() != dim || box.hi.size() != dim) fail(ErrorCode::config, "measure_scan: box dimension mismatch");
    for (std::size_t k = 0; k < dim; ++k)
        if (!(box.hi[k] >= box.lo[k])) fail(ErrorCode::config, "measure_scan: empty box");
    if (samples < 100) fail(ErrorCode::config, "measure_scan: samples must be >= 100");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<ParameterPoint> pts(samples);
    for (auto& p : pts) {
        p.omega.resize(lat.nu());
        for (int k = 0; k < lat.nu(); ++k) p.omega[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * U(rng);
        for (int k = 0; k < 3; ++k) p.zeta[k] = box.lo[lat.nu() + k] + (box.hi[lat.nu() + k] - box.lo[lat.nu() + k]) * U(rng);
    }
    std::vector<double> crit(samples);
    if (Q.empty()) {
        const ScanTables T = build_scan_tables(pred, cfg, lat);
        parallel_for(0, samples, [&](std::size_t i) { crit[i] = critical_from_tables(T, pts[i]); });
    } else {
        parallel_for(0, samples, [&](std::size_t i) { crit[i] = critical_gamma(pts[i], pred, cfg, lat, Q); });
    }
    std::vector<MeasureRow> rows;
    for (double g : gamma_list) {
        MeasureRow r{};
        r.gamma = g;
        r.samples = samples;
        for (double c : crit)
            if (g > c) ++r.excluded;
        r.fraction = double(r.excluded) / samples;
        auto ci = binomial_ci(r.excluded, samples);
        r.ci_low = ci[0];
        r.ci_high = ci[1];
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------

ProbeResult resonant_sublevel_probe(const std::vector<int>& k, const std::function<Eigen::MatrixXcd(double)>& Q,
                                    double eta, int d, std::size_t samples, double C, double s_half) {
    double kn2 = 0;
    for (int v : k) kn2 += double(v) * v;
    require(kn2 > 0, "resonant_sublevel_probe: k must be nonzero");
    require(d >= 1 && eta > 0 && samples > 0 && s_half > 0, "resonant_sublevel_probe: invalid arguments");
    const double kn = std::sqrt(kn2);
    ProbeResult r;
    r.threshold = C * std::pow(kn, d - 1) / eta;
    r.predicted_scale = std::pow(kn * eta, -1.0 / d);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        double s = -s_half + (double(i) + 0.5) * (2.0 * s_half / samples);
        Eigen::MatrixXcd A = Q(s);
        require(A.rows() == d && A.cols() == d, "resonant_sublevel_probe: Q has the wrong shape");
        A.diagonal().array() += cplx(s * kn, 0.0);
        if (std::abs(A.determinant()) < r.threshold) ++hits;
    }
    r.fraction = double(hits) / samples;
    return r;
}

double sublevel_fraction_diagonal(double knorm, const std::vector<cplx>& q, double T, double s_half) {
    require(knorm > 0 && !q.empty(), "sublevel_fraction_diagonal: invalid arguments");
    // P(t) = prod (t + q_i) in t = s |k|; coefficients low to high
    std::vector<cplx> P{1.0};
    for (cplx qi : q) {
        std::vector<cplx> nxt(P.size() + 1, 0.0);
        for (std::size_t a = 0; a < P.size(); ++a) {
            nxt[a] += qi * P[a];
            nxt[a + 1] += P[a];
        }
        P.swap(nxt);
    }
    // |P|^2 - T^2 = P(t) conj(P)(t) - T^2 for real t
    const std::size_t n = 2 * (P.size() - 1);
    std::vector<cplx> R(n + 1, 0.0);
    for (std::size_t a = 0; a < P.size(); ++a)
        for (std::size_t b = 0; b < P.size(); ++b) R[a + b] += P[a] * std::conj(P[b]);
    R[0] -= T * T;
    // companion matrix of the monic polynomial
    Eigen::MatrixXcd Cm = Eigen::MatrixXcd::Zero(n, n);
    for (std::size_t i = 1; i < n; ++i) Cm(i, i - 1) = 1.0;
    for (std::size_t i = 0; i < n; ++i) Cm(i, n - 1) = -R[i] / R[n];
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(Cm);
    const double t_half = s_half * knorm;
    std::vector<double> cuts{-t_half, t_half};
    double scale = 1.0;
    for (cplx qi : q) scale = std::max(scale, std::abs(qi));
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        cplx z = es.eigenvalues()(i);
        if (std::abs(z.imag()) <= 1e-6 * scale && std::abs(z.real()) < t_half) cuts.push_back(z.real());
    }
    std::sort(cuts.begin(), cuts.end());
    auto absP = [&](double t) {
        cplx v = 1.0;
        for (cplx qi : q) v *= (t + qi);
        return std::abs(v);
    };
    double len = 0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double a = cuts[i], b = cuts[i + 1];
        if (b <= a) continue;
        if (absP(0.5 * (a + b)) < T) len += b - a;
    }
    return len / (2.0 * t_half);
}

}  // namespace qpe
