#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "qpe/errors.hpp"
#include "qpe/small_divisors.hpp"

using namespace qpe;

namespace {

Mode mode(std::initializer_list<int> l, std::initializer_list<int> j) {
    Mode m;
    int i = 0;
    for (int v : l) m.l[i++] = v;
    i = 0;
    for (int v : j) m.j[i++] = v;
    return m;
}

// Independent enumeration with long double accumulation.
long double brute_dio_ratio(const ParameterPoint& p, const DiophantineConfig& c, int nu, int L, int K) {
    long double best = std::numeric_limits<long double>::infinity();
    std::vector<int> l(nu, -L);
    while (true) {
        for (int a = -K; a <= K; ++a)
            for (int b = -K; b <= K; ++b)
                for (int e = -K; e <= K; ++e) {
                    long double d = 0, l2 = 0;
                    bool zero = (a == 0 && b == 0 && e == 0);
                    for (int k = 0; k < nu; ++k) {
                        d += (long double)p.omega[k] * l[k];
                        l2 += (long double)l[k] * l[k];
                        zero = zero && l[k] == 0;
                    }
                    if (zero) continue;
                    d += (long double)p.zeta[0] * a + (long double)p.zeta[1] * b + (long double)p.zeta[2] * e;
                    long double j2 = (long double)a * a + (long double)b * b + (long double)e * e;
                    long double br = std::max<long double>(1, std::sqrt(std::max(l2, j2)));
                    best = std::min(best, std::fabs(d) * std::pow(br, (long double)c.tau) / (c.c0 * c.gamma));
                }
        int k = 0;
        while (k < nu && l[k] == L) l[k++] = -L;
        if (k == nu) break;
        ++l[k];
    }
    return best;
}

}  // namespace

TEST_CASE("cutoff profile") {
    CHECK(chi(0.0) == 0.0);
    CHECK(chi(1.0 / 3.0) == 0.0);
    CHECK(chi(2.0 / 3.0) == 1.0);
    CHECK(chi(5.0) == 1.0);
    double prev = 0;
    for (int i = 1; i < 90; ++i) {
        double t = 1.0 / 3.0 + i / 300.0;
        CHECK(chi(t) == chi(-t));
        CHECK(chi(t) > prev);
        CHECK(chi(t) >= 0.0);
        CHECK(chi(t) <= 1.0);
        prev = chi(t);
    }
    CHECK(chi(0.5) == doctest::Approx(0.5));
}

TEST_CASE("Diophantine config") {
    auto c = DiophantineConfig::practical(2, 0.1);
    CHECK(c.tau == 10.0);
    CHECK(c.tau0() == 10.0);
    auto p = DiophantineConfig::paper(2, 0.1);
    CHECK(p.tau == 28.0);
    CHECK(p.tau0() == 11 + 28.0 * 12);
    DiophantineConfig bad = c;
    bad.c0 = 1.5;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = c;
    bad.gamma = 2;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("diophantine check") {
    Lattice lat(2, 3, 3);
    ParameterPoint res{{1.0, 2.0}, {1.0, 0.5, 0.25}};
    auto c = DiophantineConfig::practical(2, 1e-3);
    auto r = diophantine_check(res, c, lat);
    CHECK_FALSE(r.pass);
    CHECK(r.worst_ratio == 0.0);

    auto g = golden_parameter(2);
    for (double gamma : {1e-3, 1e-2, 0.05}) {
        c.gamma = gamma;
        auto rg = diophantine_check(g, c, lat);
        long double ref = brute_dio_ratio(g, c, 2, 3, 3);
        CHECK(rg.worst_ratio == doctest::Approx(double(ref)).epsilon(1e-10));
        CHECK(rg.pass == (ref >= 1));
    }
    c.gamma = 1e-3;
    CHECK(diophantine_check(g, c, lat).pass);
    c.gamma = 0.0;
    CHECK(diophantine_check(res, c, lat).pass);
}

TEST_CASE("cutoff-extended transport inverse") {
    Lattice lat(2, 3, 3);
    auto lam = golden_parameter(2);
    auto cfg = DiophantineConfig::practical(2, 1e-3);
    std::array<double, 3> m = lam.zeta;
    Mode k = mode({1, 0}, {0, 1, 0});
    auto u = trig_field(lat, 1, {{k, {1.0}}}, false);
    auto v = transport_inverse_ext(u, m, lam, cfg);
    double d = lam.omega[0] + lam.zeta[1];
    auto expect = trig_field(lat, 1, {{k, {1.0 / d}}}, true);
    double e0 = 0;
    for (std::size_t i = 0; i < lat.size(); ++i) e0 = std::max(e0, std::abs(v.at(i, 0) - expect.at(i, 0)));
    CHECK(e0 < 1e-15);
    CHECK(v.parity() == Parity::odd);

    // huge gamma pushes the cutoff argument below 1/3
    auto big = cfg;
    big.gamma = 1.0;
    big.tau = 0.5;
    ParameterPoint slow{{0.1, 0.2}, {0.01, 0.02, 0.03}};
    Mode small = mode({1, 0}, {0, 0, 0});
    auto us = trig_field(lat, 1, {{small, {1.0}}}, false);
    CHECK(transport_inverse_ext(us, slow.zeta, slow, big).max_abs() == 0.0);

    std::mt19937_64 rng(4);
    auto w = random_field(lat, 3, 10.0, Parity::even, rng, false);
    w.at(lat.index(lat.time_zero(), lat.space_zero()), 0) = 0.0;
    w.at(lat.index(lat.time_zero(), lat.space_zero()), 1) = 0.0;
    w.at(lat.index(lat.time_zero(), lat.space_zero()), 2) = 0.0;
    auto x = transport_inverse_ext(w, m, lam, cfg);
    CHECK(x.parity() == Parity::odd);
    auto back = transport_const(x, lam.omega, {m[0], m[1], m[2]});
    double err = 0;
    for (std::size_t i = 0; i < back.coeffs().size(); ++i) err = std::max(err, std::abs(back.coeffs()[i] - w.coeffs()[i]));
    CHECK(err < 1e-12 * w.max_abs());

    // commutes with projectors and multipliers
    auto a1 = transport_inverse_ext(smoothing_projector(w, 2.5), m, lam, cfg);
    auto a2 = smoothing_projector(x, 2.5);
    auto b1 = transport_inverse_ext(apply_multiplier(FourierMultiplier::lambda_inv(), w), m, lam, cfg);
    auto b2 = apply_multiplier(FourierMultiplier::lambda_inv(), x);
    double ea = 0, eb = 0;
    for (std::size_t i = 0; i < a1.coeffs().size(); ++i) {
        ea = std::max(ea, std::abs(a1.coeffs()[i] - a2.coeffs()[i]));
        eb = std::max(eb, std::abs(b1.coeffs()[i] - b2.coeffs()[i]));
    }
    CHECK(ea <= 1e-15 * x.max_abs());
    CHECK(eb <= 1e-15 * x.max_abs());

    FourierField withmean(lat, 1);
    withmean.at(lat.index(lat.time_zero(), lat.space_zero()), 0) = 1e-10;
    CHECK_THROWS_AS(transport_inverse_ext(withmean, m, lam, cfg), Error);
    CHECK_NOTHROW(transport_inverse_ext(withmean, m, lam, cfg, true));
}

TEST_CASE("homological matrix matches the commutator map") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    auto rnd = [&] {
        Mat3 M;
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) M(i, k) = cplx(g(rng), g(rng));
        return M;
    };
    Mat3 Qj = rnd(), Qjp = rnd(), X = rnd();
    double d = 0.37;
    Mat3 Y = cplx(0, d) * X + Qj * X - X * Qjp;
    Eigen::Matrix<cplx, 9, 1> vx, vy;
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r) vx(3 * c + r) = X(r, c);
    vy = homological_matrix(d, Qj, Qjp) * vx;
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r) CHECK(std::abs(vy(3 * c + r) - Y(r, c)) < 1e-13);
}

TEST_CASE("melnikov2 with diagonal Q matches the closed form") {
    // smallest singular value = min |d + q_j^r - q_j'^c|
    std::array<double, 3> qa{0.11, -0.3, 0.05}, qb{0.2, 0.017, -0.09};
    Mat3 A = Mat3::Zero(), B = Mat3::Zero();
    for (int r = 0; r < 3; ++r) {
        A(r, r) = cplx(0, qa[r]);
        B(r, r) = cplx(0, qb[r]);
    }
    for (double d : {0.0, 0.13, -0.7, 1.9}) {
        double closed = 1e300;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) closed = std::min(closed, std::abs(d + qa[r] - qb[c]));
        CHECK(smallest_singular_value(homological_matrix(d, A, B)) == doctest::Approx(closed).epsilon(1e-12));
    }
}

TEST_CASE("melnikov2 with Q = 0 reduces to the scalar first-order condition") {
    Lattice lat(1, 2, 2);
    auto lam = golden_parameter(1);
    auto cfg = DiophantineConfig::practical(1, 0.01);
    auto r = melnikov2_check(lam, {}, cfg, lat, 100.0);
    DiagonalBlocks zero(lat.n_space(), Mat3::Zero());
    auto r2 = melnikov2_check(lam, zero, cfg, lat, 100.0);
    CHECK(r.worst_ratio == doctest::Approx(r2.worst_ratio).epsilon(1e-12));
    // brute force
    double best = 1e300;
    for (int l = -2; l <= 2; ++l)
        for (std::size_t s = 0; s < lat.n_space(); ++s)
            for (std::size_t sp = 0; sp < lat.n_space(); ++sp) {
                if (s == lat.space_zero() || sp == lat.space_zero()) continue;
                if (l == 0 && s == sp) continue;
                const auto* j = lat.space_coords(s);
                const auto* jp = lat.space_coords(sp);
                double d = lam.omega[0] * l;
                for (int k = 0; k < 3; ++k) d += lam.zeta[k] * (j[k] - jp[k]);
                double w = std::pow(std::max(1, std::abs(l)), cfg.tau) *
                           std::pow(std::sqrt(double(lat.space_norm2(s)) * lat.space_norm2(sp)), cfg.tau);
                best = std::min(best, std::abs(d) * w / cfg.gamma);
            }
    CHECK(r.worst_ratio == doctest::Approx(best).epsilon(1e-12));
    CHECK(r.pass == (best >= 1));
}

TEST_CASE("melnikov2 on time modes with j = j' matches the Diophantine time divisor") {
    Lattice lat(2, 3, 1);
    auto lam = golden_parameter(2);
    auto cfg = DiophantineConfig::practical(2, 0.01);
    // N < 1 leaves only j = j' and pure time modes
    auto r = melnikov2_check(lam, {}, cfg, lat, 0.99 * 3 * std::sqrt(2.0) + 1e-9);
    double best = 1e300;
    for (int a = -3; a <= 3; ++a)
        for (int b = -3; b <= 3; ++b) {
            if (a == 0 && b == 0) continue;
            double d = std::abs(lam.omega[0] * a + lam.omega[1] * b);
            best = std::min(best, d * std::pow(std::sqrt(double(a * a + b * b)), cfg.tau) / cfg.gamma);
        }
    // same form as the time-mode Diophantine condition, without the c0 factor
    CHECK(r.worst_ratio <= best * (1 + 1e-12));
    auto dcfg = cfg;
    auto dr = diophantine_check(lam, dcfg, Lattice(2, 3, 0 + 1));
    CHECK(dr.worst_ratio * dcfg.c0 <= best * (1 + 1e-12));
}

TEST_CASE("melnikov2 reports a resonant block") {
    Lattice lat(1, 2, 2);
    ParameterPoint lam{{1.0}, {0.5, 0.7, 0.9}};
    auto cfg = DiophantineConfig::practical(1, 0.01);
    DiagonalBlocks Q(lat.n_space(), Mat3::Zero());
    // Q_j^j = -i I at j = (1,0,0) makes l = 1, j = j' = (1,0,0) singular
    int j[3] = {1, 0, 0};
    Q[lat.space_index(j)] = cplx(0, -1.0) * Mat3::Identity();
    auto r = melnikov2_check(lam, Q, cfg, lat, 10.0);
    CHECK_FALSE(r.pass);
    CHECK(r.worst_ratio < 1e-12);
}

TEST_CASE("melnikov1") {
    Lattice lat(2, 2, 2);
    auto lam = golden_parameter(2);
    auto cfg = DiophantineConfig::practical(2, 0.01);
    auto N = normal_form_blocks(lam, {}, lat);
    auto r = melnikov1_check(lam, N, cfg, lat);
    // scalar case: |omega.l + zeta.j| >= 2 gamma / (<l>^tau |j|^tau)
    double best = 1e300;
    for (std::size_t t = 0; t < lat.n_time(); ++t)
        for (std::size_t s = 0; s < lat.n_space(); ++s) {
            if (s == lat.space_zero()) continue;
            const auto* l = lat.time_coords(t);
            const auto* j = lat.space_coords(s);
            double d = lam.omega[0] * l[0] + lam.omega[1] * l[1] + lam.zeta[0] * j[0] + lam.zeta[1] * j[1] +
                       lam.zeta[2] * j[2];
            double w = std::pow(std::max(1.0, std::sqrt(double(lat.time_norm2(t)))), cfg.tau) *
                       std::pow(std::sqrt(double(lat.space_norm2(s))), cfg.tau);
            best = std::min(best, std::abs(d) * w / (2 * cfg.gamma));
        }
    CHECK(r.worst_ratio == doctest::Approx(best).epsilon(1e-12));

    // small random perturbation: compare with the direct 3x3 inverse norm
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    DiagonalBlocks Qp(lat.n_space());
    for (auto& M : Qp)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) M(a, b) = 1e-3 * cplx(g(rng), g(rng));
    auto Np = normal_form_blocks(lam, Qp, lat);
    auto rp = melnikov1_check(lam, Np, cfg, lat);
    double bestp = 1e300;
    for (std::size_t t = 0; t < lat.n_time(); ++t)
        for (std::size_t s = 0; s < lat.n_space(); ++s) {
            if (s == lat.space_zero()) continue;
            const auto* l = lat.time_coords(t);
            Mat3 A = Np[s] + cplx(0, lam.omega[0] * l[0] + lam.omega[1] * l[1]) * Mat3::Identity();
            Mat3 Ai = A.inverse();
            Eigen::JacobiSVD<Mat3> svd(Ai);
            double inv_norm = svd.singularValues()(0);
            double w = std::pow(std::max(1.0, std::sqrt(double(lat.time_norm2(t)))), cfg.tau) *
                       std::pow(std::sqrt(double(lat.space_norm2(s))), cfg.tau);
            bestp = std::min(bestp, w / (2 * cfg.gamma) / inv_norm);
        }
    CHECK(rp.worst_ratio == doctest::Approx(bestp).epsilon(1e-9));

    DiagonalBlocks sing = N;
    int j[3] = {0, 0, 1};
    int l[2] = {0, 0};
    sing[lat.space_index(j)] = Mat3::Zero();
    (void)l;
    CHECK_FALSE(melnikov1_check(lam, sing, cfg, lat).pass);
}

TEST_CASE("measure scan basics") {
    Lattice lat(1, 2, 2);
    auto cfg = DiophantineConfig::practical(1, 0.01);
    ParameterBox box{{1, 1, 1, 1}, {2, 2, 2, 2}};
    std::vector<double> gammas{0.2, 0.1, 0.05, 0.02, 0.01, 0.001};
    auto rows = measure_scan(box, gammas, 2000, Predicate::full, cfg, lat, 42);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].fraction <= rows[i - 1].fraction);
    for (const auto& r : rows) {
        CHECK(r.ci_low <= r.fraction);
        CHECK(r.ci_high >= r.fraction);
    }
    auto again = measure_scan(box, gammas, 2000, Predicate::full, cfg, lat, 42);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].excluded == again[i].excluded);

    // nested predicates: melnikov2 alone excludes no more than the full predicate
    auto m2 = measure_scan(box, gammas, 2000, Predicate::melnikov2, cfg, lat, 42);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(m2[i].excluded <= rows[i].excluded);

    auto g = golden_parameter(1);
    ParameterBox point{{g.omega[0], g.zeta[0], g.zeta[1], g.zeta[2]}, {g.omega[0], g.zeta[0], g.zeta[1], g.zeta[2]}};
    CHECK(diophantine_check(g, cfg, lat).pass);
    auto pr = measure_scan(point, {0.01}, 100, Predicate::diophantine, cfg, lat, 1);
    CHECK(pr[0].fraction == 0.0);

    CHECK_THROWS_AS(measure_scan(ParameterBox{{1, 1, 1, 1}, {0, 2, 2, 2}}, gammas, 200, Predicate::full, cfg, lat, 1),
                    Error);
    CHECK_THROWS_AS(measure_scan(box, gammas, 50, Predicate::full, cfg, lat, 1), Error);
}

TEST_CASE("measure scan agrees with exhaustive slice classification") {
    // nu = 1, K = L = 2, slice in (omega, zeta_1) with zeta_2, zeta_3 fixed
    Lattice lat(1, 2, 2);
    auto cfg = DiophantineConfig::practical(1, 0.02);
    const double z2 = 1.3228756555322954, z3 = 1.6583123951777;
    int n = 300;
    std::size_t bad = 0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            ParameterPoint p{{1.0 + (a + 0.5) / n}, {1.0 + (b + 0.5) / n, z2, z3}};
            if (!diophantine_check(p, cfg, lat).pass) ++bad;
        }
    double grid_frac = double(bad) / (n * n);
    ParameterBox box{{1, 1, z2, z3}, {2, 2, z2, z3}};
    auto rows = measure_scan(box, {cfg.gamma}, 20000, Predicate::diophantine, cfg, lat, 9);
    CHECK(grid_frac > 0.0);
    CHECK(grid_frac >= rows[0].ci_low - 0.005);
    CHECK(grid_frac <= rows[0].ci_high + 0.005);
}

TEST_CASE("critical gamma with general Q") {
    Lattice lat(1, 1, 1);
    auto lam = golden_parameter(1);
    auto cfg = DiophantineConfig::practical(1, 0.05);
    DiagonalBlocks Z(lat.n_space(), Mat3::Zero());
    double g0 = critical_gamma(lam, Predicate::full, cfg, lat);
    double g1 = critical_gamma(lam, Predicate::full, cfg, lat, Z);
    CHECK(g0 == doctest::Approx(g1).epsilon(1e-12));
}

TEST_CASE("resonant sublevel probe") {
    std::vector<int> k{1, 2, 0, 0, 1};
    const double kn = std::sqrt(6.0);
    const int d = 9;
    auto zeroQ = [d](double) { return Eigen::MatrixXcd::Zero(d, d).eval(); };
    double eta = 1e3;
    auto r = resonant_sublevel_probe(k, zeroQ, eta, d, 200000);
    double closed = std::pow(r.threshold, 1.0 / d) / kn;  // half-length over s_half = 1
    CHECK(std::abs(r.fraction - closed) <= 0.02 * closed);

    std::vector<cplx> q{0.05, -0.02, 0.11, 0.0, 0.07, -0.13, 0.2, 0.03, -0.06};
    auto diagQ = [&](double) {
        Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(d, d);
        for (int i = 0; i < d; ++i) M(i, i) = q[i];
        return M;
    };
    for (double e : {1e2, 1e4, 1e6}) {
        auto rd = resonant_sublevel_probe(k, diagQ, e, d, 400000);
        double oracle = sublevel_fraction_diagonal(kn, q, rd.threshold, 1.0);
        CHECK(std::abs(rd.fraction - oracle) <= 0.05 * oracle);
    }
    // Q = 0 scaling across a decade
    auto r10 = resonant_sublevel_probe(k, zeroQ, 10 * eta, d, 200000);
    double ratio = (r.fraction / r10.fraction) / (r.predicted_scale / r10.predicted_scale);
    CHECK(ratio <= 4.0);
    CHECK(ratio >= 0.25);
    auto far = resonant_sublevel_probe(k, zeroQ, 1e40, d, 10000);
    CHECK(far.fraction < 1e-3);
    CHECK_THROWS_AS(resonant_sublevel_probe({0, 0}, zeroQ, 1.0, d, 100), Error);
}

TEST_CASE("binomial interval") {
    auto ci = binomial_ci(0, 100);
    CHECK(ci[0] <= 1e-15);
    CHECK(ci[1] > 0.0);
    auto c2 = binomial_ci(50, 100);
    CHECK(c2[0] < 0.5);
    CHECK(c2[1] > 0.5);
}
