#include <cmath>
#include <random>

#include "doctest.h"
#include "qpe/errors.hpp"
#include "qpe/reducibility.hpp"
#include "test_helpers.hpp"

using namespace qpe;
using namespace qpe::testing;

namespace {

FourierField sparse_matrix(const Lattice& lat, double amp, bool sine, double seed) {
    std::vector<double> a1(9), a2(9);
    for (int c = 0; c < 9; ++c) {
        a1[c] = amp * std::cos(seed + 0.7 * c);
        a2[c] = amp * std::sin(seed + 0.4 + 1.3 * c);
    }
    return trig_field(lat, 9, {{mode({1, 0}, {1, 0, 0}), a1}, {mode({0, 1}, {0, 1, -1}), a2}}, sine);
}

// Reversible Op(M(phi, x) P(xi) <xi>^{-order}) with M odd.
BlockOperator reversible_block(const Lattice& lat, double amp, double order, double seed = 0.3) {
    auto P = MatrixSymbol::from_function(lat, [&](const int* xi) {
        double b = std::sqrt(1.0 + xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
        return Mat3(xi_profile(xi, seed) / std::pow(b, order));
    });
    return BlockOperator::from_symbol(symbol_product(MatrixSymbol::from_field(sparse_matrix(lat, amp, true, seed)), P));
}

// Real, reversible diagonal blocks Q_j = i c [j]_x / |j|^2.
DiagonalBlocks curl_blocks(const Lattice& lat, double c) {
    DiagonalBlocks Q(lat.n_space(), Mat3::Zero());
    for (std::size_t s = 0; s < lat.n_space(); ++s) {
        int n2 = lat.space_norm2(s);
        if (n2 == 0) continue;
        const auto* j = lat.space_coords(s);
        Mat3 m = Mat3::Zero();
        m(0, 1) = -double(j[2]);
        m(1, 0) = double(j[2]);
        m(0, 2) = double(j[1]);
        m(2, 0) = -double(j[1]);
        m(1, 2) = -double(j[0]);
        m(2, 1) = double(j[0]);
        Q[s] = cplx(0.0, c / n2) * m;
    }
    return Q;
}

FourierField zero_mean(const FourierField& h) {
    auto g = h;
    const Lattice& lat = h.lattice();
    for (std::size_t t = 0; t < lat.n_time(); ++t)
        for (int c = 0; c < g.ncomp(); ++c) g.at(lat.index(t, lat.space_zero()), c) = 0.0;
    return g;
}

}  // namespace

TEST_CASE("build_L0 with E = Id") {
    Lattice lat(2, 3, 3);
    auto Id = BlockOperator::identity(lat);
    auto Q = from_diagonal_blocks(lat, curl_blocks(lat, 1e-3));
    FourierField MU(lat, 9);
    auto res = build_L0({Id, Id}, Q, BlockOperator(lat), MU);
    CHECK(max_entry(res.Q0 - restrict_block(Q, Subspace::perp, Subspace::perp)) == 0.0);
    CHECK(max_entry(res.R0) == 0.0);
    CHECK(max_entry(res.E_perp_inv - restrict_block(Id, Subspace::perp, Subspace::perp)) == 0.0);
    CHECK(res.schur_defect == 0.0);
}

TEST_CASE("build_L0 conjugates the projected operator") {
    Lattice lat(2, 3, 3);
    auto lam = golden_parameter(2);
    const double eps = 1e-3;
    const auto Id = BlockOperator::identity(lat);
    // E reversibility preserving, with a nontrivial zero-mean block
    auto P = MatrixSymbol::from_function(lat, [](const int* xi) { return xi_profile(xi, 0.8); });
    auto Mfield = sparse_matrix(lat, 2e-2, false, 0.5);
    Mfield.at(lat.index(lat.time_zero(), lat.space_zero()), 0) = 1e-2;
    auto Eb = Id + BlockOperator::from_symbol(symbol_product(MatrixSymbol::from_field(Mfield), P));
    auto Einv = block_neumann_inverse(Eb - Id, 2.0);
    // L^(0) = omega.d + zeta.grad + eps M_U + W Pi^perp
    auto MU = sparse_matrix(lat, 1.0, true, 0.1);
    auto epsMU = MU;
    epsMU *= eps;
    auto W = restrict_block(reversible_block(lat, eps, 1.0, 0.2), Subspace::all, Subspace::perp);
    auto Pert = BlockOperator::multiplication(epsMU) + W;
    auto rest = compose(Einv, commutator_transport(Eb, lam) + compose(Pert, Eb));
    auto Q = block_diagonal(rest);
    auto R3 = rest - Q;
    auto res = build_L0({Eb, Einv}, Q, R3, epsMU);

    CHECK(res.schur_defect <= 1e-12);
    CHECK(block_is_reversible(res.R0, 1e-9));
    CHECK(block_is_reversibility_preserving(res.E_perp_inv, 1e-9));

    // E_perp E_perp^{-1} = Pi^perp
    auto one = compose(res.E_perp, res.E_perp_inv) - restrict_block(Id, Subspace::perp, Subspace::perp);
    CHECK(max_entry(one) <= 1e-12);

    auto Lop = [&](const FourierField& h) { return zero_mean(apply_transport(h, lam) + apply(Pert, h)); };
    std::mt19937_64 rng(11);
    for (int k = 0; k < 3; ++k) {
        auto h = zero_mean(random_field(lat, 3, 1.2, Parity::none, rng));
        auto lhs = Lop(apply(res.E_perp, h));
        auto L0h = apply_transport(h, lam) + apply(res.Q0 + res.R0, h);
        auto rhs = apply(res.E_perp, L0h);
        double err = sobolev_norm(smoothing_projector(lhs - rhs, 1.5), 0);
        CHECK(err <= 1e-9 * sobolev_norm(lhs, 0));
    }
}

TEST_CASE("kam_step fixed point and scalar divisor") {
    Lattice lat(2, 3, 3);
    auto lam = golden_parameter(2);
    DiophantineConfig cfg;
    cfg.gamma = 1e-4;
    cfg.tau = 3;
    auto Q0 = from_diagonal_blocks(lat, curl_blocks(lat, 1e-3));
    auto st = kam_step(kam_initial_state(Q0, BlockOperator(lat)), lam, cfg, 4.0);
    CHECK(st.Phi.size() == 1);
    CHECK(max_entry(st.Phi[0] - BlockOperator::identity(lat)) == 0.0);
    CHECK(max_entry(st.R) == 0.0);
    CHECK(max_entry(from_diagonal_blocks(lat, st.Q) - Q0) == 0.0);

    // Q = 0, one sine mode on j, j' != 0
    std::vector<double> amp(9, 0.0);
    amp[1] = 1.0;
    amp[5] = -0.5;
    auto quadratic = [&](double a) {
        auto M = trig_field(lat, 9, {{mode({1, 0}, {1, 0, 0}), amp}}, true);
        M *= a;
        auto R = restrict_block(BlockOperator::multiplication(M), Subspace::perp, Subspace::perp);
        auto s = kam_step(kam_initial_state(BlockOperator(lat), R), lam, cfg, 4.0);
        auto Psi = s.Phi[0] - BlockOperator::identity(lat);
        double dev = 0;
        for (const auto& [o, col] : R.table().data()) {
            int l[kMaxNu] = {o.l[0], o.l[1]};
            cplx div(0.0, lam.divisor(l, o.d.data()));
            const auto* pc = Psi.table().find(o);
            REQUIRE(pc != nullptr);
            for (std::size_t f = 0; f < col.size(); ++f) dev = std::max(dev, ((*pc)[f] + col[f] / div).norm());
        }
        CHECK(dev <= 1e-14 * a);
        return decay_norm(s.R, 2.0, 2.0) / std::pow(decay_norm(R, 2.0, 2.0), 2);
    };
    double q1 = quadratic(1e-3), q2 = quadratic(1e-4);
    CHECK(q1 == doctest::Approx(q2).epsilon(0.01));
}

TEST_CASE("kam_step reports Melnikov failures") {
    Lattice lat(2, 3, 3);
    ParameterPoint lam;
    lam.omega = {1.0, 1.0};
    lam.zeta = {1.0, 2.0, 3.0};
    DiophantineConfig cfg;
    cfg.gamma = 1e-4;
    cfg.tau = 3;
    std::vector<double> amp(9, 0.0);
    amp[2] = 1e-3;
    auto M = trig_field(lat, 9, {{mode({1, -1}, {0, 0, 0}), amp}}, true);
    auto R = restrict_block(BlockOperator::multiplication(M), Subspace::perp, Subspace::perp);
    try {
        kam_step(kam_initial_state(BlockOperator(lat), R), lam, cfg, 4.0);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::melnikov);
        CHECK(std::string(e.what()).find("l = [") != std::string::npos);
    }
}

TEST_CASE("reduce_to_blocks") {
    Lattice lat(2, 3, 3);
    auto lam = golden_parameter(2);
    DiophantineConfig cfg;
    cfg.gamma = 1e-4;
    cfg.tau = 3;
    const double eps = 1e-2;
    auto Q0 = from_diagonal_blocks(lat, curl_blocks(lat, eps));

    SUBCASE("zero remainder") {
        auto res = reduce_to_blocks(Q0, BlockOperator(lat), lam, cfg);
        CHECK(res.converged);
        CHECK(res.Phi.empty());
        CHECK(max_entry(from_diagonal_blocks(lat, res.Qinf) - Q0) == 0.0);
    }

    SUBCASE("small reversible remainder") {
        auto R0 = restrict_block(reversible_block(lat, eps, 1.0), Subspace::perp, Subspace::perp);
        REQUIRE(block_is_reversible(R0, 1e-12));
        KamSchedule sched;
        sched.tol = kam_tolerance(eps) * 1e-2;
        auto st = kam_initial_state(Q0, R0);
        for (int n = 0; n < 3; ++n) {
            st = kam_step(st, lam, cfg, std::pow(sched.N0, std::pow(sched.chi, n)), sched);
            // relative to the current size, with a rounding floor set by R0
            double rm = max_entry(st.R);
            CHECK(block_reversibility_defect(st.R, -1) * rm <= 1e-8 * rm + 1e-15 * max_entry(R0));
            CHECK(block_is_reversibility_preserving(st.Phi.back(), 1e-8));
            const auto* d = st.Phi.back().table().find(Offset{});
            REQUIRE(d != nullptr);
            for (const auto& m : *d) CHECK((m - Mat3::Identity()).norm() == 0.0);
        }

        auto res = reduce_to_blocks(Q0, R0, lam, cfg, sched);
        REQUIRE(res.converged);
        CHECK(res.final_remainder <= sched.tol);
        CHECK(res.steps.size() >= 3);
        // quadratic-type decay: r_{n+1} / r_n^2 bounded
        for (std::size_t k = 0; k + 1 < res.steps.size(); ++k) {
            double a = res.steps[k].remainder_s0, b = res.steps[k + 1].remainder_s0;
            if (a < 1e-12) break;
            CHECK(b <= 1e4 * a * a);
        }
        CHECK(res.contraction_order() >= 1.5);
        // reality and reversibility of the limit blocks
        double sym = 0;
        for (std::size_t s = 0; s < lat.n_space(); ++s) {
            auto n = lat.neg_space(s);
            sym = std::max(sym, (res.Qinf[s] + res.Qinf[n]).norm());
            sym = std::max(sym, (res.Qinf[s] - res.Qinf[n].conjugate()).norm());
        }
        CHECK(sym <= 1e-14);
        CHECK(block_scaled_sup(res.Qinf, lat) <= 10 * eps);
    }
}

TEST_CASE("invert_Linf") {
    Lattice lat(2, 3, 3);
    auto lam = golden_parameter(2);
    DiophantineConfig cfg;
    cfg.gamma = 1e-4;
    cfg.tau = 3;
    std::mt19937_64 rng(7);

    // scalar case
    auto N0 = normal_form_blocks(lam, {}, lat);
    auto h1 = trig_field(lat, 3, {{mode({1, 0}, {0, 1, 0}), {1.0, 0.0, 0.0}}}, false);
    auto g1 = invert_Linf(h1, N0, lam, cfg);
    std::size_t i = lat.index_of(std::array<int, kMaxNu>{1, 0}.data(), std::array<int, 3>{0, 1, 0}.data());
    double d = lam.omega[0] + lam.zeta[1];
    CHECK(std::abs(g1.at(i, 0) - h1.at(i, 0) / cplx(0.0, d)) <= 1e-15);

    auto N = normal_form_blocks(lam, curl_blocks(lat, 1e-2), lat);
    auto h = zero_mean(random_field(lat, 3, 3.0, Parity::even, rng));
    auto g = invert_Linf(h, N, lam, cfg);
    CHECK(rel_diff(apply_Linf(g, N, lam), h) <= 1e-12);
    // certified bound from the first Melnikov condition
    for (double s : {0.0, 1.0, 2.0}) CHECK(sobolev_norm(g, s) <= sobolev_norm(h, s + 2 * cfg.tau) / (2 * cfg.gamma));

    CHECK_THROWS_AS(invert_Linf(h1 + trig_field(lat, 3, {{mode({1, 0}, {0, 0, 0}), {1.0, 0, 0}}}, false), N, lam, cfg),
                    Error);
    ParameterPoint bad;
    bad.omega = {1.0, 2.0};
    bad.zeta = {1.0, 1.0, 1.0};
    try {
        invert_Linf(h, normal_form_blocks(bad, {}, lat), bad, cfg);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::melnikov);
    }
}

TEST_CASE("invert_L through a conjugation chain") {
    Lattice lat(2, 3, 3);
    auto lam = golden_parameter(2);
    DiophantineConfig cfg;
    cfg.gamma = 1e-4;
    cfg.tau = 3;
    std::mt19937_64 rng(8);
    const auto Pp = restrict_block(BlockOperator::identity(lat), Subspace::perp, Subspace::perp);

    InverseChain chain;
    chain.E_perp = Pp;
    chain.E_perp_inv = Pp;
    chain.Ninf = normal_form_blocks(lam, {}, lat);
    auto h = zero_mean(random_field(lat, 3, 2.0, Parity::even, rng));
    CHECK(rel_diff(invert_L(h, chain, lam, cfg), invert_Linf(h, chain.Ninf, lam, cfg)) == 0.0);

    // W = E_perp (Id + Psi) with reversibility preserving factors
    auto P = MatrixSymbol::from_function(lat, [](const int* xi) { return xi_profile(xi, 0.4); });
    auto E = Pp + restrict_block(
                      BlockOperator::from_symbol(symbol_product(
                          MatrixSymbol::from_field(sparse_matrix(lat, 1e-2, false, 0.9)), P)),
                      Subspace::perp, Subspace::perp);
    chain.E_perp = E;
    chain.E_perp_inv = restrict_block(block_neumann_inverse(E - Pp, 2.0), Subspace::perp, Subspace::perp);
    auto Psi = restrict_block(reversible_block(lat, 1e-2, 0.0), Subspace::perp, Subspace::perp);
    Psi = compose(Psi, Psi);
    chain.Phi = {BlockOperator::identity(lat) + Psi};
    chain.Phi_inv = {block_neumann_inverse(Psi, 2.0)};
    chain.Ninf = normal_form_blocks(lam, curl_blocks(lat, 1e-2), lat);
    auto g = invert_L(h, chain, lam, cfg);
    CHECK(classify_parity(g, 1e-9) == Parity::odd);
    auto back = apply(chain.E_perp, apply(chain.Phi[0], apply_Linf(apply(chain.Phi_inv[0], apply(chain.E_perp_inv, g)),
                                                                   chain.Ninf, lam)));
    CHECK(rel_diff(smoothing_projector(back, 1.5), smoothing_projector(h, 1.5)) <= 1e-8);
}
