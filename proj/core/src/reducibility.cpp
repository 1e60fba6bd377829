#include "qpe/reducibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include <Eigen/LU>

#include "qpe/errors.hpp"
#include "qpe/parallel.hpp"

namespace qpe {

namespace {

BlockOperator zero_projector(const Lattice& lat) {
    return restrict_block(BlockOperator::identity(lat), Subspace::zero, Subspace::zero);
}

// (Pi_0 X Pi_0)^{-1} on the space-mean functions.
BlockOperator invert_zero_block(const BlockOperator& X, double s0, const NeumannOptions& opt, const char* what) {
    const Lattice& lat = X.lattice();
    auto Psi = restrict_block(X, Subspace::zero, Subspace::zero) - zero_projector(lat);
    try {
        return restrict_block(block_neumann_inverse(Psi, s0, opt), Subspace::zero, Subspace::zero);
    } catch (const Error& e) {
        fail(e.code(), std::string(what) + ": " + e.what());
    }
}

double spectral_norm(const Mat3& M) {
    Eigen::JacobiSVD<Mat3> svd(M);
    return svd.singularValues()(0);
}

std::string triple(const Offset& o, const int* jp, int nu) {
    std::string s = "(l = [";
    for (int k = 0; k < nu; ++k) s += (k ? ", " : "") + std::to_string(o.l[k]);
    s += "], j = [";
    for (int k = 0; k < 3; ++k) s += (k ? ", " : "") + std::to_string(jp[k] + o.d[k]);
    s += "], j' = [";
    for (int k = 0; k < 3; ++k) s += (k ? ", " : "") + std::to_string(jp[k]);
    return s + "])";
}

}  // namespace

L0Result build_L0(const Conjugator& C, const BlockOperator& Q, const BlockOperator& R3, const FourierField& eps_M_U,
                  double s0, const NeumannOptions& opt) {
    using S = Subspace;
    L0Result res;
    auto inv00 = invert_zero_block(C.E, s0, opt, "build_L0: Pi_0 E Pi_0");
    auto E_p0 = restrict_block(C.E, S::perp, S::zero);
    auto E_0p = restrict_block(C.E, S::zero, S::perp);
    auto Minv = restrict_block(C.E_inv, S::perp, S::perp);
    auto Sop = compose(Minv, compose(E_p0, compose(inv00, E_0p)));
    BlockOperator factor;
    try {
        factor = restrict_block(block_neumann_inverse(Sop, s0, opt), S::perp, S::perp);
    } catch (const Error& e) {
        fail(e.code(), std::string("build_L0: Pi^perp + S: ") + e.what());
    }
    res.E_perp = restrict_block(C.E, S::perp, S::perp);
    res.E_perp_inv = compose(factor, Minv);

    // second route: Schur complement of the zero block of E^{-1}
    auto F00inv = invert_zero_block(C.E_inv, s0, opt, "build_L0: Pi_0 E^{-1} Pi_0");
    auto schur = restrict_block(C.E_inv, S::perp, S::perp) -
                 compose(restrict_block(C.E_inv, S::perp, S::zero),
                         compose(F00inv, restrict_block(C.E_inv, S::zero, S::perp)));
    res.schur_defect = max_entry(res.E_perp_inv - schur) / std::max(max_entry(res.E_perp_inv), 1e-300);

    res.Q0 = restrict_block(Q, S::perp, S::perp);
    auto A1 = compose(res.E_perp_inv, compose(E_p0, restrict_block(R3, S::zero, S::perp)));
    auto MU = restrict_block(BlockOperator::multiplication(eps_M_U), S::perp, S::zero);
    auto A2 = compose(res.E_perp_inv, compose(MU, E_0p));
    res.R0 = restrict_block(R3, S::perp, S::perp) + A1 - A2;
    return res;
}

// ---------------------------------------------------------------------------

KamState kam_initial_state(const BlockOperator& Q0, const BlockOperator& R0) {
    KamState st;
    st.Q = diagonal_blocks(Q0);
    st.R = R0;
    return st;
}

KamState kam_step(const KamState& state, const ParameterPoint& lambda, const DiophantineConfig& cfg, double N,
                  const KamSchedule& sched) {
    const Lattice& lat = state.R.lattice();
    require(state.Q.size() == lat.n_space(), "kam_step: Q must have one block per space index");
    const std::size_t zero = lat.space_zero();

    std::vector<double> qn(lat.n_space()), jtau(lat.n_space());
    for (std::size_t s = 0; s < lat.n_space(); ++s) {
        qn[s] = spectral_norm(state.Q[s]);
        jtau[s] = std::pow(std::sqrt(double(lat.space_norm2(s))), cfg.tau);
    }

    std::vector<const Offset*> offs;
    std::vector<const OffsetTable<Mat3>::Column*> cols;
    for (const auto& [o, col] : state.R.table().data()) {
        if (o.is_zero() || o.l_norm() > N || o.d_norm() > N) continue;
        offs.push_back(&o);
        cols.push_back(&col);
    }
    std::vector<OffsetTable<Mat3>::Column> psi(offs.size());
    std::vector<double> worst(offs.size(), std::numeric_limits<double>::infinity());
    std::mutex fail_mu;
    std::string failure;

    parallel_for(0, offs.size(), [&](std::size_t k) {
        const Offset& o = *offs[k];
        const auto& col = *cols[k];
        auto& out = psi[k];
        out.assign(lat.n_space(), Mat3::Zero());
        int lv[kMaxNu] = {};
        for (int a = 0; a < lat.nu(); ++a) lv[a] = o.l[a];
        const double d = lambda.divisor(lv, o.d.data());
        const double wl = std::pow(std::max(1.0, o.l_norm()), cfg.tau);
        for (std::size_t sp = 0; sp < lat.n_space(); ++sp) {
            if (sp == zero || col[sp].isZero(0.0)) continue;
            const auto* jc = lat.space_coords(sp);
            int jp[3] = {jc[0], jc[1], jc[2]};
            int j[3] = {jp[0] + o.d[0], jp[1] + o.d[1], jp[2] + o.d[2]};
            auto s = lat.space_index(j);
            if (s < 0 || static_cast<std::size_t>(s) == zero) continue;
            const double thr = cfg.gamma / (wl * jtau[s] * jtau[sp]);
            const auto H = homological_matrix(d, state.Q[s], state.Q[sp]);
            double lb = std::abs(d) - qn[s] - qn[sp];
            double ratio = lb / thr;
            if (lb < thr) ratio = smallest_singular_value(H) / thr;
            worst[k] = std::min(worst[k], ratio);
            if (ratio < 1.0) {
                std::lock_guard<std::mutex> g(fail_mu);
                if (failure.empty()) failure = triple(o, jp, lat.nu()) + ", sigma/threshold = " + std::to_string(ratio);
                return;
            }
            Eigen::Matrix<cplx, 9, 1> rhs = -Eigen::Map<const Eigen::Matrix<cplx, 9, 1>>(col[sp].data());
            Eigen::Matrix<cplx, 9, 1> x = H.partialPivLu().solve(rhs);
            Eigen::Map<Eigen::Matrix<cplx, 9, 1>>(out[sp].data()) = x;
        }
    });
    if (!failure.empty()) fail(ErrorCode::melnikov, "kam_step: second Melnikov condition fails at " + failure);

    BlockOperator Psi(lat);
    for (std::size_t k = 0; k < offs.size(); ++k) Psi.table().entry(*offs[k]) = std::move(psi[k]);

    KamStep row;
    row.n = state.n;
    row.Nn = N;
    row.remainder_s0 = decay_norm(state.R, sched.s0, sched.M);
    row.remainder_s0b = decay_norm(state.R, sched.s0 + sched.b, sched.M);
    row.psi_norm = decay_norm(Psi, sched.s0);
    row.worst_melnikov = offs.empty() ? std::numeric_limits<double>::infinity()
                                      : *std::min_element(worst.begin(), worst.end());

    auto Z = restrict_block(block_diagonal(state.R), Subspace::perp, Subspace::perp);
    auto Qb = from_diagonal_blocks(lat, state.Q);
    auto inside = state.R;
    auto outside = BlockOperator(lat);
    for (auto it = inside.table().data().begin(); it != inside.table().data().end();) {
        if (!it->first.is_zero() && (it->first.l_norm() > N || it->first.d_norm() > N)) {
            outside.table().entry(it->first) = std::move(it->second);
            it = inside.table().data().erase(it);
        } else {
            ++it;
        }
    }
    // exact defect of the solve: zero up to rounding on the solved entries
    auto H = commutator_transport(Psi, lambda) + compose(Qb, Psi) - compose(Psi, Qb) + inside - Z;

    BlockOperator Phi_inv;
    try {
        Phi_inv = block_neumann_inverse(Psi, sched.s0, sched.neumann);
    } catch (const Error& e) {
        fail(ErrorCode::nonconvergence, std::string("kam_step: ") + e.what());
    }
    const auto Id = BlockOperator::identity(lat);

    KamState next;
    next.n = state.n + 1;
    next.Q = state.Q;
    auto zb = diagonal_blocks(Z);
    for (std::size_t s = 0; s < lat.n_space(); ++s) {
        next.Q[s] += zb[s];
        row.max_block_change = std::max(row.max_block_change, zb[s].norm());
    }
    next.R = compose(Phi_inv - Id, Z) + compose(Phi_inv, H + outside + compose(state.R, Psi));
    next.R = restrict_block(next.R, Subspace::perp, Subspace::perp);
    next.Phi = state.Phi;
    next.Phi_inv = state.Phi_inv;
    next.Phi.push_back(Id + Psi);
    next.Phi_inv.push_back(std::move(Phi_inv));
    next.steps = state.steps;
    next.steps.push_back(row);
    return next;
}

double KamResult::contraction_order(double rel_floor) const { return kam_contraction_order(steps, rel_floor); }

double kam_contraction_order(const std::vector<KamStep>& steps, double rel_floor) {
    // least squares for log r_{n+1} = p log r_n
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
        double a = steps[k].remainder_s0, b = steps[k + 1].remainder_s0;
        if (!(a < 1.0) || b <= rel_floor * a) break;
        sxy += std::log(a) * std::log(b);
        sxx += std::log(a) * std::log(a);
    }
    return sxx > 0 ? sxy / sxx : 0.0;
}

KamResult reduce_to_blocks(const BlockOperator& Q0, const BlockOperator& R0, const ParameterPoint& lambda,
                           const DiophantineConfig& cfg, const KamSchedule& sched) {
    require(sched.chi == 1.5, "reduce_to_blocks: chi is fixed at 3/2");
    auto st = kam_initial_state(Q0, R0);
    KamResult res;
    for (int n = 0;; ++n) {
        double r = decay_norm(st.R, sched.s0, sched.M);
        if (r <= sched.tol) {
            KamStep last;
            last.n = n;
            last.Nn = std::pow(sched.N0, std::pow(sched.chi, n));
            last.remainder_s0 = r;
            last.remainder_s0b = decay_norm(st.R, sched.s0 + sched.b, sched.M);
            st.steps.push_back(last);
            res.converged = true;
            res.final_remainder = r;
            break;
        }
        if (n >= sched.max_steps)
            fail(ErrorCode::nonconvergence, "reduce_to_blocks: remainder " + std::to_string(r) + " after " +
                                                std::to_string(n) + " steps");
        st = kam_step(st, lambda, cfg, std::pow(sched.N0, std::pow(sched.chi, n)), sched);
    }
    res.Qinf = std::move(st.Q);
    res.Phi = std::move(st.Phi);
    res.Phi_inv = std::move(st.Phi_inv);
    res.steps = std::move(st.steps);
    return res;
}

double block_scaled_sup(const DiagonalBlocks& Q, const Lattice& lat) {
    double m = 0;
    for (std::size_t s = 0; s < lat.n_space(); ++s) {
        if (s == lat.space_zero()) continue;
        m = std::max(m, Q[s].norm() * std::sqrt(double(lat.space_norm2(s))));
    }
    return m;
}

// ---------------------------------------------------------------------------

namespace {

double omega_dot(const ParameterPoint& lambda, const Lattice& lat, std::size_t t) {
    const auto* lc = lat.time_coords(t);
    double ol = 0;
    for (int k = 0; k < lat.nu(); ++k) ol += lambda.omega[k] * lc[k];
    return ol;
}

}  // namespace

FourierField invert_Linf(const FourierField& h, const DiagonalBlocks& Ninf, const ParameterPoint& lambda,
                         const DiophantineConfig& cfg, bool check) {
    const Lattice& lat = h.lattice();
    require(h.ncomp() == 3, "invert_Linf: vector field expected");
    require(Ninf.size() == lat.n_space(), "invert_Linf: one block per space index required");
    double mean = 0;
    for (std::size_t t = 0; t < lat.n_time(); ++t)
        for (int c = 0; c < 3; ++c) mean = std::max(mean, std::abs(h.at(lat.index(t, lat.space_zero()), c)));
    require(mean <= 1e-12 * std::max(h.max_abs(), 1e-300), "invert_Linf: h must have zero space mean");
    if (check) {
        auto m1 = melnikov1_check(lambda, Ninf, cfg, lat);
        if (!m1.pass) fail(ErrorCode::melnikov, "invert_Linf: first Melnikov condition fails at " + m1.describe(lat.nu()));
    }
    FourierField g(lat, 3);
    parallel_for(0, lat.n_time(), [&](std::size_t t) {
        const double ol = omega_dot(lambda, lat, t);
        for (std::size_t s = 0; s < lat.n_space(); ++s) {
            if (s == lat.space_zero()) continue;
            const std::size_t i = lat.index(t, s);
            Eigen::Map<const Vec3> x(&h.at(i, 0));
            if (x.isZero(0.0)) continue;
            Mat3 A = Ninf[s] + cplx(0.0, ol) * Mat3::Identity();
            Eigen::PartialPivLU<Mat3> lu(A);
            if (!(std::abs(lu.determinant()) > 0.0)) fail(ErrorCode::melnikov, "invert_Linf: singular block");
            Eigen::Map<Vec3>(&g.at(i, 0)) = lu.solve(Vec3(x));
        }
    });
    return g;
}

FourierField apply_Linf(const FourierField& g, const DiagonalBlocks& Ninf, const ParameterPoint& lambda) {
    const Lattice& lat = g.lattice();
    FourierField h(lat, 3);
    for (std::size_t t = 0; t < lat.n_time(); ++t) {
        const double ol = omega_dot(lambda, lat, t);
        for (std::size_t s = 0; s < lat.n_space(); ++s) {
            if (s == lat.space_zero()) continue;
            const std::size_t i = lat.index(t, s);
            Mat3 A = Ninf[s] + cplx(0.0, ol) * Mat3::Identity();
            Eigen::Map<Vec3>(&h.at(i, 0)) = A * Eigen::Map<const Vec3>(&g.at(i, 0));
        }
    }
    return h;
}

FourierField invert_L(const FourierField& h, const InverseChain& chain, const ParameterPoint& lambda,
                      const DiophantineConfig& cfg) {
    require(chain.Phi.size() == chain.Phi_inv.size(), "invert_L: transform factors mismatch");
    auto g = apply(chain.E_perp_inv, h);
    for (const auto& P : chain.Phi_inv) g = apply(P, g);
    g = invert_Linf(g, chain.Ninf, lambda, cfg);
    for (auto it = chain.Phi.rbegin(); it != chain.Phi.rend(); ++it) g = apply(*it, g);
    return apply(chain.E_perp, g);
}

}  // namespace qpe
