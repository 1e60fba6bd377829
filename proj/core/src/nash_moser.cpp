#include "qpe/nash_moser.hpp"

#include <cmath>
#include <optional>

#include "qpe/errors.hpp"

namespace qpe {

namespace {

template <class F>
auto stage(const char* name, F&& body) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(e.code(), name, e.what());
    }
}

void require_odd_zero_mean(const FourierField& v, const char* what) {
    require(v.ncomp() == 3, std::string(what) + ": vector field expected");
    if (v.max_abs() == 0.0) return;
    if (classify_parity(v, 1e-10) != Parity::odd) fail(ErrorCode::precondition, std::string(what) + ": parity violation, odd field expected");
    if (!has_zero_space_mean(v, 1e-12)) fail(ErrorCode::precondition, std::string(what) + ": zero space mean violated");
}

DiagonalBlocks difference_blocks(const DiagonalBlocks& a, const DiagonalBlocks& b) {
    DiagonalBlocks d(a.size());
    for (std::size_t s = 0; s < a.size(); ++s) d[s] = a[s] - b[s];
    return d;
}

double scaled_sup(const DiagonalBlocks& Q, const Lattice& lat, double M) {
    double m = 0;
    for (std::size_t s = 0; s < lat.n_space(); ++s) {
        if (s == lat.space_zero()) continue;
        m = std::max(m, Q[s].norm() * std::pow(double(lat.space_norm2(s)), 0.5 * M));
    }
    return m;
}

}  // namespace

EulerProblem EulerProblem::make(const Lattice& lat, double epsilon, const ParameterPoint& lambda, const FourierField& f) {
    require(f.lattice() == lat, "EulerProblem: forcing lattice mismatch");
    require(static_cast<int>(lambda.omega.size()) == lat.nu(), "EulerProblem: omega size mismatch");
    require(epsilon >= 0.0, "EulerProblem: epsilon must be nonnegative");
    require_odd_zero_mean(f, "EulerProblem forcing");
    EulerProblem p;
    p.lattice = lat;
    p.epsilon = epsilon;
    p.lambda = lambda;
    p.f = f;
    p.F = curl(f);
    return p;
}

FourierField euler_nonlinearity(const FourierField& v) {
    auto U = biot_savart(v);
    return dir_deriv(U, v) - dir_deriv(v, U);
}

FourierField residual(const FourierField& v, const EulerProblem& prob) {
    require_odd_zero_mean(v, "residual");
    auto y = apply_transport(v, prob.lambda);
    auto n = pi0_perp(euler_nonlinearity(v) - prob.F);
    n *= prob.epsilon;
    y += n;
    y.set_parity(Parity::even);
    return y;
}

Linearized build_linearized(const FourierField& v, const EulerProblem& prob) {
    require_odd_zero_mean(v, "build_linearized");
    const Lattice& lat = v.lattice();
    Linearized L;
    L.v = v;
    L.a = biot_savart(v);
    L.M_U = jacobian(L.a);
    L.M_U *= -1.0;
    L.M_v = jacobian(v);
    L.epsilon = prob.epsilon;
    L.lambda = prob.lambda;
    auto K = curl_lambda_inv_symbol(lat);
    auto vxi = dot_xi_symbol(v);
    vxi *= cplx(0.0, -1.0);
    auto s0 = MatrixSymbol::from_field(L.M_U) + symbol_product(vxi, K);
    s0.set_order(0);
    auto sm1 = symbol_product(MatrixSymbol::from_field(L.M_v), K);
    sm1.set_order(-1);
    L.R0 = BlockOperator::from_symbol(s0);
    L.Rm1 = BlockOperator::from_symbol(sm1);
    L.perturbation = op_block(lat, ConjugatedOp::directional, L.a) + L.R0 + L.Rm1;
    L.perturbation *= prob.epsilon;
    return L;
}

FourierField Linearized::apply(const FourierField& h) const {
    auto g = pi0_perp(h);
    auto Uh = biot_savart(g);
    auto p = dir_deriv(a, g) + matvec(M_U, g) - dir_deriv(v, Uh) + matvec(M_v, Uh);
    p *= epsilon;
    return pi0_perp(apply_transport(g, lambda) + p);
}

FourierField Linearized::apply_block(const FourierField& h) const {
    auto g = pi0_perp(h);
    return pi0_perp(apply_transport(g, lambda) + qpe::apply(perturbation, g));
}

// ---------------------------------------------------------------------------

StagedInverse build_staged_inverse(const Linearized& lin, const DiophantineConfig& cfg, const StageOptions& opt) {
    const Lattice& lat = lin.v.lattice();
    const double eps = lin.epsilon;
    const auto& lam = lin.lambda;
    const auto Id = BlockOperator::identity(lat);
    const auto Pp = restrict_block(Id, Subspace::perp, Subspace::perp);
    StagedInverse out;
    out.lambda = lam;
    out.cfg = cfg;
    auto& rep = out.report;

    if (eps == 0.0 || lin.v.max_abs() == 0.0) {
        out.chain.E_perp = Pp;
        out.chain.E_perp_inv = Pp;
        out.chain.Ninf = normal_form_blocks(lam, {}, lat);
        rep.flags = "-";
        return out;
    }

    auto a = lin.a;
    a *= eps;
    auto st = stage("straighten", [&] { return straighten(a, lam, cfg, opt.straighten); });
    rep.straighten = st.report;
    const auto& d = st.diffeo;
    auto Ab = diffeo_block(d, +1);
    auto Ainv = stage("straighten", [&] { return block_neumann_inverse(Ab - Id, opt.s0, opt.neumann); });
    auto R1 = compose(Ainv, commutator_transport(Ab, lam) + compose(lin.perturbation, Ab));

    auto V = principal_zeroth_symbol(d, lin.M_U, lin.v, eps, opt.s0, opt.neumann);
    auto diag = stage("diagonalize", [&] { return diagonalize_symbol_transport(V, lam, cfg, opt.symbol); });
    rep.symbol = diag.report;
    auto M = stage("diagonalize", [&] { return solve_zeroth_homological(V, diag, lam, cfg, &rep.symbol, opt.s0); });
    auto z = stage("order-zero", [&] { return eliminate_order_zero(R1, M, lam, opt.s0, opt.neumann); });
    auto lo = stage("lower-orders", [&] { return reduce_lower_orders(z.R2, lam, cfg, opt.M_target, opt.s0, opt.neumann); });
    rep.symbol.R2_norms = lo.report.R2_norms;
    rep.symbol.Z_norms = lo.report.Z_norms;

    Conjugator C;
    C.E = compose(Ab, z.B);
    for (const auto& T : lo.T) C.E = compose(C.E, T);
    C.E_inv = compose(z.B_inv, Ainv);
    for (const auto& Ti : lo.T_inv) C.E_inv = compose(Ti, C.E_inv);
    auto epsMU = lin.M_U;
    epsMU *= eps;
    auto l0 = stage("projector", [&] { return build_L0(C, lo.Q, lo.R3, epsMU, opt.s0, opt.neumann); });
    rep.schur_defect = l0.schur_defect;

    KamSchedule ks = opt.kam;
    if (ks.tol <= 0) ks.tol = kam_tolerance(eps);
    ks.M = opt.M_target;
    ks.s0 = opt.s0;
    auto kr = stage("kam", [&] { return reduce_to_blocks(l0.Q0, l0.R0, lam, cfg, ks); });
    rep.kam = kr.steps;
    auto Q0 = diagonal_blocks(l0.Q0);
    rep.Q0_scaled_sup = block_scaled_sup(Q0, lat);
    rep.Qinf_scaled_sup = block_scaled_sup(kr.Qinf, lat);
    rep.Q_change_scaled = scaled_sup(difference_blocks(kr.Qinf, Q0), lat, opt.M_target);
    rep.flags = "TDOLPK";

    out.chain.E_perp = std::move(l0.E_perp);
    out.chain.E_perp_inv = std::move(l0.E_perp_inv);
    out.chain.Phi = std::move(kr.Phi);
    out.chain.Phi_inv = std::move(kr.Phi_inv);
    out.chain.Ninf = normal_form_blocks(lam, kr.Qinf, lat);
    return out;
}

// ---------------------------------------------------------------------------

NashMoserResult nash_moser_solve(const EulerProblem& prob, const DiophantineConfig& cfg,
                                 const NashMoserSchedule& sched) {
    require(sched.chi == 1.5, "nash_moser_solve: chi is fixed at 3/2");
    const Lattice& lat = prob.lattice;
    NashMoserResult res;
    FourierField v(lat, 3, Parity::odd);
    const double scale = prob.epsilon > 0 ? std::sqrt(prob.epsilon) : 1.0;
    int growth = 0;
    bool reprojected = false;
    std::optional<StagedInverse> cached;
    for (int n = 0;; ++n) {
        NashMoserStep row;
        row.n = n;
        row.reprojected = reprojected;
        auto y = residual(v, prob);
        row.res_s0 = sobolev_norm(y, sched.s0);
        row.norm_v = sobolev_norm(v, sched.s0);
        row.norm_v_high = sobolev_norm(v, sched.s0 + sched.mu_bar);
        row.norm_v_scaled = row.norm_v / scale;
        row.div_v = sobolev_norm(div(v), sched.s0);
        res.trace.push_back(row);
        auto& cur = res.trace.back();
        if (sched.observer) sched.observer(cur, v);
        if (row.res_s0 <= sched.tol) {
            res.status.ok = true;
            res.status.message = "converged";
            break;
        }
        if (n > 0 && row.res_s0 > res.trace[n - 1].res_s0) {
            if (++growth >= 3) {
                res.status.code = ErrorCode::nonconvergence;
                res.status.stage = "newton";
                res.status.message = "residual grew for 3 consecutive steps";
                break;
            }
        } else {
            growth = 0;
        }
        if (n >= sched.max_steps) {
            res.status.code = ErrorCode::nonconvergence;
            res.status.stage = "newton";
            res.status.message = "residual " + std::to_string(row.res_s0) + " after " + std::to_string(n) + " steps";
            break;
        }
        const double N = std::pow(sched.N0, std::pow(sched.chi, n));
        cur.Nn = N;
        FourierField h;
        try {
            StagedInverse fresh;
            const StagedInverse* inv = nullptr;
            if (sched.reuse_stages && cached) {
                inv = &*cached;
                cur.stage_flags = "reused";
            } else {
                fresh = build_staged_inverse(build_linearized(v, prob), cfg, sched.stages);
                cur.stage_flags = fresh.report.flags;
                res.stage_reports.push_back(fresh.report);
                if (sched.reuse_stages && fresh.report.flags != "-") {
                    cached = std::move(fresh);
                    inv = &*cached;
                } else {
                    inv = &fresh;
                }
            }
            h = stage("inverse", [&] { return smoothing_projector(inv->apply(smoothing_projector(y, N)), N); });
            h *= -1.0;
        } catch (const StageError& e) {
            res.status.code = e.code();
            res.status.stage = e.stage();
            res.status.message = e.what();
            break;
        } catch (const Error& e) {
            res.status.code = e.code();
            res.status.stage = "newton";
            res.status.message = e.what();
            break;
        }
        cur.norm_h = sobolev_norm(h, sched.s0);
        v += h;
        v.set_parity(Parity::odd);
        reprojected = sobolev_norm(div(v), sched.s0) > 10 * sched.div_tol;
        if (reprojected) {
            v = leray_project(v);
            v.set_parity(Parity::odd);
        }
    }
    res.v_star = v;
    return res;
}

Reconstruction reconstruct_velocity_pressure(const FourierField& v, const EulerProblem& prob, double s0) {
    const auto Dinv = FourierMultiplier::neg_laplacian_inv();
    Reconstruction r;
    r.u = curl(apply_multiplier(Dinv, v));
    auto fe = prob.f;
    fe *= prob.epsilon;
    auto uu = dir_deriv(r.u, r.u);
    uu *= prob.epsilon;
    auto Gamma = apply_transport(r.u, prob.lambda) + uu - fe;
    r.p = apply_multiplier(Dinv, div(Gamma));
    r.euler_residual = sobolev_norm(Gamma + grad(r.p), s0);
    r.div_v_norm = sobolev_norm(div(v), s0);
    r.u_parity = r.u.max_abs() == 0.0 ? Parity::even : classify_parity(r.u, 1e-10);
    r.p_parity = r.p.max_abs() == 0.0 ? Parity::even : classify_parity(r.p, 1e-10);
    return r;
}

}  // namespace qpe
