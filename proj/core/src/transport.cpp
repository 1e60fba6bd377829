#include "qpe/transport.hpp"

#include <algorithm>
#include <cmath>

#include "qpe/errors.hpp"

namespace qpe {

namespace {

double vec_norm(const std::array<double, 3>& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

Mat3 cross_matrix(const int* xi) {
    Mat3 m = Mat3::Zero();
    m(0, 1) = -double(xi[2]);
    m(0, 2) = double(xi[1]);
    m(1, 0) = double(xi[2]);
    m(1, 2) = -double(xi[0]);
    m(2, 0) = -double(xi[1]);
    m(2, 1) = double(xi[0]);
    return m;
}

}  // namespace

TorusDiffeo TorusDiffeo::identity(const Lattice& lat) {
    TorusDiffeo d;
    d.alpha = FourierField(lat, 3, Parity::odd);
    d.alpha_inv = FourierField(lat, 3, Parity::odd);
    d.fwd = exp_symbol(d.alpha);
    d.bwd = d.fwd;
    return d;
}

double gradient_sup(const FourierField& alpha) {
    auto J = jacobian(alpha);
    double m = 0;
    for (int c = 0; c < 9; ++c) m = std::max(m, sup_norm_bound(J.component(c)));
    return m;
}

TorusDiffeo TorusDiffeo::from_displacement(const FourierField& alpha, const InversionOptions& opt) {
    require(alpha.ncomp() == 3, "diffeo: displacement must be a vector field");
    double g = gradient_sup(alpha);
    if (g >= 0.5) fail(ErrorCode::precondition, "diffeo: invertibility margin violated, |grad alpha| = " + std::to_string(g));
    TorusDiffeo d;
    d.alpha = alpha;
    d.fwd = exp_symbol(alpha);
    FourierField inv = -alpha;
    double defect = 0;
    for (int it = 0; it < opt.max_iter; ++it) {
        auto S = exp_symbol(inv);
        // alpha(y + inv) + inv
        auto r = apply_scalar(S, alpha) + inv;
        defect = sup_norm_bound(r);
        if (defect <= opt.tol) break;
        inv -= r;
    }
    if (defect > opt.tol)
        fail(ErrorCode::nonconvergence, "diffeo: inverse fixed point stalled at defect " + std::to_string(defect));
    inv.set_parity(alpha.parity());
    d.alpha_inv = inv;
    d.residual = defect;
    d.bwd = exp_symbol(inv);
    return d;
}

FourierField pullback(const TorusDiffeo& d, const FourierField& h) {
    auto out = apply_scalar(d.fwd, h);
    out.set_parity(d.alpha.parity() == Parity::odd ? h.parity() : Parity::none);
    return out;
}

FourierField pushforward(const TorusDiffeo& d, const FourierField& h) {
    auto out = apply_scalar(d.bwd, h);
    out.set_parity(d.alpha_inv.parity() == Parity::odd ? h.parity() : Parity::none);
    return out;
}

FourierField jacobian_determinant(const FourierField& u) {
    const Lattice& lat = u.lattice();
    auto J = jacobian(u);
    FourierField one(lat, 1, Parity::even);
    one.at(lat.index(lat.time_zero(), lat.space_zero()), 0) = 1.0;
    FourierField e[3][3];
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            e[i][k] = J.component(3 * i + k);
            if (i == k) e[i][k] += one;
        }
    auto minor = [&](int r1, int c1, int r2, int c2) {
        return multiply(e[r1][c1], e[r2][c2]) - multiply(e[r1][c2], e[r2][c1]);
    };
    return multiply(e[0][0], minor(1, 1, 2, 2)) - multiply(e[0][1], minor(1, 0, 2, 2)) +
           multiply(e[0][2], minor(1, 0, 2, 1));
}

FourierField adjoint_action(const TorusDiffeo& d, const FourierField& h) {
    return multiply(jacobian_determinant(d.alpha_inv), pushforward(d, h));
}

double StraighteningReport::contraction_order(double floor) const {
    std::vector<double> x, y;
    for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
        double a = steps[i].norm_a, b = steps[i + 1].norm_a;
        if (a <= floor || b <= floor) continue;
        x.push_back(std::log(a));
        y.push_back(std::log(b));
    }
    if (x.size() < 2) return 0;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0 ? sxy / sxx : 0;
}

StraighteningResult straighten(const FourierField& a, const ParameterPoint& lambda, const DiophantineConfig& cfg,
                               const StraightenSchedule& sched) {
    require(a.ncomp() == 3, "straighten: a must be a vector field");
    const Lattice& lat = a.lattice();
    require(sched.chi == 1.5, "straighten: chi is fixed to 3/2");
    double na = std::max(sobolev_norm(a, 0), 1e-300);
    require(sobolev_norm(pi0(a), 0) <= 1e-12 * na, "straighten: a must have zero space average");
    require(sobolev_norm(div(a), 0) <= 1e-10 * na, "straighten: a must be divergence free");
    auto dio = diophantine_check(lambda, cfg, lat);
    if (!dio.pass) fail(ErrorCode::diophantine, "straighten: Diophantine check failed at " + dio.describe(lat.nu()));

    StraighteningResult res;
    auto& rep = res.report;
    std::array<double, 3> m = lambda.zeta;
    FourierField an = a;
    FourierField beta(lat, 3, Parity::odd);
    double last_alpha = 0;
    double Nn = sched.N0;
    for (int n = 0;; ++n) {
        StraightenStep st;
        st.n = n;
        st.Nn = Nn;
        st.norm_a = sobolev_norm(an, sched.s0);
        st.norm_alpha = last_alpha;
        st.m_minus_zeta = vec_norm({m[0] - lambda.zeta[0], m[1] - lambda.zeta[1], m[2] - lambda.zeta[2]});
        rep.steps.push_back(st);
        if (st.norm_a <= sched.tol) {
            rep.converged = true;
            break;
        }
        if (n >= sched.max_steps) break;

        auto mean_a = mean(an);
        auto low = smoothing_projector(an, Nn);
        FourierField rhs = -low;
        const std::size_t i0 = lat.index(lat.time_zero(), lat.space_zero());
        for (int c = 0; c < 3; ++c) rhs.at(i0, c) = 0.0;
        auto alpha_n = transport_inverse_ext(rhs, m, lambda, cfg, true);
        alpha_n.set_parity(flip(an.parity()));
        auto An = TorusDiffeo::from_displacement(alpha_n, sched.inversion);
        auto f = smoothing_projector(an, Nn, true) + dir_deriv(an, alpha_n);
        auto next = pushforward(An, f);
        next.set_parity(an.parity());

        if (n == 0) {
            beta = alpha_n;
        } else {
            TorusDiffeo B;
            B.alpha = beta;
            B.fwd = exp_symbol(beta);
            beta += apply_scalar(B.fwd, alpha_n);
        }
        beta.set_parity(alpha_n.parity());
        for (int c = 0; c < 3; ++c) m[c] += mean_a[c].real();
        last_alpha = sobolev_norm(alpha_n, sched.s0);
        an = next;
        Nn = std::pow(Nn, sched.chi);
    }
    rep.m = m;
    if (!rep.converged)
        fail(ErrorCode::nonconvergence,
             "straighten: ||a_n|| = " + std::to_string(rep.steps.back().norm_a) + " after " +
                 std::to_string(sched.max_steps) + " steps");
    double dm = rep.steps.back().m_minus_zeta;
    if (dm > sched.m_tol) fail(ErrorCode::nonconvergence, "straighten: |m - zeta| = " + std::to_string(dm));
    res.diffeo = TorusDiffeo::from_displacement(beta, sched.inversion);
    rep.residual = transport_identity_residual(beta, a, lambda, sched.s0);
    return res;
}

FourierField apply_transport_operator(const FourierField& h, const FourierField& a, const ParameterPoint& lambda) {
    return apply_transport(h, lambda) + dir_deriv(a, h);
}

double conjugation_residual(const TorusDiffeo& d, const FourierField& a, const ParameterPoint& lambda,
                            const FourierField& h, double s0) {
    auto lhs = pushforward(d, apply_transport_operator(pullback(d, h), a, lambda));
    return sobolev_norm(lhs - apply_transport(h, lambda), s0);
}

double transport_identity_residual(const FourierField& beta, const FourierField& a, const ParameterPoint& lambda,
                                   double s0) {
    auto r = apply_transport(beta, lambda) + a + dir_deriv(a, beta);
    return sobolev_norm(r, s0);
}

BlockOperator op_block(const Lattice& lat, ConjugatedOp op, const FourierField& coef) {
    switch (op) {
        case ConjugatedOp::multiplication:
            require(coef.ncomp() == 9 || coef.ncomp() == 1, "conjugate: multiplication needs a matrix field");
            return BlockOperator::multiplication(coef);
        case ConjugatedOp::directional: {
            require(coef.ncomp() == 3, "conjugate: a.grad needs a vector field");
            MatrixSymbol V(lat, 1);
            for (std::size_t i = 0; i < lat.size(); ++i) {
                cplx b[3] = {coef.at(i, 0), coef.at(i, 1), coef.at(i, 2)};
                if (b[0] == 0.0 && b[1] == 0.0 && b[2] == 0.0) continue;
                auto& col = V.table().entry(offset_of(lat, i));
                for (std::size_t s = 0; s < lat.n_space(); ++s) {
                    const auto* xi = lat.space_coords(s);
                    col[s] = cplx(0, 1) * (double(xi[0]) * b[0] + double(xi[1]) * b[1] + double(xi[2]) * b[2]) *
                             Mat3::Identity();
                }
            }
            return BlockOperator::from_symbol(V);
        }
        case ConjugatedOp::curl:
            return BlockOperator::fourier_multiplier(lat, [](const int* xi) { return Mat3(cplx(0, 1) * cross_matrix(xi)); });
        case ConjugatedOp::lambda:
            return BlockOperator::fourier_multiplier(lat, [](const int* xi) {
                int n2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
                return Mat3(Mat3::Identity() * double(n2 == 0 ? 1 : n2));
            });
        case ConjugatedOp::lambda_inv:
            return BlockOperator::fourier_multiplier(lat, [](const int* xi) {
                int n2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
                return Mat3(Mat3::Identity() / double(n2 == 0 ? 1 : n2));
            });
    }
    fail(ErrorCode::precondition, "conjugate: unknown operator");
}

BlockOperator diffeo_block(const TorusDiffeo& d, int sign) {
    return BlockOperator::from_scalar_symbol(sign > 0 ? d.fwd : d.bwd);
}

BlockOperator conjugate_operator(const TorusDiffeo& d, ConjugatedOp op, const FourierField& coef) {
    auto mid = op_block(d.lattice(), op, coef);
    return compose(diffeo_block(d, -1), compose(mid, diffeo_block(d, 1)));
}

}  // namespace qpe
