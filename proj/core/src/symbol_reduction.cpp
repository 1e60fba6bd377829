#include "qpe/symbol_reduction.hpp"

#include <algorithm>
#include <cmath>

#include "qpe/errors.hpp"

namespace qpe {

namespace {

// E_m with [w]_x = sum_m w_m E_m.
Mat3 cross_basis(int m) {
    Mat3 e = Mat3::Zero();
    int a = (m + 1) % 3, b = (m + 2) % 3;
    e(b, a) = 1.0;
    e(a, b) = -1.0;
    return e;
}

// S += f_comp(phi, x) * g(xi), g tabulated over the fibers.
void add_field_times(MatrixSymbol& S, const FourierField& f, int comp, const std::vector<Mat3>& g) {
    const Lattice& lat = f.lattice();
    for (std::size_t i = 0; i < lat.size(); ++i) {
        cplx c = f.at(i, comp);
        if (c == 0.0) continue;
        auto& col = S.table().entry(offset_of(lat, i));
        for (std::size_t s = 0; s < col.size(); ++s) col[s] += c * g[s];
    }
}

std::vector<Mat3> tabulate(const Lattice& lat, const std::function<Mat3(const int*)>& f) {
    std::vector<Mat3> g(lat.n_space());
    for (std::size_t s = 0; s < g.size(); ++s) {
        int xi[3] = {lat.space_coords(s)[0], lat.space_coords(s)[1], lat.space_coords(s)[2]};
        g[s] = f(xi);
    }
    return g;
}

bool is_zero(const MatrixSymbol& V) { return V.table().max_abs() == 0.0; }

double Nschedule(double N0, double chi, int n) { return std::pow(N0, std::pow(chi, n)); }

}  // namespace

MatrixSymbol dot_xi_symbol(const FourierField& b) {
    require(b.ncomp() == 3, "dot_xi_symbol: vector field expected");
    const Lattice& lat = b.lattice();
    MatrixSymbol S(lat, 1);
    for (int k = 0; k < 3; ++k)
        add_field_times(S, b, k, tabulate(lat, [k](const int* xi) { return Mat3(double(xi[k]) * Mat3::Identity()); }));
    return S;
}

MatrixSymbol cross_xi_symbol(const FourierField& C) {
    require(C.ncomp() == 9, "cross_xi_symbol: matrix field expected");
    const Lattice& lat = C.lattice();
    MatrixSymbol S(lat, 1);
    // (C^T xi)_m = sum_i C_im xi_i
    for (int i = 0; i < 3; ++i)
        for (int m = 0; m < 3; ++m) {
            Mat3 E = cross_basis(m);
            add_field_times(S, C, 3 * i + m, tabulate(lat, [&](const int* xi) { return Mat3(double(xi[i]) * E); }));
        }
    return S;
}

MatrixSymbol curl_lambda_inv_symbol(const Lattice& lat) {
    return MatrixSymbol::from_function(
        lat,
        [](const int* xi) {
            int n2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            Mat3 m = Mat3::Zero();
            if (n2 == 0) return m;
            for (int k = 0; k < 3; ++k) m += double(xi[k]) * cross_basis(k);
            return Mat3(cplx(0, 1) * m / double(n2));
        },
        -1);
}

MatrixSymbol principal_zeroth_symbol(const TorusDiffeo& d, const FourierField& M_U, const FourierField& v, double eps,
                                     double s0, const NeumannOptions& opt) {
    const Lattice& lat = d.lattice();
    require(M_U.ncomp() == 9 && v.ncomp() == 3, "principal symbol: M_U must be 3x3 and v a vector field");
    FourierField Mt(lat, 9), G(lat, 9);
    auto Da = jacobian(d.alpha);
    const std::size_t i0 = lat.index(lat.time_zero(), lat.space_zero());
    for (int c = 0; c < 9; ++c) {
        Mt.set_component(c, pushforward(d, M_U.component(c)));
        auto g = pushforward(d, Da.component(c));
        if (c % 4 == 0) g.at(i0, 0) += 1.0;
        G.set_component(c, g);
    }
    auto b = matvec(G, pushforward(d, v), ProductMode::sparse);

    // xi^T G G^T xi = |xi|^2 (1 + p), p = xi^T P xi / |xi|^2, P = G G^T - Id
    MatrixSymbol p(lat, 0);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            FourierField Pik(lat, 1);
            for (int m = 0; m < 3; ++m) Pik += multiply_comp(G, 3 * i + m, G, 3 * k + m, ProductMode::sparse);
            if (i == k) Pik.at(i0, 0) -= 1.0;
            add_field_times(p, Pik, 0, tabulate(lat, [i, k](const int* xi) {
                                int n2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
                                return Mat3(Mat3::Identity() * (n2 ? double(xi[i] * xi[k]) / n2 : 0.0));
                            }));
        }
    auto inv = symbol_neumann_inverse(p, s0, opt);
    auto w = MatrixSymbol::from_function(
        lat,
        [](const int* xi) {
            int n2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            return Mat3(Mat3::Identity() * (n2 ? 1.0 / n2 : 0.0));
        },
        -2);
    auto num = symbol_product(dot_xi_symbol(b), cross_xi_symbol(G));
    auto R00 = MatrixSymbol::from_field(Mt) + symbol_product(num, symbol_product(inv, w));
    R00 *= eps;
    R00.set_order(0);
    return R00;
}

DiagonalizationResult diagonalize_symbol_transport(const MatrixSymbol& V, const ParameterPoint& lambda,
                                                   const DiophantineConfig& cfg, const SymbolSchedule& sched) {
    const Lattice& lat = V.lattice();
    if (!is_zero(V)) {
        if (symbol_joint_parity(V) != Parity::odd)
            fail(ErrorCode::precondition, "diagonalize: V must be odd in (phi, x, xi)");
        if (symbol_xi_parity(V) != Parity::even) fail(ErrorCode::precondition, "diagonalize: V must be even in xi");
    }
    auto dio = diophantine_check(lambda, cfg, lat);
    if (!dio.pass) fail(ErrorCode::diophantine, "diagonalize: Diophantine check failed at " + dio.describe(lat.nu()));

    DiagonalizationResult res;
    auto& rep = res.report;
    res.Phi = MatrixSymbol::identity(lat);
    res.Phi_inv = MatrixSymbol::identity(lat);
    MatrixSymbol Vn = V;
    const double v0 = symbol_norm(V, sched.s0);
    for (int n = 0;; ++n) {
        double nv = symbol_norm(Vn, sched.s0);
        rep.V_norms.push_back(nv);
        rep.V_means.push_back(symbol_mean_norm(Vn));
        if (nv <= sched.tol * v0 || nv == 0.0) {
            rep.converged = true;
            break;
        }
        if (n >= sched.max_steps) break;
        double N = Nschedule(sched.N0, sched.chi, n);
        auto Psi = symbol_transport_inverse_ext(symbol_project(Vn, N), lambda, cfg);
        Psi *= -1.0;
        rep.Psi_norms.push_back(symbol_norm(Psi, sched.s0));
        auto Phin_inv = symbol_neumann_inverse(Psi, sched.s0, sched.neumann);
        auto high = symbol_project(Vn, N, true);
        // Phi_n^{-1} (Pi^perp V_n + V_n Psi_n)
        Vn = symbol_product(Phin_inv, high + symbol_product(Vn, Psi));
        Vn.set_order(0);
        res.Phi = symbol_product(res.Phi, MatrixSymbol::identity(lat) + Psi);
        res.Phi_inv = symbol_product(Phin_inv, res.Phi_inv);
    }
    if (!rep.converged)
        fail(ErrorCode::nonconvergence,
             "diagonalize: |V_n| = " + std::to_string(rep.V_norms.back()) + " after " + std::to_string(sched.max_steps) +
                 " steps");
    return res;
}

double homological_residual(const MatrixSymbol& V, const MatrixSymbol& M, const ParameterPoint& lambda, double s0) {
    auto r = symbol_transport(M, lambda) + symbol_product(V, M) + V;
    return symbol_norm(r, s0);
}

MatrixSymbol solve_zeroth_homological(const MatrixSymbol& V, const DiagonalizationResult& diag,
                                      const ParameterPoint& lambda, const DiophantineConfig& cfg,
                                      SymbolReductionReport* report, double s0) {
    auto W = symbol_product(diag.Phi_inv, V);
    double defect = symbol_mean_norm(W);
    double scale = std::max(symbol_norm(V, s0), 1e-300);
    if (defect > 1e-10 * scale)
        fail(ErrorCode::precondition,
             "zeroth homological: <Phi^{-1} V> = " + std::to_string(defect) + " does not vanish (parity broken)");
    auto M = symbol_product(diag.Phi, symbol_transport_inverse_ext(W, lambda, cfg));
    M *= -1.0;
    M.set_order(0);
    if (report) {
        report->solvability_defect = defect;
        report->M_norm = symbol_norm(M, s0);
        report->homological_residual = homological_residual(V, M, lambda, s0);
    }
    return M;
}

ZerothOrderResult eliminate_order_zero(const BlockOperator& R1, const MatrixSymbol& M, const ParameterPoint& lambda,
                                       double s0, const NeumannOptions& opt) {
    const Lattice& lat = M.lattice();
    ZerothOrderResult z;
    auto Mb = symbol_to_block(M);
    z.B = BlockOperator::identity(lat) + Mb;
    z.B_inv = block_neumann_inverse(Mb, s0, opt);
    auto inner = commutator_transport(Mb, lambda) + R1 + compose(R1, Mb);
    z.R2 = compose(z.B_inv, inner);
    return z;
}

BlockOperator zeroth_remainder_formula(const MatrixSymbol& V, const MatrixSymbol& M, const BlockOperator& Rm1,
                                       const ZerothOrderResult& z) {
    auto Vb = symbol_to_block(V), Mb = symbol_to_block(M);
    auto comp = compose(Vb, Mb) - symbol_to_block(symbol_product(V, M));
    return compose(z.B_inv, comp) + compose(z.B_inv, compose(Rm1, z.B));
}

LowerOrderResult reduce_lower_orders(const BlockOperator& R2, const ParameterPoint& lambda, const DiophantineConfig& cfg,
                                     int M_target, double s0, const NeumannOptions& opt) {
    require(M_target >= 1, "reduce_lower_orders: M_target must be at least 1");
    const Lattice& lat = R2.lattice();
    auto dio = diophantine_check(lambda, cfg, lat);
    if (!dio.pass) fail(ErrorCode::diophantine, "lower orders: Diophantine check failed at " + dio.describe(lat.nu()));

    LowerOrderResult res;
    auto& rep = res.report;
    BlockOperator Z(lat), R = R2;
    const auto Id = BlockOperator::identity(lat);
    for (int n = 0; n + 1 < M_target; ++n) {
        rep.R2_norms.push_back(decay_norm(R, s0, n + 1));
        auto avg = block_diagonal(R);
        rep.Z_norms.push_back(avg.table().max_abs());
        auto target = avg - R;
        auto Mn = transport_inverse_ext(target, lambda, cfg);
        // defect of the cutoff inverse on offsets outside the Diophantine box
        auto E = commutator_transport(Mn, lambda) - target;
        auto Znew = Z + avg;
        auto Tinv = block_neumann_inverse(Mn, s0, opt);
        R = compose(Tinv, Znew + E + compose(Z + R, Mn)) - Znew;
        Z = Znew;
        res.T.push_back(Id + Mn);
        res.T_inv.push_back(Tinv);
    }
    rep.R2_norms.push_back(decay_norm(R, s0, M_target));
    res.Q = block_diagonal(Z);
    res.R3 = R;
    return res;
}

}  // namespace qpe
