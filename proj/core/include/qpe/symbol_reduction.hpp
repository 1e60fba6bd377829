#pragma once

#include <vector>

#include "qpe/block_operator.hpp"
#include "qpe/transport.hpp"

namespace qpe {

inline BlockOperator symbol_to_block(const MatrixSymbol& V) { return BlockOperator::from_symbol(V); }
inline MatrixSymbol block_to_symbol(const BlockOperator& R) { return R.to_symbol(); }

// ---- symbol builders ----

// (b . xi) Id for a vector field b.
MatrixSymbol dot_xi_symbol(const FourierField& b);
// [C^T xi]_x for a 9-component matrix field C (row-major); C = Id gives [xi]_x.
MatrixSymbol cross_xi_symbol(const FourierField& C);
// i [xi]_x / |xi|^2, zero at xi = 0: the symbol of curl Lambda^{-1}.
MatrixSymbol curl_lambda_inv_symbol(const Lattice& lat);

// Principal zeroth-order symbol of eps A^{-1} R_0 A for R_0 = M_U - v.grad U:
//   eps [ M_U(y + u) + (b.xi) [G^T xi]_x / (xi^T G G^T xi) ],
// with u = alpha_inv, G = (Id + D alpha)(y + u) and b = G (A^{-1} v).
// The reciprocal is expanded as a Neumann series around |xi|^2.
MatrixSymbol principal_zeroth_symbol(const TorusDiffeo& d, const FourierField& M_U, const FourierField& v,
                                     double eps, double s0 = 2.0, const NeumannOptions& opt = {});

// ---- zeroth order: variable coefficients homological equation ----

struct SymbolSchedule {
    double N0 = 4.0;
    double chi = 1.5;
    int max_steps = 12;
    double tol = 1e-15;  // stop when |V_n|_{s0} <= tol * max(|V_0|_{s0}, 1)
    double s0 = 2.0;
    NeumannOptions neumann;
};

struct SymbolReductionReport {
    std::vector<double> V_norms;  // |V_n|_{s0}
    std::vector<double> V_means;  // max_xi |<V_n>(xi)|
    std::vector<double> Psi_norms;
    bool converged = false;
    double M_norm = 0;
    double homological_residual = 0;  // |(omega.d + zeta.grad) M + V M + V|_{s0}
    double solvability_defect = 0;    // max_xi |<Phi^{-1} V>(xi)|
    std::vector<double> R2_norms;     // lower-order stages: |R_n <D>^n|_{s0}
    std::vector<double> Z_norms;      // max_j ||<R_n>_j||_HS
};

struct DiagonalizationResult {
    MatrixSymbol Phi;
    MatrixSymbol Phi_inv;
    SymbolReductionReport report;
};

// Iterates Psi_n = -(omega.d + zeta.grad)^{-1}_ext Pi_{N_n} V_n and
// V_{n+1} = Pi^perp V_n + (Phi_n^{-1} - Id) Pi^perp V_n + Phi_n^{-1} V_n Psi_n,
// accumulating Phi = Phi_0 Phi_1 ... fiberwise.
DiagonalizationResult diagonalize_symbol_transport(const MatrixSymbol& V, const ParameterPoint& lambda,
                                                   const DiophantineConfig& cfg, const SymbolSchedule& sched = {});

// M = -Phi (omega.d + zeta.grad)^{-1}_ext [Phi^{-1} V]; fills the residual
// and solvability fields of the report.
MatrixSymbol solve_zeroth_homological(const MatrixSymbol& V, const DiagonalizationResult& diag,
                                      const ParameterPoint& lambda, const DiophantineConfig& cfg,
                                      SymbolReductionReport* report = nullptr, double s0 = 2.0);

double homological_residual(const MatrixSymbol& V, const MatrixSymbol& M, const ParameterPoint& lambda, double s0);

struct ZerothOrderResult {
    BlockOperator B;      // Id + Op(M)
    BlockOperator B_inv;  // Neumann series
    BlockOperator R2;     // B^{-1} L^(1) B - (omega.d + zeta.grad)
};

// R1 is the full perturbation of L^(1) = omega.d + zeta.grad + R1. R2 is the
// exact conjugation defect B^{-1}([omega.d + zeta.grad, Op(M)] + R1 B).
ZerothOrderResult eliminate_order_zero(const BlockOperator& R1, const MatrixSymbol& M, const ParameterPoint& lambda,
                                       double s0 = 2.0, const NeumannOptions& opt = {});

// B^{-1}(Op(V) Op(M) - Op(V M)) + B^{-1} Rm1 B, the remainder written through
// the homological equation.
BlockOperator zeroth_remainder_formula(const MatrixSymbol& V, const MatrixSymbol& M, const BlockOperator& Rm1,
                                       const ZerothOrderResult& z);

// ---- lower orders ----

struct LowerOrderResult {
    BlockOperator Q;   // block diagonal, (phi, x)-independent
    BlockOperator R3;  // remainder, R3 <D>^{M_target} bounded
    std::vector<BlockOperator> T;      // Id + Op(M_n)
    std::vector<BlockOperator> T_inv;
    SymbolReductionReport report;
};

// For n < M_target: M_{n+1} = (omega.d + zeta.grad)^{-1}_ext [<R_n> - R_n],
// Z_{n+1} = Z_n + <R_n>, each step conjugating by Id + Op(M_{n+1}).
LowerOrderResult reduce_lower_orders(const BlockOperator& R2, const ParameterPoint& lambda, const DiophantineConfig& cfg,
                                     int M_target = 2, double s0 = 2.0, const NeumannOptions& opt = {});

}  // namespace qpe
