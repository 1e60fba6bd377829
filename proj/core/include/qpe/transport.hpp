#pragma once

#include <array>
#include <vector>

#include "qpe/block_operator.hpp"

namespace qpe {

struct InversionOptions {
    double tol = 1e-12;  // sup-norm bound of the inversion defect
    int max_iter = 50;
};

// x -> x + alpha(phi, x) with inverse y -> y + alpha_inv(phi, y). The actions
// A h = h(x + alpha) and A^{-1} h = h(y + alpha_inv) are the multipliers
// Op(e^{i xi.alpha}) and Op(e^{i xi.alpha_inv}).
struct TorusDiffeo {
    FourierField alpha;
    FourierField alpha_inv;
    double residual = 0;  // sup bound of alpha(y + alpha_inv) + alpha_inv
    ScalarSymbol fwd;
    ScalarSymbol bwd;

    const Lattice& lattice() const { return alpha.lattice(); }

    static TorusDiffeo identity(const Lattice& lat);
    // Inverts by the fixed point alpha_inv <- -alpha(y + alpha_inv).
    static TorusDiffeo from_displacement(const FourierField& alpha, const InversionOptions& opt = {});
};

// Upper bound of max_{i,k} sup |d_k alpha_i|.
double gradient_sup(const FourierField& alpha);

FourierField pullback(const TorusDiffeo& d, const FourierField& h);     // A h
FourierField pushforward(const TorusDiffeo& d, const FourierField& h);  // A^{-1} h
FourierField adjoint_action(const TorusDiffeo& d, const FourierField& h);  // A* h = det(Id + D alpha_inv) A^{-1} h
// det(Id + D u) for a displacement u.
FourierField jacobian_determinant(const FourierField& u);

struct StraightenSchedule {
    double N0 = 4.0;
    double chi = 1.5;
    int max_steps = 12;
    double tol = 1e-13;    // stop when ||a_n||_{s0} <= tol
    double m_tol = 1e-9;   // required |m_final - zeta|
    double s0 = 2.0;
    InversionOptions inversion;
};

struct StraightenStep {
    int n = 0;
    double Nn = 0;
    double norm_a = 0;       // ||a_n||_{s0}
    double norm_alpha = 0;   // ||alpha_{n-1}||_{s0}, 0 at n = 0
    double m_minus_zeta = 0; // |m_n - zeta|
};

struct StraighteningReport {
    std::vector<StraightenStep> steps;
    bool converged = false;
    double residual = 0;  // ||omega.d beta + zeta.grad beta + a + a.grad beta||_{s0}
    std::array<double, 3> m{};
    // Slope of log ||a_{n+1}|| against log ||a_n|| over points above floor.
    double contraction_order(double floor = 1e-15) const;
};

struct StraighteningResult {
    TorusDiffeo diffeo;
    StraighteningReport report;
};

// Conjugates omega.d_phi + (zeta + a).grad to omega.d_phi + zeta.grad, with a
// even, divergence free and of zero space mean (the perturbation scale is
// carried by a).
StraighteningResult straighten(const FourierField& a, const ParameterPoint& lambda, const DiophantineConfig& cfg,
                               const StraightenSchedule& sched = {});

// T h = omega.d_phi h + zeta.grad h + a.grad h.
FourierField apply_transport_operator(const FourierField& h, const FourierField& a, const ParameterPoint& lambda);
// ||A^{-1} T A h - (omega.d_phi + zeta.grad) h||_{s0}.
double conjugation_residual(const TorusDiffeo& d, const FourierField& a, const ParameterPoint& lambda,
                            const FourierField& h, double s0);
// ||omega.d beta + zeta.grad beta + a + a.grad beta||_{s0}.
double transport_identity_residual(const FourierField& beta, const FourierField& a, const ParameterPoint& lambda,
                                   double s0);

enum class ConjugatedOp { multiplication, directional, curl, lambda, lambda_inv };

// Block matrix of A^{-1} op A. `coef` is the 9-component matrix field for
// multiplication or the vector field a for a.grad; unused otherwise.
BlockOperator conjugate_operator(const TorusDiffeo& d, ConjugatedOp op, const FourierField& coef = {});
// Op(e^{i xi.alpha}) (sign = +1) or Op(e^{i xi.alpha_inv}) (sign = -1).
BlockOperator diffeo_block(const TorusDiffeo& d, int sign);
// Block matrices of the unconjugated operators.
BlockOperator op_block(const Lattice& lat, ConjugatedOp op, const FourierField& coef = {});

}  // namespace qpe
