#pragma once

#include <vector>

#include "qpe/block_operator.hpp"
#include "qpe/small_divisors.hpp"

namespace qpe {

// ---- projector surgery ----

// The composed conjugator E = A B T of the straightening and symbol stages,
// with E^{-1} = T^{-1} B^{-1} A^{-1} formed from the stage inverses.
struct Conjugator {
    BlockOperator E;
    BlockOperator E_inv;
};

struct L0Result {
    BlockOperator Q0;          // Pi^perp Q Pi^perp, block diagonal
    BlockOperator R0;          // remainder of L0 = omega.d + zeta.grad + Q0 + R0
    BlockOperator E_perp;      // Pi^perp E Pi^perp
    BlockOperator E_perp_inv;  // its inverse on H_0
    double schur_defect = 0;   // |E_perp_inv - (F_pp - F_p0 F_00^{-1} F_0p)|, F = E^{-1}
};

// Conjugates L = Pi^perp L^(0) Pi^perp with E_perp, given
// E^{-1} L^(0) E = omega.d + zeta.grad + Q + R3 and Pi^perp L^(0) Pi_0 = eps M_U Pi_0.
// The zero block Pi_0 E Pi_0 is inverted by a Neumann series and
// E_perp^{-1} = (Pi^perp + S)^{-1} Pi^perp E^{-1} Pi^perp with
// S = Pi^perp E^{-1} Pi^perp (Pi^perp E Pi_0)(Pi_0 E Pi_0)^{-1}(Pi_0 E Pi^perp).
L0Result build_L0(const Conjugator& E, const BlockOperator& Q, const BlockOperator& R3, const FourierField& eps_M_U,
                  double s0 = 2.0, const NeumannOptions& opt = {});

// ---- KAM reducibility ----

struct KamStep {
    int n = 0;
    double Nn = 0;
    double remainder_s0 = 0;   // |R_n <D>^M|_{s0}
    double remainder_s0b = 0;  // |R_n <D>^M|_{s0 + b}
    double max_block_change = 0;  // max_j ||(Z_n)_j^j||_HS
    double psi_norm = 0;
    double worst_melnikov = 0;    // smallest sigma / threshold over the solved entries
};

struct KamSchedule {
    double N0 = 4.0;
    double chi = 1.5;
    int max_steps = 10;
    double tol = 1e-13;  // absolute; reduce defaults to 1e-10 eps through kam_tolerance
    double s0 = 2.0;
    double b = 1.0;
    double M = 2.0;
    NeumannOptions neumann;
};

inline double kam_tolerance(double eps) { return 1e-10 * eps; }

struct KamState {
    int n = 0;
    DiagonalBlocks Q;   // (Q_n)_j^j per space index
    BlockOperator R;    // R_n
    // Phi~_n = Phi_0 ... Phi_{n-1}, kept as factors.
    std::vector<BlockOperator> Phi;
    std::vector<BlockOperator> Phi_inv;
    std::vector<KamStep> steps;
};

KamState kam_initial_state(const BlockOperator& Q0, const BlockOperator& R0);

// One conjugation by Phi_n = Id + Psi_n with
// i(omega.l + zeta.dj) Psi + Q_j Psi - Psi Q_j' = -R for |l|, |j - j'| <= N,
// skipping (0, j, j). Throws ErrorCode::melnikov with the offending triple
// when a 9x9 operator is below the second Melnikov threshold.
KamState kam_step(const KamState& state, const ParameterPoint& lambda, const DiophantineConfig& cfg, double N,
                  const KamSchedule& sched = {});

struct KamResult {
    DiagonalBlocks Qinf;
    std::vector<BlockOperator> Phi;
    std::vector<BlockOperator> Phi_inv;
    std::vector<KamStep> steps;  // one row per iterate, the last is the final remainder
    bool converged = false;
    double final_remainder = 0;
    // Order p of r_{n+1} = r_n^p fitted over consecutive pairs; a pair ends
    // the fit once r_{n+1} <= rel_floor r_n (rounding level of the step).
    double contraction_order(double rel_floor = 1e-14) const;
};

// Order p of r_{n+1} = r_n^p over a step sequence, see KamResult.
double kam_contraction_order(const std::vector<KamStep>& steps, double rel_floor = 1e-14);

KamResult reduce_to_blocks(const BlockOperator& Q0, const BlockOperator& R0, const ParameterPoint& lambda,
                           const DiophantineConfig& cfg, const KamSchedule& sched = {});

// Largest ||(Q)_j^j||_HS |j| over j != 0.
double block_scaled_sup(const DiagonalBlocks& Q, const Lattice& lat);

// ---- inversion ----

// (i omega.l + (N_inf)_j^j)^{-1} h mode-wise; h must have zero space mean.
FourierField invert_Linf(const FourierField& h, const DiagonalBlocks& Ninf, const ParameterPoint& lambda,
                         const DiophantineConfig& cfg, bool check = true);
// i omega.l g + (N_inf)_j^j g mode-wise.
FourierField apply_Linf(const FourierField& g, const DiagonalBlocks& Ninf, const ParameterPoint& lambda);

// W_inf = E_perp Phi~_inf together with the normal form.
struct InverseChain {
    BlockOperator E_perp;
    BlockOperator E_perp_inv;
    std::vector<BlockOperator> Phi;
    std::vector<BlockOperator> Phi_inv;
    DiagonalBlocks Ninf;
};

// g = W_inf L_inf^{-1} W_inf^{-1} h, each factor applied in turn.
FourierField invert_L(const FourierField& h, const InverseChain& chain, const ParameterPoint& lambda,
                      const DiophantineConfig& cfg);

}  // namespace qpe
