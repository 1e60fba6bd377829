#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qpe/errors.hpp"
#include "qpe/reducibility.hpp"
#include "qpe/symbol_reduction.hpp"
#include "qpe/transport.hpp"

namespace qpe {

struct EulerProblem {
    Lattice lattice;
    double epsilon = 0;
    ParameterPoint lambda;
    FourierField f;  // forcing: odd, zero space mean
    FourierField F;  // curl f

    // Validates the forcing and computes F.
    static EulerProblem make(const Lattice& lat, double epsilon, const ParameterPoint& lambda, const FourierField& f);
};

// U(v).grad v - v.grad U(v), U(v) = curl Lambda^{-1} v.
FourierField euler_nonlinearity(const FourierField& v);
// F(v) = omega.d v + zeta.grad v + eps Pi^perp [U(v).grad v - v.grad U(v) - F].
FourierField residual(const FourierField& v, const EulerProblem& prob);

// L = Pi^perp (omega.d + zeta.grad + eps a.grad + eps R) Pi^perp at v, with
// a = U(v), R0 h = M_U h - v.grad U(h), R-1 h = M_v U(h), M_U = -D U(v), M_v = D v.
struct Linearized {
    FourierField v;
    FourierField a;
    FourierField M_U;
    FourierField M_v;
    double epsilon = 0;
    ParameterPoint lambda;
    BlockOperator R0;           // Op(M_U - i (v.xi) i[xi]_x / |xi|^2)
    BlockOperator Rm1;          // Op(M_v i[xi]_x / |xi|^2)
    BlockOperator perturbation;  // eps (a.grad + R0 + Rm1)

    // Both routes apply Pi^perp on either side.
    FourierField apply(const FourierField& h) const;        // through field products
    FourierField apply_block(const FourierField& h) const;  // through the block matrix
};

Linearized build_linearized(const FourierField& v, const EulerProblem& prob);

// ---- staged inverse ----

struct StageOptions {
    StraightenSchedule straighten;
    SymbolSchedule symbol;
    int M_target = 2;
    KamSchedule kam;              // kam.tol <= 0 selects 1e-10 eps
    NeumannOptions neumann;
    double s0 = 2.0;
};

struct StageReport {
    StraighteningReport straighten;
    SymbolReductionReport symbol;
    std::vector<KamStep> kam;
    double schur_defect = 0;
    double Q0_scaled_sup = 0;    // max_j ||(Q0)_j^j|| |j|
    double Qinf_scaled_sup = 0;  // max_j ||(Q_inf)_j^j|| |j|
    double Q_change_scaled = 0;  // max_j ||(Q_inf - Q0)_j^j|| |j|^M
    std::string flags;           // stages run: T straighten, D diagonalize, O order zero, L lower, P projector, K kam
};

// Pipeline failures carry the stage that raised them.
class StageError : public Error {
public:
    StageError(ErrorCode code, std::string stage, const std::string& what)
        : Error(code, "[" + stage + "] " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct StagedInverse {
    InverseChain chain;
    StageReport report;
    ParameterPoint lambda;
    DiophantineConfig cfg;

    FourierField apply(const FourierField& h) const { return invert_L(h, chain, lambda, cfg); }
};

// Runs straightening, symbol diagonalization, order-zero and lower-order
// elimination, projector surgery and KAM at the given linearization.
StagedInverse build_staged_inverse(const Linearized& lin, const DiophantineConfig& cfg, const StageOptions& opt = {});

// ---- Nash-Moser ----

struct NashMoserStep {
    int n = 0;
    double Nn = 0;
    double res_s0 = 0;
    double norm_v = 0;         // ||v_n||_{s0}
    double norm_v_high = 0;    // ||v_n||_{s0 + mu_bar}
    double norm_v_scaled = 0;  // ||v_n||_{s0} / eps^{1/2}
    double norm_h = 0;         // ||h_n||_{s0}
    double div_v = 0;
    bool reprojected = false;
    std::string stage_flags;
};

struct NashMoserSchedule {
    double N0 = 4.0;
    double chi = 1.5;
    int max_steps = 8;
    double tol = 1e-9;       // on ||F(v_n)||_{s0}
    double s0 = 2.0;
    double mu_bar = 2.0;     // v is also reported in H^{s0 + mu_bar}
    double div_tol = 1e-12;  // re-project when ||div v_n||_{s0} > 10 div_tol
    StageOptions stages;
    // Reuse the first nontrivial staged inverse at later steps instead of
    // rebuilding it at every v_n (a chord iteration; converges linearly).
    bool reuse_stages = false;
    // Called with each trace row and the iterate v_n it describes.
    std::function<void(const NashMoserStep&, const FourierField&)> observer;
};

struct SolveStatus {
    bool ok = false;
    ErrorCode code = ErrorCode::nonconvergence;
    std::string stage;
    std::string message;
};

struct NashMoserResult {
    FourierField v_star;
    std::vector<NashMoserStep> trace;
    SolveStatus status;
    std::vector<StageReport> stage_reports;
};

NashMoserResult nash_moser_solve(const EulerProblem& prob, const DiophantineConfig& cfg,
                                 const NashMoserSchedule& sched = {});

struct Reconstruction {
    FourierField u;
    FourierField p;
    double euler_residual = 0;  // ||Gamma + grad p||_{s0}
    double div_v_norm = 0;      // ||div v||_{s0}
    Parity u_parity = Parity::none;
    Parity p_parity = Parity::none;
};

// u = curl (-Delta)^{-1} v, Gamma = omega.d u + zeta.grad u + eps u.grad u - eps f,
// p = (-Delta)^{-1} div Gamma.
Reconstruction reconstruct_velocity_pressure(const FourierField& v, const EulerProblem& prob, double s0 = 2.0);

}  // namespace qpe
