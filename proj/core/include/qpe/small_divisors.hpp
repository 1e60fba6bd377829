#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qpe/field.hpp"

namespace qpe {

// lambda = (omega, zeta).
struct ParameterPoint {
    std::vector<double> omega;
    std::array<double, 3> zeta{};

    double divisor(const int* l, const int* j) const;                            // omega.l + zeta.j
    double divisor(const int* l, const int* j, const std::array<double, 3>& m) const;  // omega.l + m.j
};

// Built-in badly approximable family: square roots of primes, scaled into [1, 2].
ParameterPoint golden_parameter(int nu);

struct DiophantineConfig {
    double gamma = 0.01;
    double tau = 10.0;
    double c0 = 2.0;
    int k0 = 0;

    double tau0() const { return k0 + tau * (k0 + 1); }
    void validate() const;

    // tau = 2(nu + 3), k0 = 0.
    static DiophantineConfig practical(int nu, double gamma);
    // tau = 9 max{nu, 3} + 1, k0 = 11.
    static DiophantineConfig paper(int nu, double gamma);
};

// Smooth even cutoff: 0 on [-1/3, 1/3], 1 for |t| >= 2/3.
double chi(double t);

// 1/(i d) damped by chi(d gamma^-1 <l,j>^tau); 0 when the cutoff vanishes.
cplx ext_inverse_factor(double d, double bracket, const DiophantineConfig& cfg);

struct DivisorFailure {
    bool pass = true;
    // Smallest value of (divisor * weight) / threshold seen; < 1 means failure.
    double worst_ratio = 0;
    std::array<int, kMaxNu> l{};
    std::array<int, 3> j{};
    std::array<int, 3> jp{};
    std::string describe(int nu) const;
};

// |omega.l + zeta.j| >= c0 gamma / <l,j>^tau for all nonzero lattice (l, j).
DivisorFailure diophantine_check(const ParameterPoint& lambda, const DiophantineConfig& cfg, const Lattice& lat);

// (omega.d_phi + m.grad)^{-1}_ext applied componentwise. The (0,0) mode must
// vanish (|coefficient| <= 1e-14) unless drop_mean is set.
FourierField transport_inverse_ext(const FourierField& u, const std::array<double, 3>& m,
                                   const ParameterPoint& lambda, const DiophantineConfig& cfg,
                                   bool drop_mean = false);

// Blocks indexed by lattice space index; entries at j = 0 are ignored.
using DiagonalBlocks = std::vector<Mat3>;

// The 9x9 matrix of X -> i d X + Qj X - X Qjp in column-major vec form.
Eigen::Matrix<cplx, 9, 9> homological_matrix(double d, const Mat3& Qj, const Mat3& Qjp);
double smallest_singular_value(const Eigen::Matrix<cplx, 9, 9>& A);

// Second Melnikov conditions for |l|, |j - j'| <= N (Euclidean), j, j' != 0,
// (l, j, j') != (0, j, j): sigma_min(L(l,j,j')) >= gamma / (<l>^tau |j|^tau |j'|^tau).
DivisorFailure melnikov2_check(const ParameterPoint& lambda, const DiagonalBlocks& Q, const DiophantineConfig& cfg,
                               const Lattice& lat, double N);

// First Melnikov conditions: ||(i omega.l + N_j)^{-1}|| <= <l>^tau |j|^tau / (2 gamma).
DivisorFailure melnikov1_check(const ParameterPoint& lambda, const DiagonalBlocks& Ninf, const DiophantineConfig& cfg,
                               const Lattice& lat);

// N_j = i zeta.j Id + Q_j.
DiagonalBlocks normal_form_blocks(const ParameterPoint& lambda, const DiagonalBlocks& Q, const Lattice& lat);

// ---- measure estimates ----

enum class Predicate { diophantine, melnikov1, melnikov2, full };
Predicate parse_predicate(const std::string& name);
const char* to_string(Predicate p);

struct ParameterBox {
    std::vector<double> lo, hi;  // length nu + 3
};

struct MeasureRow {
    double gamma;
    std::size_t samples;
    std::size_t excluded;
    double fraction, ci_low, ci_high;
};

// Wilson score interval at 95%.
std::array<double, 2> binomial_ci(std::size_t k, std::size_t n);

// Largest gamma at which lambda still passes the predicate (every condition
// is of the form gamma <= value). Q == empty means Q = 0.
double critical_gamma(const ParameterPoint& lambda, Predicate pred, const DiophantineConfig& cfg, const Lattice& lat,
                      const DiagonalBlocks& Q = {});

std::vector<MeasureRow> measure_scan(const ParameterBox& box, const std::vector<double>& gamma_list,
                                     std::size_t samples, Predicate pred, const DiophantineConfig& cfg,
                                     const Lattice& lat, std::uint64_t seed, const DiagonalBlocks& Q = {});

// ---- sublevel probe ----

struct ProbeResult {
    double fraction = 0;       // sampled sublevel fraction of the segment
    double threshold = 0;      // C |k|^{d-1} / eta
    double predicted_scale = 0;  // (|k| eta)^{-1/d}
};

// A(s) = s|k| Id_d + Q(s) along the segment lambda = s k/|k|, s in [-s_half, s_half];
// measures the fraction where |det A| < C |k|^{d-1} / eta.
ProbeResult resonant_sublevel_probe(const std::vector<int>& k, const std::function<Eigen::MatrixXcd(double)>& Q,
                                    double eta, int d, std::size_t samples, double C = 1.0, double s_half = 1.0);

// Exact sublevel fraction for Q = diag(q) constant, from the real roots of
// |prod(s|k| + q_i)|^2 - T^2.
double sublevel_fraction_diagonal(double knorm, const std::vector<cplx>& q, double T, double s_half);

}  // namespace qpe
