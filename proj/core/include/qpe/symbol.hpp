#pragma once

#include <functional>

#include "qpe/field.hpp"
#include "qpe/offset_table.hpp"
#include "qpe/small_divisors.hpp"

namespace qpe {

// Offsets whose entries fall below this fraction of the largest entry are
// dropped after symbol and operator products.
constexpr double kOffsetPruneRel = 1e-17;

// omega.l + zeta.dj
double offset_divisor(const ParameterPoint& lambda, const Offset& o);

// Lattice-fibered 3x3 matrix symbol V(phi, x, xi), xi in the space box.
// Coefficient at offset (l, dj) and fiber xi is the (l, dj) Fourier
// coefficient of V(., ., xi).
class MatrixSymbol {
public:
    MatrixSymbol() = default;
    explicit MatrixSymbol(const Lattice& lat, int order = 0) : t_(lat), order_(order) {}

    const Lattice& lattice() const { return t_.lattice(); }
    OffsetTable<Mat3>& table() { return t_; }
    const OffsetTable<Mat3>& table() const { return t_; }
    int order() const { return order_; }
    void set_order(int m) { order_ = m; }

    static MatrixSymbol identity(const Lattice& lat);
    // xi-independent symbol from a 9-component (or scalar, times Id) field.
    static MatrixSymbol from_field(const FourierField& M);
    // (phi, x)-independent symbol xi -> f(xi).
    static MatrixSymbol from_function(const Lattice& lat, const std::function<Mat3(const int* xi)>& f, int order = 0);

    // Coefficients of V(., ., xi) inside the field box as a 9-component field.
    FourierField fiber(std::size_t s) const;

    MatrixSymbol& operator+=(const MatrixSymbol& o) {
        t_ += o.t_;
        return *this;
    }
    MatrixSymbol& operator-=(const MatrixSymbol& o) {
        t_ -= o.t_;
        return *this;
    }
    MatrixSymbol& operator*=(cplx a) {
        t_.scale(a);
        return *this;
    }

private:
    OffsetTable<Mat3> t_;
    int order_ = 0;
};

MatrixSymbol operator+(MatrixSymbol a, const MatrixSymbol& b);
MatrixSymbol operator-(MatrixSymbol a, const MatrixSymbol& b);
MatrixSymbol operator*(cplx s, MatrixSymbol a);

using ScalarSymbol = OffsetTable<cplx>;

ScalarSymbol scalar_symbol_from_field(const FourierField& f);
ScalarSymbol scalar_product(const ScalarSymbol& a, const ScalarSymbol& b, double prune_rel = kOffsetPruneRel);
// e^{i xi . beta(phi, x)} by its power series in each fiber.
ScalarSymbol exp_symbol(const FourierField& beta, double sign = 1.0);
MatrixSymbol scalar_times(const ScalarSymbol& a, const MatrixSymbol& B, double prune_rel = kOffsetPruneRel);

// Fiberwise pointwise product A(phi,x,xi) B(phi,x,xi).
MatrixSymbol symbol_product(const MatrixSymbol& A, const MatrixSymbol& B, double prune_rel = kOffsetPruneRel);

// (omega.d_phi + zeta.grad) acting on the (phi, x) dependence.
MatrixSymbol symbol_transport(const MatrixSymbol& V, const ParameterPoint& lambda);
// Cutoff-extended inverse of the above, offset (0,0) dropped.
MatrixSymbol symbol_transport_inverse_ext(const MatrixSymbol& V, const ParameterPoint& lambda,
                                          const DiophantineConfig& cfg);
// (phi, x)-average: the (0,0) offset.
MatrixSymbol symbol_average(const MatrixSymbol& V);
// Keeps offsets with <l, dj> <= N, or the rest.
MatrixSymbol symbol_project(const MatrixSymbol& V, double N, bool complement = false);

// sup_xi ||V(., ., xi)||_s <xi>^{-m}, <xi> = (1 + |xi|^2)^{1/2}.
double symbol_norm(const MatrixSymbol& V, double s);
// max_xi ||<V>(xi)||_HS.
double symbol_mean_norm(const MatrixSymbol& V);

// Joint reflection: V(-phi,-x,-xi) = +-V(phi,x,xi).
Parity symbol_joint_parity(const MatrixSymbol& V, double rel_tol = 1e-10);
// xi reflection alone: V(phi,x,-xi) = +-V(phi,x,xi).
Parity symbol_xi_parity(const MatrixSymbol& V, double rel_tol = 1e-10);
// Op(V) maps real vector fields to real vector fields.
bool symbol_is_real(const MatrixSymbol& V, double rel_tol = 1e-10);

struct NeumannOptions {
    double term_tol = 1e-14;
    int max_terms = 60;
    double margin = 0.3;
};

// (Id + Psi)^{-1} by Neumann series; requires |Psi|_{s0} <= margin.
MatrixSymbol symbol_neumann_inverse(const MatrixSymbol& Psi, double s0, const NeumannOptions& opt = {});

}  // namespace qpe
