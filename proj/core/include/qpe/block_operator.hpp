#pragma once

#include <functional>

#include "qpe/symbol.hpp"

namespace qpe {

// Matrix representation R^(l)_j^{j'} of a linear operator on 3-vector fields
// over the lattice box, banded by offset (l, j - j'). Entry (o, j') stores
// R^(l)_{j'+dj}^{j'}; rows j'+dj outside the box are kept at zero. The time
// direction is Toeplitz: the operator acts as multiplication in phi.
class BlockOperator {
public:
    BlockOperator() = default;
    explicit BlockOperator(const Lattice& lat) : t_(lat) {}

    const Lattice& lattice() const { return t_.lattice(); }
    OffsetTable<Mat3>& table() { return t_; }
    const OffsetTable<Mat3>& table() const { return t_; }
    bool empty() const { return t_.empty(); }

    static BlockOperator identity(const Lattice& lat);
    // Op(V) restricted to the box.
    static BlockOperator from_symbol(const MatrixSymbol& V);
    // Multiplication by a 9-component matrix field or a scalar field.
    static BlockOperator multiplication(const FourierField& M);
    // Op(a) Id for a scalar symbol.
    static BlockOperator from_scalar_symbol(const ScalarSymbol& a);
    // Fourier multiplier j -> f(j) acting blockwise.
    static BlockOperator fourier_multiplier(const Lattice& lat, const std::function<Mat3(const int* j)>& f);

    MatrixSymbol to_symbol() const;

    BlockOperator& operator+=(const BlockOperator& o) {
        t_ += o.t_;
        return *this;
    }
    BlockOperator& operator-=(const BlockOperator& o) {
        t_ -= o.t_;
        return *this;
    }
    BlockOperator& operator*=(cplx a) {
        t_.scale(a);
        return *this;
    }

    // Zeroes the entries whose row lies outside the box.
    void mask_rows();

private:
    OffsetTable<Mat3> t_;
};

BlockOperator operator+(BlockOperator a, const BlockOperator& b);
BlockOperator operator-(BlockOperator a, const BlockOperator& b);
BlockOperator operator*(cplx s, BlockOperator a);

// A B on the box: intermediate and output frequencies outside the box are cut.
BlockOperator compose(const BlockOperator& A, const BlockOperator& B, double prune_rel = kOffsetPruneRel);
// R h for a 3-component field; output truncated to the lattice.
FourierField apply(const BlockOperator& R, const FourierField& h);
// Op(a) h, componentwise, for a scalar symbol and any field.
FourierField apply_scalar(const ScalarSymbol& a, const FourierField& h);
// L2 adjoint: (R*)^(l)_j^{j'} = (R^(-l)_{j'}^{j})^H.
BlockOperator adjoint(const BlockOperator& R);

// sup_{j'} (sum <l, j - j'>^{2s} ||R^(l)_j^{j'}||_HS^2)^{1/2} <j'>^M, <j> = (1 + |j|^2)^{1/2}.
double decay_norm(const BlockOperator& R, double s, double M = 0);
// Largest entry magnitude.
inline double max_entry(const BlockOperator& R) { return R.table().max_abs(); }

// Keeps offsets with <l, j - j'> <= N, or the rest.
BlockOperator block_project(const BlockOperator& R, double N, bool complement = false);
// The (phi-independent, j-diagonal) part: offset (0, 0).
BlockOperator block_diagonal(const BlockOperator& R);
// Blocks (R^(0))_j^j as a per-space-index array.
DiagonalBlocks diagonal_blocks(const BlockOperator& R);
BlockOperator from_diagonal_blocks(const Lattice& lat, const DiagonalBlocks& Q);

enum class Subspace { all, zero, perp };
// Pi_rows R Pi_cols with Pi in {Id, Pi_0 (j = 0), Pi_0^perp (j != 0)}.
BlockOperator restrict_block(const BlockOperator& R, Subspace rows, Subspace cols);

// [omega.d_phi + zeta.grad, R]: entries times i (omega.l + zeta.dj).
BlockOperator commutator_transport(const BlockOperator& R, const ParameterPoint& lambda);
// Entrywise solution X of [omega.d_phi + zeta.grad, X] = R with the cutoff
// inverse; offset (0, 0) dropped.
BlockOperator transport_inverse_ext(const BlockOperator& R, const ParameterPoint& lambda, const DiophantineConfig& cfg);

bool block_is_real(const BlockOperator& R, double rel_tol = 1e-10);
// R^(l)_j^{j'} = -R^(-l)_{-j}^{-j'}.
bool block_is_reversible(const BlockOperator& R, double rel_tol = 1e-10);
// R^(l)_j^{j'} = R^(-l)_{-j}^{-j'}.
bool block_is_reversibility_preserving(const BlockOperator& R, double rel_tol = 1e-10);
// Relative defects; sign -1 tests reversibility, +1 reversibility preservation.
double block_reality_defect(const BlockOperator& R);
double block_reversibility_defect(const BlockOperator& R, int sign);

// (Id + Psi)^{-1} by Neumann series; requires |Psi|_{s0} <= margin.
BlockOperator block_neumann_inverse(const BlockOperator& Psi, double s0, const NeumannOptions& opt = {});
// g = (Id + Psi)^{-1} h on a field by the same series.
FourierField apply_neumann_inverse(const BlockOperator& Psi, const FourierField& h, const NeumannOptions& opt = {});

// (omega.d_phi + zeta.grad) h, exact mode-wise.
FourierField apply_transport(const FourierField& h, const ParameterPoint& lambda);

}  // namespace qpe
