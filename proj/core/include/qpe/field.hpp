#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "qpe/lattice.hpp"

namespace qpe {

// Parity in the pair (phi, x): even means u(-phi,-x) = u(phi,x).
enum class Parity : std::uint8_t { none = 0, even = 1, odd = 2 };

Parity flip(Parity p);
Parity combine_product(Parity a, Parity b);
const char* to_string(Parity p);

// Truncated Fourier coefficients u^(l, j) of a function on T^nu x T^3 with
// ncomp components (1 scalar, 3 vector, 9 row-major 3x3 matrix).
class FourierField {
public:
    FourierField() = default;
    FourierField(const Lattice& lat, int ncomp, Parity parity = Parity::none);

    const Lattice& lattice() const { return lat_; }
    int ncomp() const { return ncomp_; }
    Parity parity() const { return parity_; }
    void set_parity(Parity p) { parity_ = p; }
    bool empty() const { return c_.empty(); }

    cplx& at(std::size_t idx, int comp) { return c_[idx * ncomp_ + comp]; }
    const cplx& at(std::size_t idx, int comp) const { return c_[idx * ncomp_ + comp]; }
    // Throws if (l, j) is outside the box.
    cplx& at(const Mode& m, int comp);
    cplx at(const Mode& m, int comp) const;

    std::vector<cplx>& coeffs() { return c_; }
    const std::vector<cplx>& coeffs() const { return c_; }

    FourierField component(int comp) const;
    void set_component(int comp, const FourierField& f);

    FourierField& operator+=(const FourierField& o);
    FourierField& operator-=(const FourierField& o);
    FourierField& operator*=(cplx a);
    FourierField& axpy(cplx a, const FourierField& x);

    double max_abs() const;
    std::size_t nnz(double rel_tol = 0.0) const;
    bool same_shape(const FourierField& o) const { return lat_ == o.lat_ && ncomp_ == o.ncomp_; }

private:
    Lattice lat_;
    int ncomp_ = 0;
    Parity parity_ = Parity::none;
    std::vector<cplx> c_;
};

FourierField operator+(FourierField a, const FourierField& b);
FourierField operator-(FourierField a, const FourierField& b);
FourierField operator*(cplx s, FourierField a);
FourierField operator-(FourierField a);

// ---- norms and projectors ----

double sobolev_norm(const FourierField& f, double s);
double sup_norm_bound(const FourierField& f);  // sum of |coefficients|, bounds the sup norm

// Keeps modes with <l,j> <= N (or the rest when complement is set).
FourierField smoothing_projector(const FourierField& f, double N, bool complement = false);
// Space average (function of phi only) and its complement.
FourierField pi0(const FourierField& f);
FourierField pi0_perp(const FourierField& f);
// (phi, x) average per component.
std::vector<cplx> mean(const FourierField& f);
bool has_zero_space_mean(const FourierField& f, double rel_tol = 1e-14);
// Zeroes entries below rel * max|coefficient|.
void prune(FourierField& f, double rel);

// ---- multipliers ----

struct FourierMultiplier {
    std::string name;
    // Scalar symbol of (l, j) acting on every component.
    std::function<cplx(const int* l, const int* j)> symbol;

    static FourierMultiplier lambda();          // |j|^2, 1 at j = 0
    static FourierMultiplier lambda_inv();      // 1/|j|^2, 1 at j = 0
    static FourierMultiplier neg_laplacian_inv();  // 1/|j|^2, 0 at j = 0
    static FourierMultiplier neg_laplacian();   // |j|^2
    static FourierMultiplier pi0();
    static FourierMultiplier pi0_perp();
    static FourierMultiplier bracket_D(double M);  // (1 + |j|^2)^(M/2)
};

FourierField apply_multiplier(const FourierMultiplier& m, const FourierField& f);
// symbol(-xi) == conj(symbol(xi)) on the lattice.
bool multiplier_preserves_reality(const FourierMultiplier& m, const Lattice& lat);
// Parity effect: +1 keeps parity, -1 flips it, 0 breaks it.
int multiplier_parity_action(const FourierMultiplier& m, const Lattice& lat);

// ---- vector calculus (exact mode-wise) ----

FourierField partial_x(const FourierField& f, int axis);
FourierField omega_dphi(const FourierField& f, const std::vector<double>& omega);
// (omega . d_phi + m . grad) applied componentwise.
FourierField transport_const(const FourierField& f, const std::vector<double>& omega,
                             const std::vector<double>& m);
FourierField curl(const FourierField& v);
FourierField div(const FourierField& v);
FourierField grad(const FourierField& f);
// (D v)_{ik} = d_k v_i, 9 components row-major.
FourierField jacobian(const FourierField& v);
// U(v) = curl(Lambda^{-1} v).
FourierField biot_savart(const FourierField& v);
// Removes the gradient part mode-wise (j != 0).
FourierField leray_project(const FourierField& v);

// ---- products ----

enum class ProductMode { automatic, sparse, grid };

// Entries below this fraction of the largest coefficient are skipped by the
// sparse convolution; they sit far below double roundoff.
constexpr double kSparseDropRel = 1e-20;

// Pointwise product truncated back to the lattice. Shapes: scalar*scalar,
// scalar*vector (broadcast) or equal ncomp (componentwise).
FourierField multiply(const FourierField& a, const FourierField& b,
                      ProductMode mode = ProductMode::automatic);
// Componentwise product of component ca of a with component cb of b.
FourierField multiply_comp(const FourierField& a, int ca, const FourierField& b, int cb,
                           ProductMode mode = ProductMode::automatic);
// sum_i a_i b_i for 3-vector fields.
FourierField dot(const FourierField& a, const FourierField& b, ProductMode mode = ProductMode::automatic);
// a . grad h, h scalar or vector.
FourierField dir_deriv(const FourierField& a, const FourierField& h,
                       ProductMode mode = ProductMode::automatic);
// (M h)_i = sum_k M_ik h_k for a 9-component matrix field M.
FourierField matvec(const FourierField& M, const FourierField& h,
                    ProductMode mode = ProductMode::automatic);

// ---- parity / reality ----

bool is_real(const FourierField& f, double rel_tol = 1e-12);
// Classifies at relative tolerance and updates the metadata.
Parity parity_check(FourierField& f, double rel_tol = 1e-12);
Parity classify_parity(const FourierField& f, double rel_tol = 1e-12);
// Symmetrizes onto the real field with the given parity.
void enforce_symmetry(FourierField& f, Parity p);

// ---- construction helpers ----

// Real field with the requested parity, random coefficients on modes with
// <l,j> <= radius; unit-scale entries.
FourierField random_field(const Lattice& lat, int ncomp, double radius, Parity p, std::mt19937_64& rng,
                          bool zero_space_mean = true, bool div_free = false);

// Real field sum_k amp_k * sin(l_k.phi + j_k.x) (odd) or cos (even).
struct TrigMode {
    Mode mode;
    std::vector<double> amp;  // ncomp entries
};
FourierField trig_field(const Lattice& lat, int ncomp, const std::vector<TrigMode>& modes, bool sine);

}  // namespace qpe
