#include "qpe/field.hpp"

#include <algorithm>
#include <cmath>

#include "qpe/errors.hpp"
#include "qpe/grid.hpp"

namespace qpe {

Parity flip(Parity p) {
    if (p == Parity::even) return Parity::odd;
    if (p == Parity::odd) return Parity::even;
    return Parity::none;
}

Parity combine_product(Parity a, Parity b) {
    if (a == Parity::none || b == Parity::none) return Parity::none;
    return a == b ? Parity::even : Parity::odd;
}

const char* to_string(Parity p) {
    switch (p) {
        case Parity::even: return "even";
        case Parity::odd: return "odd";
        default: return "none";
    }
}

static Parity combine_sum(Parity a, Parity b) { return a == b ? a : Parity::none; }

FourierField::FourierField(const Lattice& lat, int ncomp, Parity parity)
    : lat_(lat), ncomp_(ncomp), parity_(parity), c_(lat.size() * static_cast<std::size_t>(ncomp)) {
    require(ncomp >= 1, "field: ncomp must be positive");
}

cplx& FourierField::at(const Mode& m, int comp) {
    auto idx = lat_.index_of(m.l.data(), m.j.data());
    require(idx >= 0, "field: mode outside lattice");
    return at(static_cast<std::size_t>(idx), comp);
}

cplx FourierField::at(const Mode& m, int comp) const {
    auto idx = lat_.index_of(m.l.data(), m.j.data());
    if (idx < 0) return 0.0;
    return at(static_cast<std::size_t>(idx), comp);
}

FourierField FourierField::component(int comp) const {
    FourierField out(lat_, 1, parity_);
    for (std::size_t i = 0; i < lat_.size(); ++i) out.at(i, 0) = at(i, comp);
    return out;
}

void FourierField::set_component(int comp, const FourierField& f) {
    require(f.lattice() == lat_ && f.ncomp() == 1, "field: set_component shape mismatch");
    for (std::size_t i = 0; i < lat_.size(); ++i) at(i, comp) = f.at(i, 0);
}

FourierField& FourierField::operator+=(const FourierField& o) {
    require(same_shape(o), "field: shape mismatch in +=");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    parity_ = combine_sum(parity_, o.parity_);
    return *this;
}

FourierField& FourierField::operator-=(const FourierField& o) {
    require(same_shape(o), "field: shape mismatch in -=");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    parity_ = combine_sum(parity_, o.parity_);
    return *this;
}

FourierField& FourierField::operator*=(cplx a) {
    for (auto& v : c_) v *= a;
    if (a.imag() != 0.0) parity_ = Parity::none;
    return *this;
}

FourierField& FourierField::axpy(cplx a, const FourierField& x) {
    require(same_shape(x), "field: shape mismatch in axpy");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += a * x.c_[i];
    parity_ = (a.imag() == 0.0) ? combine_sum(parity_, x.parity_) : Parity::none;
    return *this;
}

double FourierField::max_abs() const {
    double m = 0;
    for (const auto& v : c_) m = std::max(m, std::abs(v));
    return m;
}

std::size_t FourierField::nnz(double rel_tol) const {
    double thr = rel_tol * max_abs();
    std::size_t n = 0;
    for (const auto& v : c_)
        if (std::abs(v) > thr && v != 0.0) ++n;
    return n;
}

FourierField operator+(FourierField a, const FourierField& b) { return a += b; }
FourierField operator-(FourierField a, const FourierField& b) { return a -= b; }
FourierField operator*(cplx s, FourierField a) { return a *= s; }
FourierField operator-(FourierField a) {
    for (auto& v : a.coeffs()) v = -v;
    return a;
}

// ---------------------------------------------------------------------------

double sobolev_norm(const FourierField& f, double s) {
    require(s >= 0.0, "sobolev_norm: negative s");
    const auto& lat = f.lattice();
    double acc = 0;
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        double w = 0;
        for (int c = 0; c < f.ncomp(); ++c) w += std::norm(f.at(idx, c));
        if (w == 0.0) continue;
        acc += std::pow(lat.bracket_idx(idx), 2 * s) * w;
    }
    return std::sqrt(acc);
}

double sup_norm_bound(const FourierField& f) {
    double acc = 0;
    for (const auto& v : f.coeffs()) acc += std::abs(v);
    return acc;
}

FourierField smoothing_projector(const FourierField& f, double N, bool complement) {
    require(N > 0, "smoothing_projector: N must be positive");
    FourierField out(f.lattice(), f.ncomp(), f.parity());
    const auto& lat = f.lattice();
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        bool keep = lat.bracket_idx(idx) <= N;
        if (keep != complement)
            for (int c = 0; c < f.ncomp(); ++c) out.at(idx, c) = f.at(idx, c);
    }
    return out;
}

FourierField pi0(const FourierField& f) {
    FourierField out(f.lattice(), f.ncomp(), f.parity());
    const auto& lat = f.lattice();
    const std::size_t s0 = lat.space_zero();
    for (std::size_t t = 0; t < lat.n_time(); ++t)
        for (int c = 0; c < f.ncomp(); ++c) out.at(lat.index(t, s0), c) = f.at(lat.index(t, s0), c);
    return out;
}

FourierField pi0_perp(const FourierField& f) {
    FourierField out = f;
    const auto& lat = f.lattice();
    const std::size_t s0 = lat.space_zero();
    for (std::size_t t = 0; t < lat.n_time(); ++t)
        for (int c = 0; c < f.ncomp(); ++c) out.at(lat.index(t, s0), c) = 0.0;
    return out;
}

std::vector<cplx> mean(const FourierField& f) {
    std::vector<cplx> m(f.ncomp());
    const std::size_t i0 = f.lattice().index(f.lattice().time_zero(), f.lattice().space_zero());
    for (int c = 0; c < f.ncomp(); ++c) m[c] = f.at(i0, c);
    return m;
}

bool has_zero_space_mean(const FourierField& f, double rel_tol) {
    const auto& lat = f.lattice();
    double thr = rel_tol * std::max(f.max_abs(), 1e-300);
    for (std::size_t t = 0; t < lat.n_time(); ++t)
        for (int c = 0; c < f.ncomp(); ++c)
            if (std::abs(f.at(lat.index(t, lat.space_zero()), c)) > thr) return false;
    return true;
}

void prune(FourierField& f, double rel) {
    double thr = rel * f.max_abs();
    for (auto& v : f.coeffs())
        if (std::abs(v) <= thr) v = 0.0;
}

// ---------------------------------------------------------------------------

static int norm2(const int* j) { return j[0] * j[0] + j[1] * j[1] + j[2] * j[2]; }

FourierMultiplier FourierMultiplier::lambda() {
    return {"Lambda", [](const int*, const int* j) -> cplx {
                int n = norm2(j);
                return n == 0 ? 1.0 : double(n);
            }};
}
FourierMultiplier FourierMultiplier::lambda_inv() {
    return {"Lambda_inv", [](const int*, const int* j) -> cplx {
                int n = norm2(j);
                return n == 0 ? 1.0 : 1.0 / n;
            }};
}
FourierMultiplier FourierMultiplier::neg_laplacian_inv() {
    return {"neg_laplacian_inv", [](const int*, const int* j) -> cplx {
                int n = norm2(j);
                return n == 0 ? 0.0 : 1.0 / n;
            }};
}
FourierMultiplier FourierMultiplier::neg_laplacian() {
    return {"neg_laplacian", [](const int*, const int* j) -> cplx { return double(norm2(j)); }};
}
FourierMultiplier FourierMultiplier::pi0() {
    return {"Pi0", [](const int*, const int* j) -> cplx { return norm2(j) == 0 ? 1.0 : 0.0; }};
}
FourierMultiplier FourierMultiplier::pi0_perp() {
    return {"Pi0_perp", [](const int*, const int* j) -> cplx { return norm2(j) == 0 ? 0.0 : 1.0; }};
}
FourierMultiplier FourierMultiplier::bracket_D(double M) {
    return {"bracket_D", [M](const int*, const int* j) -> cplx { return std::pow(1.0 + norm2(j), 0.5 * M); }};
}

namespace {
struct Coords {
    int l[kMaxNu];
    int j[3];
};
inline Coords coords_of(const Lattice& lat, std::size_t idx) {
    Coords c{};
    const auto* lc = lat.time_coords(lat.time_of(idx));
    const auto* jc = lat.space_coords(lat.space_of(idx));
    for (int d = 0; d < lat.nu(); ++d) c.l[d] = lc[d];
    for (int d = 0; d < 3; ++d) c.j[d] = jc[d];
    return c;
}
}  // namespace

int multiplier_parity_action(const FourierMultiplier& m, const Lattice& lat) {
    bool even = true, odd = true;
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        Coords c = coords_of(lat, idx), n = coords_of(lat, lat.neg(idx));
        cplx a = m.symbol(c.l, c.j), b = m.symbol(n.l, n.j);
        double sc = std::max({std::abs(a), std::abs(b), 1e-300});
        if (std::abs(a - b) > 1e-14 * sc) even = false;
        if (std::abs(a + b) > 1e-14 * sc) odd = false;
    }
    return even ? 1 : (odd ? -1 : 0);
}

bool multiplier_preserves_reality(const FourierMultiplier& m, const Lattice& lat) {
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        Coords c = coords_of(lat, idx), n = coords_of(lat, lat.neg(idx));
        cplx a = m.symbol(c.l, c.j), b = m.symbol(n.l, n.j);
        double sc = std::max({std::abs(a), std::abs(b), 1e-300});
        if (std::abs(b - std::conj(a)) > 1e-14 * sc) return false;
    }
    return true;
}

FourierField apply_multiplier(const FourierMultiplier& m, const FourierField& f) {
    const auto& lat = f.lattice();
    FourierField out(lat, f.ncomp(), Parity::none);
    bool keeps = true, flips = true;
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        Coords c = coords_of(lat, idx);
        cplx sym = m.symbol(c.l, c.j);
        if (idx < lat.size() / 2 + 1) {
            Coords n = coords_of(lat, lat.neg(idx));
            cplx sn = m.symbol(n.l, n.j);
            double sc = std::max({std::abs(sym), std::abs(sn), 1e-300});
            if (std::abs(sym - sn) > 1e-14 * sc) keeps = false;
            if (std::abs(sym + sn) > 1e-14 * sc) flips = false;
        }
        for (int k = 0; k < f.ncomp(); ++k) out.at(idx, k) = sym * f.at(idx, k);
    }
    if (keeps) out.set_parity(f.parity());
    else if (flips) out.set_parity(flip(f.parity()));
    return out;
}

// ---------------------------------------------------------------------------

FourierField partial_x(const FourierField& f, int axis) {
    const auto& lat = f.lattice();
    FourierField out(lat, f.ncomp(), flip(f.parity()));
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        double jk = lat.space_coords(lat.space_of(idx))[axis];
        if (jk == 0.0) continue;
        for (int c = 0; c < f.ncomp(); ++c) out.at(idx, c) = cplx(0, jk) * f.at(idx, c);
    }
    return out;
}

FourierField omega_dphi(const FourierField& f, const std::vector<double>& omega) {
    const auto& lat = f.lattice();
    require(static_cast<int>(omega.size()) == lat.nu(), "omega_dphi: omega size mismatch");
    FourierField out(lat, f.ncomp(), flip(f.parity()));
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        const auto* lc = lat.time_coords(lat.time_of(idx));
        double d = 0;
        for (int k = 0; k < lat.nu(); ++k) d += omega[k] * lc[k];
        if (d == 0.0) continue;
        for (int c = 0; c < f.ncomp(); ++c) out.at(idx, c) = cplx(0, d) * f.at(idx, c);
    }
    return out;
}

FourierField transport_const(const FourierField& f, const std::vector<double>& omega, const std::vector<double>& m) {
    const auto& lat = f.lattice();
    require(static_cast<int>(omega.size()) == lat.nu() && m.size() == 3, "transport_const: size mismatch");
    FourierField out(lat, f.ncomp(), flip(f.parity()));
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        const auto* lc = lat.time_coords(lat.time_of(idx));
        const auto* jc = lat.space_coords(lat.space_of(idx));
        double d = 0;
        for (int k = 0; k < lat.nu(); ++k) d += omega[k] * lc[k];
        for (int k = 0; k < 3; ++k) d += m[k] * jc[k];
        if (d == 0.0) continue;
        for (int c = 0; c < f.ncomp(); ++c) out.at(idx, c) = cplx(0, d) * f.at(idx, c);
    }
    return out;
}

FourierField curl(const FourierField& v) {
    require(v.ncomp() == 3, "curl: vector field required");
    const auto& lat = v.lattice();
    FourierField out(lat, 3, flip(v.parity()));
    const cplx I(0, 1);
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        const auto* j = lat.space_coords(lat.space_of(idx));
        cplx a = v.at(idx, 0), b = v.at(idx, 1), c = v.at(idx, 2);
        out.at(idx, 0) = I * (double(j[1]) * c - double(j[2]) * b);
        out.at(idx, 1) = I * (double(j[2]) * a - double(j[0]) * c);
        out.at(idx, 2) = I * (double(j[0]) * b - double(j[1]) * a);
    }
    return out;
}

FourierField div(const FourierField& v) {
    require(v.ncomp() == 3, "div: vector field required");
    const auto& lat = v.lattice();
    FourierField out(lat, 1, flip(v.parity()));
    const cplx I(0, 1);
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        const auto* j = lat.space_coords(lat.space_of(idx));
        out.at(idx, 0) = I * (double(j[0]) * v.at(idx, 0) + double(j[1]) * v.at(idx, 1) + double(j[2]) * v.at(idx, 2));
    }
    return out;
}

FourierField grad(const FourierField& f) {
    require(f.ncomp() == 1, "grad: scalar field required");
    const auto& lat = f.lattice();
    FourierField out(lat, 3, flip(f.parity()));
    const cplx I(0, 1);
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        const auto* j = lat.space_coords(lat.space_of(idx));
        for (int k = 0; k < 3; ++k) out.at(idx, k) = I * double(j[k]) * f.at(idx, 0);
    }
    return out;
}

FourierField jacobian(const FourierField& v) {
    require(v.ncomp() == 3, "jacobian: vector field required");
    const auto& lat = v.lattice();
    FourierField out(lat, 9, flip(v.parity()));
    const cplx I(0, 1);
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        const auto* j = lat.space_coords(lat.space_of(idx));
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) out.at(idx, 3 * i + k) = I * double(j[k]) * v.at(idx, i);
    }
    return out;
}

FourierField biot_savart(const FourierField& v) { return curl(apply_multiplier(FourierMultiplier::lambda_inv(), v)); }

FourierField leray_project(const FourierField& v) {
    require(v.ncomp() == 3, "leray_project: vector field required");
    const auto& lat = v.lattice();
    FourierField out = v;
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        const auto* j = lat.space_coords(lat.space_of(idx));
        int n = lat.space_norm2(lat.space_of(idx));
        if (n == 0) continue;
        cplx jv = double(j[0]) * v.at(idx, 0) + double(j[1]) * v.at(idx, 1) + double(j[2]) * v.at(idx, 2);
        for (int k = 0; k < 3; ++k) out.at(idx, k) -= double(j[k]) * jv / double(n);
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct SparseList {
    std::vector<std::size_t> idx;
    std::vector<std::int8_t> coord;  // dims per entry
    std::vector<cplx> val;
};

SparseList gather(const FourierField& f, int comp) {
    const auto& lat = f.lattice();
    const int nd = lat.nu() + 3;
    double mx = 0;
    for (std::size_t i = 0; i < lat.size(); ++i) mx = std::max(mx, std::abs(f.at(i, comp)));
    double thr = kSparseDropRel * mx;
    SparseList out;
    for (std::size_t i = 0; i < lat.size(); ++i) {
        cplx v = f.at(i, comp);
        if (v == 0.0 || std::abs(v) <= thr) continue;
        out.idx.push_back(i);
        out.val.push_back(v);
        const auto* lc = lat.time_coords(lat.time_of(i));
        const auto* jc = lat.space_coords(lat.space_of(i));
        for (int d = 0; d < lat.nu(); ++d) out.coord.push_back(lc[d]);
        for (int d = 0; d < 3; ++d) out.coord.push_back(jc[d]);
    }
    (void)nd;
    return out;
}

void sparse_accumulate(const SparseList& A, const SparseList& B, const Lattice& lat, FourierField& out, int oc) {
    const int nu = lat.nu();
    const int nd = nu + 3;
    const std::size_t center = (lat.size() - 1) / 2;
    int bound[kMaxNu + 3];
    for (int d = 0; d < nd; ++d) bound[d] = d < nu ? lat.L() : lat.K();
    const std::size_t na = A.val.size(), nb = B.val.size();
    for (std::size_t a = 0; a < na; ++a) {
        const std::int8_t* ca = &A.coord[a * nd];
        const cplx va = A.val[a];
        const std::size_t ia = A.idx[a];
        for (std::size_t b = 0; b < nb; ++b) {
            const std::int8_t* cb = &B.coord[b * nd];
            bool ok = true;
            for (int d = 0; d < nd; ++d) {
                int c = ca[d] + cb[d];
                if (c > bound[d] || c < -bound[d]) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            out.at(ia + B.idx[b] - center, oc) += va * B.val[b];
        }
    }
}

bool prefer_sparse(std::size_t na, std::size_t nb, const Lattice& lat) {
    double g = double(std::pow(double(lat.grid_time()), lat.nu())) * std::pow(double(lat.grid_space()), 3);
    double grid_cost = 40.0 * g * std::log2(std::max(g, 2.0));
    return double(na) * double(nb) <= grid_cost;
}

void product_into(const FourierField& a, int ca, const FourierField& b, int cb, FourierField& out, int oc,
                  ProductMode mode) {
    if (mode != ProductMode::grid) {
        SparseList A = gather(a, ca);
        SparseList B = gather(b, cb);
        if (mode == ProductMode::sparse || prefer_sparse(A.val.size(), B.val.size(), a.lattice())) {
            sparse_accumulate(A, B, a.lattice(), out, oc);
            return;
        }
    }
    FourierField g = grid_product_comp(a, ca, b, cb);
    for (std::size_t i = 0; i < a.lattice().size(); ++i) out.at(i, oc) += g.at(i, 0);
}

}  // namespace

FourierField multiply_comp(const FourierField& a, int ca, const FourierField& b, int cb, ProductMode mode) {
    require(a.lattice() == b.lattice(), "multiply: lattice mismatch");
    FourierField out(a.lattice(), 1, combine_product(a.parity(), b.parity()));
    product_into(a, ca, b, cb, out, 0, mode);
    return out;
}

FourierField multiply(const FourierField& a, const FourierField& b, ProductMode mode) {
    require(a.lattice() == b.lattice(), "multiply: lattice mismatch");
    Parity p = combine_product(a.parity(), b.parity());
    if (a.ncomp() == 1 && b.ncomp() >= 1) {
        FourierField out(a.lattice(), b.ncomp(), p);
        for (int c = 0; c < b.ncomp(); ++c) product_into(a, 0, b, c, out, c, mode);
        return out;
    }
    if (b.ncomp() == 1) {
        FourierField out(a.lattice(), a.ncomp(), p);
        for (int c = 0; c < a.ncomp(); ++c) product_into(a, c, b, 0, out, c, mode);
        return out;
    }
    require(a.ncomp() == b.ncomp(), "multiply: incompatible component counts");
    FourierField out(a.lattice(), a.ncomp(), p);
    for (int c = 0; c < a.ncomp(); ++c) product_into(a, c, b, c, out, c, mode);
    return out;
}

FourierField dot(const FourierField& a, const FourierField& b, ProductMode mode) {
    require(a.ncomp() == 3 && b.ncomp() == 3, "dot: vector fields required");
    FourierField out(a.lattice(), 1, combine_product(a.parity(), b.parity()));
    for (int c = 0; c < 3; ++c) product_into(a, c, b, c, out, 0, mode);
    return out;
}

FourierField dir_deriv(const FourierField& a, const FourierField& h, ProductMode mode) {
    require(a.ncomp() == 3, "dir_deriv: vector coefficient required");
    FourierField out(h.lattice(), h.ncomp(), combine_product(a.parity(), flip(h.parity())));
    for (int i = 0; i < 3; ++i) {
        FourierField dh = partial_x(h, i);
        for (int c = 0; c < h.ncomp(); ++c) product_into(a, i, dh, c, out, c, mode);
    }
    return out;
}

FourierField matvec(const FourierField& M, const FourierField& h, ProductMode mode) {
    require(M.ncomp() == 9 && h.ncomp() == 3, "matvec: 3x3 matrix field and vector field required");
    FourierField out(h.lattice(), 3, combine_product(M.parity(), h.parity()));
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) product_into(M, 3 * i + k, h, k, out, i, mode);
    return out;
}

// ---------------------------------------------------------------------------

bool is_real(const FourierField& f, double rel_tol) {
    const auto& lat = f.lattice();
    double thr = rel_tol * std::max(f.max_abs(), 1e-300);
    for (std::size_t idx = 0; idx < lat.size(); ++idx)
        for (int c = 0; c < f.ncomp(); ++c)
            if (std::abs(f.at(lat.neg(idx), c) - std::conj(f.at(idx, c))) > thr) return false;
    return true;
}

Parity classify_parity(const FourierField& f, double rel_tol) {
    const auto& lat = f.lattice();
    double thr = rel_tol * std::max(f.max_abs(), 1e-300);
    bool even = true, odd = true;
    for (std::size_t idx = 0; idx < lat.size() && (even || odd); ++idx)
        for (int c = 0; c < f.ncomp(); ++c) {
            cplx a = f.at(idx, c), b = f.at(lat.neg(idx), c);
            if (std::abs(a - b) > thr) even = false;
            if (std::abs(a + b) > thr) odd = false;
        }
    if (even && odd) return Parity::even;  // zero field
    return even ? Parity::even : (odd ? Parity::odd : Parity::none);
}

Parity parity_check(FourierField& f, double rel_tol) {
    Parity p = classify_parity(f, rel_tol);
    f.set_parity(p);
    return p;
}

void enforce_symmetry(FourierField& f, Parity p) {
    const auto& lat = f.lattice();
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        std::size_t n = lat.neg(idx);
        if (n < idx) continue;
        for (int c = 0; c < f.ncomp(); ++c) {
            cplx a = f.at(idx, c), b = f.at(n, c);
            // reality: b = conj(a)
            cplx r = 0.5 * (a + std::conj(b));
            if (p == Parity::even) r = cplx(r.real(), 0.0);
            if (p == Parity::odd) r = cplx(0.0, r.imag());
            f.at(idx, c) = r;
            f.at(n, c) = std::conj(r);
        }
    }
    f.set_parity(p);
}

FourierField random_field(const Lattice& lat, int ncomp, double radius, Parity p, std::mt19937_64& rng,
                          bool zero_space_mean, bool div_free) {
    std::normal_distribution<double> g(0.0, 1.0);
    FourierField f(lat, ncomp, p);
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        std::size_t n = lat.neg(idx);
        if (n < idx) continue;
        if (lat.bracket_idx(idx) > radius) continue;
        if (zero_space_mean && lat.space_of(idx) == lat.space_zero()) continue;
        for (int c = 0; c < ncomp; ++c) {
            double re = g(rng), im = g(rng);
            cplx r(re, im);
            if (p == Parity::even) r = cplx(re, 0.0);
            if (p == Parity::odd) r = cplx(0.0, im);
            if (n == idx) r = cplx(r.real(), 0.0);  // only the origin is self-conjugate
            f.at(idx, c) = r;
            f.at(n, c) = std::conj(r);
        }
    }
    if (p == Parity::odd) {
        std::size_t i0 = lat.index(lat.time_zero(), lat.space_zero());
        for (int c = 0; c < ncomp; ++c) f.at(i0, c) = 0.0;
    }
    if (div_free && ncomp == 3) {
        f = leray_project(f);
        f.set_parity(p);
    }
    return f;
}

FourierField trig_field(const Lattice& lat, int ncomp, const std::vector<TrigMode>& modes, bool sine) {
    FourierField f(lat, ncomp, sine ? Parity::odd : Parity::even);
    for (const auto& m : modes) {
        require(static_cast<int>(m.amp.size()) == ncomp, "trig_field: amplitude size mismatch");
        Mode neg;
        for (int d = 0; d < kMaxNu; ++d) neg.l[d] = -m.mode.l[d];
        for (int d = 0; d < 3; ++d) neg.j[d] = -m.mode.j[d];
        for (int c = 0; c < ncomp; ++c) {
            if (sine) {
                f.at(m.mode, c) += cplx(0, -0.5 * m.amp[c]);
                f.at(neg, c) += cplx(0, 0.5 * m.amp[c]);
            } else {
                f.at(m.mode, c) += 0.5 * m.amp[c];
                f.at(neg, c) += 0.5 * m.amp[c];
            }
        }
    }
    return f;
}

}  // namespace qpe
