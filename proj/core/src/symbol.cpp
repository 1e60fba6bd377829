#include "qpe/symbol.hpp"

#include <algorithm>
#include <cmath>

#include "qpe/errors.hpp"

namespace qpe {

namespace {

template <class T>
std::vector<std::pair<const Offset*, double>> offset_maxima(const OffsetTable<T>& t) {
    std::vector<std::pair<const Offset*, double>> out;
    out.reserve(t.n_offsets());
    for (const auto& [o, col] : t.data()) {
        double m = 0;
        for (const auto& v : col) m = std::max(m, detail::magnitude(v));
        out.emplace_back(&o, m);
    }
    return out;
}

// Fiberwise convolution sum_{o1 + o2 = o} a^{o1}[xi] * b^{o2}[xi] with
// negligible pairs skipped.
template <class Ta, class Tb, class Tc, class Mul>
OffsetTable<Tc> fiber_convolve(const OffsetTable<Ta>& a, const OffsetTable<Tb>& b, double prune_rel, Mul mul) {
    require(a.lattice() == b.lattice(), "symbol product: lattice mismatch");
    OffsetTable<Tc> out(a.lattice());
    auto ma = offset_maxima(a);
    auto mb = offset_maxima(b);
    double amax = 0, bmax = 0;
    for (auto& p : ma) amax = std::max(amax, p.second);
    for (auto& p : mb) bmax = std::max(bmax, p.second);
    const double skip = prune_rel * amax * bmax;
    const std::size_t nf = a.n_fibers();
    for (auto& [oa, va] : ma) {
        const auto& ca = *a.find(*oa);
        for (auto& [ob, vb] : mb) {
            if (va * vb <= skip) continue;
            Offset o = *oa + *ob;
            if (!out.in_bounds(o)) continue;
            const auto& cb = *b.find(*ob);
            auto& dst = out.entry(o);
            for (std::size_t s = 0; s < nf; ++s) dst[s] += mul(ca[s], cb[s]);
        }
    }
    out.prune(prune_rel);
    return out;
}

double xi_bracket(const int8_t* xi) { return std::sqrt(1.0 + xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]); }

template <class T>
Parity table_parity(const OffsetTable<T>& t, double rel_tol, bool joint) {
    const Lattice& lat = t.lattice();
    double scale = t.max_abs();
    if (scale == 0) return Parity::even;
    double tol = rel_tol * scale;
    bool even = true, odd = true;
    for (const auto& [o, col] : t.data()) {
        const auto* other = t.find(joint ? -o : o);
        for (std::size_t s = 0; s < col.size() && (even || odd); ++s) {
            std::size_t sn = lat.neg_space(s);
            T w = other ? (*other)[sn] : detail::zero_value<T>();
            if (detail::magnitude(T(col[s] - w)) > tol) even = false;
            if (detail::magnitude(T(col[s] + w)) > tol) odd = false;
        }
        if (!even && !odd) return Parity::none;
    }
    if (even) return Parity::even;
    return odd ? Parity::odd : Parity::none;
}

}  // namespace

MatrixSymbol MatrixSymbol::identity(const Lattice& lat) {
    MatrixSymbol I(lat, 0);
    auto& col = I.t_.entry(Offset{});
    for (auto& v : col) v = Mat3::Identity();
    return I;
}

MatrixSymbol MatrixSymbol::from_field(const FourierField& M) {
    require(M.ncomp() == 9 || M.ncomp() == 1, "symbol from field: need 1 or 9 components");
    const Lattice& lat = M.lattice();
    MatrixSymbol V(lat, 0);
    for (std::size_t i = 0; i < lat.size(); ++i) {
        Mat3 m = Mat3::Zero();
        bool nz = false;
        if (M.ncomp() == 9) {
            for (int c = 0; c < 9; ++c) {
                m(c / 3, c % 3) = M.at(i, c);
                nz = nz || M.at(i, c) != cplx(0.0);
            }
        } else {
            m = M.at(i, 0) * Mat3::Identity();
            nz = M.at(i, 0) != cplx(0.0);
        }
        if (!nz) continue;
        auto& col = V.t_.entry(offset_of(lat, i));
        for (auto& v : col) v = m;
    }
    return V;
}

MatrixSymbol MatrixSymbol::from_function(const Lattice& lat, const std::function<Mat3(const int* xi)>& f, int order) {
    MatrixSymbol V(lat, order);
    auto& col = V.t_.entry(Offset{});
    for (std::size_t s = 0; s < lat.n_space(); ++s) {
        const auto* c = lat.space_coords(s);
        int xi[3] = {c[0], c[1], c[2]};
        col[s] = f(xi);
    }
    return V;
}

FourierField MatrixSymbol::fiber(std::size_t s) const {
    const Lattice& lat = lattice();
    FourierField out(lat, 9);
    for (const auto& [o, col] : t_.data()) {
        auto idx = lat.index_of(o.l.data(), o.d.data());
        if (idx < 0) continue;
        for (int c = 0; c < 9; ++c) out.at(static_cast<std::size_t>(idx), c) = col[s](c / 3, c % 3);
    }
    return out;
}

MatrixSymbol operator+(MatrixSymbol a, const MatrixSymbol& b) { return a += b; }
MatrixSymbol operator-(MatrixSymbol a, const MatrixSymbol& b) { return a -= b; }
MatrixSymbol operator*(cplx s, MatrixSymbol a) { return a *= s; }

ScalarSymbol scalar_symbol_from_field(const FourierField& f) {
    require(f.ncomp() == 1, "scalar symbol: need a scalar field");
    const Lattice& lat = f.lattice();
    ScalarSymbol out(lat);
    for (std::size_t i = 0; i < lat.size(); ++i) {
        if (f.at(i, 0) == cplx(0.0)) continue;
        auto& col = out.entry(offset_of(lat, i));
        std::fill(col.begin(), col.end(), f.at(i, 0));
    }
    return out;
}

ScalarSymbol scalar_product(const ScalarSymbol& a, const ScalarSymbol& b, double prune_rel) {
    return fiber_convolve<cplx, cplx, cplx>(a, b, prune_rel, [](const cplx& x, const cplx& y) { return x * y; });
}

ScalarSymbol exp_symbol(const FourierField& beta, double sign) {
    require(beta.ncomp() == 3, "exp symbol: need a vector field");
    const Lattice& lat = beta.lattice();
    // X = i sign xi . beta
    ScalarSymbol X(lat);
    for (std::size_t i = 0; i < lat.size(); ++i) {
        cplx b[3] = {beta.at(i, 0), beta.at(i, 1), beta.at(i, 2)};
        if (b[0] == 0.0 && b[1] == 0.0 && b[2] == 0.0) continue;
        auto& col = X.entry(offset_of(lat, i));
        for (std::size_t s = 0; s < lat.n_space(); ++s) {
            const auto* xi = lat.space_coords(s);
            col[s] = cplx(0, sign) * (double(xi[0]) * b[0] + double(xi[1]) * b[1] + double(xi[2]) * b[2]);
        }
    }
    ScalarSymbol E(lat);
    std::fill(E.entry(Offset{}).begin(), E.entry(Offset{}).end(), cplx(1.0));
    ScalarSymbol term = E;
    for (int n = 1; n <= 200; ++n) {
        term = scalar_product(term, X, 0.0);
        term.scale(1.0 / n);
        double tm = term.max_abs();
        if (tm <= kOffsetPruneRel) break;
        term.prune(0.1 * kOffsetPruneRel / tm);
        E += term;
        require(n < 200, "exp symbol: series did not converge");
    }
    E.prune(kOffsetPruneRel);
    return E;
}

MatrixSymbol scalar_times(const ScalarSymbol& a, const MatrixSymbol& B, double prune_rel) {
    MatrixSymbol out(B.lattice(), B.order());
    out.table() = fiber_convolve<cplx, Mat3, Mat3>(a, B.table(), prune_rel,
                                                   [](const cplx& x, const Mat3& y) -> Mat3 { return x * y; });
    return out;
}

MatrixSymbol symbol_product(const MatrixSymbol& A, const MatrixSymbol& B, double prune_rel) {
    MatrixSymbol out(A.lattice(), A.order() + B.order());
    out.table() = fiber_convolve<Mat3, Mat3, Mat3>(A.table(), B.table(), prune_rel,
                                                   [](const Mat3& x, const Mat3& y) -> Mat3 { return x * y; });
    return out;
}

double offset_divisor(const ParameterPoint& lambda, const Offset& o) {
    double d = 0;
    for (std::size_t k = 0; k < lambda.omega.size(); ++k) d += lambda.omega[k] * o.l[k];
    for (int k = 0; k < 3; ++k) d += lambda.zeta[k] * o.d[k];
    return d;
}

MatrixSymbol symbol_transport(const MatrixSymbol& V, const ParameterPoint& lambda) {
    MatrixSymbol out = V;
    for (auto& [o, col] : out.table().data()) {
        cplx f(0, offset_divisor(lambda, o));
        for (auto& v : col) v *= f;
    }
    return out;
}

MatrixSymbol symbol_transport_inverse_ext(const MatrixSymbol& V, const ParameterPoint& lambda,
                                          const DiophantineConfig& cfg) {
    MatrixSymbol out(V.lattice(), V.order());
    for (const auto& [o, col] : V.table().data()) {
        if (o.is_zero()) continue;
        cplx f = ext_inverse_factor(offset_divisor(lambda, o), o.bracket(), cfg);
        if (f == cplx(0.0)) continue;
        auto& dst = out.table().entry(o);
        for (std::size_t s = 0; s < col.size(); ++s) dst[s] = f * col[s];
    }
    return out;
}

MatrixSymbol symbol_average(const MatrixSymbol& V) {
    MatrixSymbol out(V.lattice(), V.order());
    if (const auto* c = V.table().find(Offset{})) out.table().entry(Offset{}) = *c;
    return out;
}

MatrixSymbol symbol_project(const MatrixSymbol& V, double N, bool complement) {
    MatrixSymbol out(V.lattice(), V.order());
    for (const auto& [o, col] : V.table().data())
        if ((o.bracket() <= N) != complement) out.table().data().emplace(o, col);
    return out;
}

double symbol_norm(const MatrixSymbol& V, double s) {
    require(s >= 0, "symbol norm: s must be >= 0");
    const Lattice& lat = V.lattice();
    std::vector<double> acc(lat.n_space(), 0.0);
    for (const auto& [o, col] : V.table().data()) {
        double w = std::pow(o.bracket(), 2 * s);
        for (std::size_t k = 0; k < col.size(); ++k) acc[k] += w * col[k].squaredNorm();
    }
    double best = 0;
    for (std::size_t k = 0; k < acc.size(); ++k)
        best = std::max(best, std::sqrt(acc[k]) * std::pow(xi_bracket(lat.space_coords(k)), -V.order()));
    return best;
}

double symbol_mean_norm(const MatrixSymbol& V) {
    const auto* c = V.table().find(Offset{});
    if (!c) return 0;
    double m = 0;
    for (const auto& v : *c) m = std::max(m, v.norm());
    return m;
}

Parity symbol_joint_parity(const MatrixSymbol& V, double rel_tol) { return table_parity(V.table(), rel_tol, true); }

Parity symbol_xi_parity(const MatrixSymbol& V, double rel_tol) { return table_parity(V.table(), rel_tol, false); }

bool symbol_is_real(const MatrixSymbol& V, double rel_tol) {
    const auto& t = V.table();
    const Lattice& lat = V.lattice();
    double tol = rel_tol * t.max_abs();
    for (const auto& [o, col] : t.data()) {
        const auto* other = t.find(-o);
        for (std::size_t s = 0; s < col.size(); ++s) {
            Mat3 w = other ? Mat3((*other)[lat.neg_space(s)].conjugate()) : Mat3::Zero();
            if ((col[s] - w).cwiseAbs().maxCoeff() > tol) return false;
        }
    }
    return true;
}

MatrixSymbol symbol_neumann_inverse(const MatrixSymbol& Psi, double s0, const NeumannOptions& opt) {
    double n0 = symbol_norm(Psi, s0);
    if (n0 > opt.margin)
        fail(ErrorCode::precondition, "symbol Neumann inverse: |Psi|_s0 = " + std::to_string(n0) + " exceeds margin " +
                                          std::to_string(opt.margin));
    MatrixSymbol sum = MatrixSymbol::identity(Psi.lattice());
    MatrixSymbol minus = Psi;
    minus *= -1.0;
    minus.set_order(0);
    MatrixSymbol term = sum;
    for (int n = 1; n < opt.max_terms; ++n) {
        term = symbol_product(term, minus);
        if (symbol_norm(term, s0) < opt.term_tol) break;
        sum += term;
    }
    return sum;
}

}  // namespace qpe
