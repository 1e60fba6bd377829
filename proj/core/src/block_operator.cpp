#include "qpe/block_operator.hpp"

#include <algorithm>
#include <cmath>

#include "qpe/errors.hpp"

namespace qpe {

namespace {

// Column range of the box such that j + shift stays in the box for every
// listed shift; calls body(s) with s the linear space index of j.
template <class F>
void for_columns(const Lattice& lat, std::initializer_list<const std::array<int, 3>*> shifts, F&& body) {
    const int K = lat.K();
    const int w = 2 * K + 1;
    int lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
        lo[a] = -K;
        hi[a] = K;
        for (const auto* d : shifts) {
            lo[a] = std::max(lo[a], -K - (*d)[a]);
            hi[a] = std::min(hi[a], K - (*d)[a]);
        }
        if (lo[a] > hi[a]) return;
    }
    for (int a = lo[0]; a <= hi[0]; ++a)
        for (int b = lo[1]; b <= hi[1]; ++b) {
            std::size_t base = static_cast<std::size_t>((a + K) * w * w + (b + K) * w + K);
            for (int c = lo[2]; c <= hi[2]; ++c) body(base + c);
        }
}

std::ptrdiff_t space_shift(const Lattice& lat, const std::array<int, 3>& d) {
    std::ptrdiff_t w = 2 * lat.K() + 1;
    return d[0] * w * w + d[1] * w + d[2];
}

std::vector<std::pair<const Offset*, double>> column_maxima(const OffsetTable<Mat3>& t) {
    std::vector<std::pair<const Offset*, double>> out;
    for (const auto& [o, col] : t.data()) {
        double m = 0;
        for (const auto& v : col) m = std::max(m, detail::magnitude(v));
        out.emplace_back(&o, m);
    }
    return out;
}

bool column_in_subspace(const Lattice& lat, std::ptrdiff_t s, Subspace p) {
    if (p == Subspace::all) return true;
    bool zero = s == static_cast<std::ptrdiff_t>(lat.space_zero());
    return p == Subspace::zero ? zero : !zero;
}

}  // namespace

BlockOperator BlockOperator::identity(const Lattice& lat) {
    BlockOperator I(lat);
    for (auto& v : I.t_.entry(Offset{})) v = Mat3::Identity();
    return I;
}

void BlockOperator::mask_rows() {
    const Lattice& lat = lattice();
    for (auto& [o, col] : t_.data()) {
        std::vector<char> keep(col.size(), 0);
        for_columns(lat, {&o.d}, [&](std::size_t s) { keep[s] = 1; });
        for (std::size_t s = 0; s < col.size(); ++s)
            if (!keep[s]) col[s].setZero();
    }
    for (auto it = t_.data().begin(); it != t_.data().end();) {
        if (!t_.in_bounds(it->first))
            it = t_.data().erase(it);
        else
            ++it;
    }
}

BlockOperator BlockOperator::from_symbol(const MatrixSymbol& V) {
    BlockOperator R(V.lattice());
    R.t_ = V.table();
    R.mask_rows();
    return R;
}

BlockOperator BlockOperator::from_scalar_symbol(const ScalarSymbol& a) {
    BlockOperator R(a.lattice());
    for (const auto& [o, col] : a.data()) {
        auto& dst = R.t_.entry(o);
        for (std::size_t s = 0; s < col.size(); ++s) dst[s] = col[s] * Mat3::Identity();
    }
    R.mask_rows();
    return R;
}

BlockOperator BlockOperator::multiplication(const FourierField& M) { return from_symbol(MatrixSymbol::from_field(M)); }

BlockOperator BlockOperator::fourier_multiplier(const Lattice& lat, const std::function<Mat3(const int* j)>& f) {
    return from_symbol(MatrixSymbol::from_function(lat, f));
}

MatrixSymbol BlockOperator::to_symbol() const {
    MatrixSymbol V(lattice(), 0);
    V.table() = t_;
    return V;
}

BlockOperator operator+(BlockOperator a, const BlockOperator& b) { return a += b; }
BlockOperator operator-(BlockOperator a, const BlockOperator& b) { return a -= b; }
BlockOperator operator*(cplx s, BlockOperator a) { return a *= s; }

BlockOperator compose(const BlockOperator& A, const BlockOperator& B, double prune_rel) {
    require(A.lattice() == B.lattice(), "compose: lattice mismatch");
    const Lattice& lat = A.lattice();
    BlockOperator out(lat);
    auto& T = out.table();
    auto ma = column_maxima(A.table());
    auto mb = column_maxima(B.table());
    double amax = 0, bmax = 0;
    for (auto& p : ma) amax = std::max(amax, p.second);
    for (auto& p : mb) bmax = std::max(bmax, p.second);
    const double skip = prune_rel * amax * bmax;
    for (auto& [ob, vb] : mb) {
        const auto& cb = *B.table().find(*ob);
        const std::ptrdiff_t sh = space_shift(lat, ob->d);
        for (auto& [oa, va] : ma) {
            if (va * vb <= skip) continue;
            Offset o = *oa + *ob;
            if (!T.in_bounds(o)) continue;
            const auto& ca = *A.table().find(*oa);
            auto& dst = T.entry(o);
            for_columns(lat, {&ob->d, &o.d}, [&](std::size_t s) { dst[s].noalias() += ca[s + sh] * cb[s]; });
        }
    }
    T.prune(prune_rel);
    return out;
}

FourierField apply(const BlockOperator& R, const FourierField& h) {
    require(h.ncomp() == 3, "block apply: need a 3-component field");
    require(h.lattice() == R.lattice(), "block apply: lattice mismatch");
    const Lattice& lat = h.lattice();
    const std::size_t nt = lat.n_time();
    FourierField out(lat, 3);
    for (const auto& [o, col] : R.table().data()) {
        const std::ptrdiff_t sh = space_shift(lat, o.d);
        for (std::size_t t = 0; t < nt; ++t) {
            const auto* lc = lat.time_coords(t);
            int l2[kMaxNu] = {};
            for (int k = 0; k < lat.nu(); ++k) l2[k] = lc[k] + o.l[k];
            auto t2 = lat.time_index(l2);
            if (t2 < 0) continue;
            const cplx* src = &h.at(lat.index(t, 0), 0);
            cplx* dst = &out.at(lat.index(static_cast<std::size_t>(t2), 0), 0);
            for_columns(lat, {&o.d}, [&](std::size_t s) {
                const cplx* x = src + 3 * s;
                if (x[0] == 0.0 && x[1] == 0.0 && x[2] == 0.0) return;
                Eigen::Map<const Vec3> xv(x);
                Eigen::Map<Vec3> yv(dst + 3 * (s + sh));
                yv.noalias() += col[s] * xv;
            });
        }
    }
    return out;
}

FourierField apply_scalar(const ScalarSymbol& a, const FourierField& h) {
    require(h.lattice() == a.lattice(), "scalar symbol apply: lattice mismatch");
    const Lattice& lat = h.lattice();
    const int nc = h.ncomp();
    FourierField out(lat, nc);
    for (const auto& [o, col] : a.data()) {
        if (!a.in_bounds(o)) continue;
        const std::ptrdiff_t sh = space_shift(lat, o.d);
        for (std::size_t t = 0; t < lat.n_time(); ++t) {
            const auto* lc = lat.time_coords(t);
            int l2[kMaxNu] = {};
            for (int k = 0; k < lat.nu(); ++k) l2[k] = lc[k] + o.l[k];
            auto t2 = lat.time_index(l2);
            if (t2 < 0) continue;
            const cplx* src = &h.at(lat.index(t, 0), 0);
            cplx* dst = &out.at(lat.index(static_cast<std::size_t>(t2), 0), 0);
            for_columns(lat, {&o.d}, [&](std::size_t s) {
                const cplx c = col[s];
                for (int q = 0; q < nc; ++q) dst[nc * (s + sh) + q] += c * src[nc * s + q];
            });
        }
    }
    return out;
}

BlockOperator adjoint(const BlockOperator& R) {
    const Lattice& lat = R.lattice();
    BlockOperator out(lat);
    for (const auto& [o, col] : R.table().data()) {
        // entry (o, j') of R feeds entry (-o, j' + dj) of R*
        Offset no = -o;
        auto& dst = out.table().entry(no);
        const std::ptrdiff_t sh = space_shift(lat, o.d);
        for_columns(lat, {&o.d}, [&](std::size_t s) { dst[s + sh] = col[s].adjoint(); });
    }
    return out;
}

double decay_norm(const BlockOperator& R, double s, double M) {
    require(s >= 0, "decay norm: s must be >= 0");
    const Lattice& lat = R.lattice();
    std::vector<double> acc(lat.n_space(), 0.0);
    for (const auto& [o, col] : R.table().data()) {
        double w = std::pow(o.bracket(), 2 * s);
        for (std::size_t k = 0; k < col.size(); ++k) acc[k] += w * col[k].squaredNorm();
    }
    double best = 0;
    for (std::size_t k = 0; k < acc.size(); ++k) {
        double jw = M == 0 ? 1.0 : std::pow(1.0 + lat.space_norm2(k), 0.5 * M);
        best = std::max(best, std::sqrt(acc[k]) * jw);
    }
    return best;
}

BlockOperator block_project(const BlockOperator& R, double N, bool complement) {
    BlockOperator out(R.lattice());
    for (const auto& [o, col] : R.table().data())
        if ((o.bracket() <= N) != complement) out.table().data().emplace(o, col);
    return out;
}

BlockOperator block_diagonal(const BlockOperator& R) {
    BlockOperator out(R.lattice());
    if (const auto* c = R.table().find(Offset{})) out.table().entry(Offset{}) = *c;
    return out;
}

DiagonalBlocks diagonal_blocks(const BlockOperator& R) {
    DiagonalBlocks Q(R.lattice().n_space(), Mat3::Zero());
    if (const auto* c = R.table().find(Offset{})) Q = *c;
    return Q;
}

BlockOperator from_diagonal_blocks(const Lattice& lat, const DiagonalBlocks& Q) {
    require(Q.size() == lat.n_space(), "diagonal blocks: size mismatch");
    BlockOperator out(lat);
    out.table().entry(Offset{}) = Q;
    return out;
}

BlockOperator restrict_block(const BlockOperator& R, Subspace rows, Subspace cols) {
    const Lattice& lat = R.lattice();
    BlockOperator out(lat);
    for (const auto& [o, col] : R.table().data()) {
        const std::ptrdiff_t sh = space_shift(lat, o.d);
        auto c2 = col;
        bool any = false;
        for (std::size_t s = 0; s < c2.size(); ++s) {
            if (!column_in_subspace(lat, static_cast<std::ptrdiff_t>(s), cols) ||
                !column_in_subspace(lat, static_cast<std::ptrdiff_t>(s) + sh, rows))
                c2[s].setZero();
            else if (!any && c2[s] != Mat3::Zero())
                any = true;
        }
        if (any) out.table().data().emplace(o, std::move(c2));
    }
    return out;
}

BlockOperator commutator_transport(const BlockOperator& R, const ParameterPoint& lambda) {
    BlockOperator out = R;
    for (auto& [o, col] : out.table().data()) {
        cplx f(0, offset_divisor(lambda, o));
        for (auto& v : col) v *= f;
    }
    return out;
}

BlockOperator transport_inverse_ext(const BlockOperator& R, const ParameterPoint& lambda, const DiophantineConfig& cfg) {
    BlockOperator out(R.lattice());
    for (const auto& [o, col] : R.table().data()) {
        if (o.is_zero()) continue;
        cplx f = ext_inverse_factor(offset_divisor(lambda, o), o.bracket(), cfg);
        if (f == cplx(0.0)) continue;
        auto& dst = out.table().entry(o);
        for (std::size_t s = 0; s < col.size(); ++s) dst[s] = f * col[s];
    }
    return out;
}

static double symmetry_defect(const BlockOperator& R, int sign, bool conj) {
    const Lattice& lat = R.lattice();
    const auto& t = R.table();
    double scale = t.max_abs();
    if (scale == 0) return 0;
    double worst = 0;
    for (const auto& [o, col] : t.data()) {
        const auto* other = t.find(-o);
        for (std::size_t s = 0; s < col.size(); ++s) {
            Mat3 w = other ? (*other)[lat.neg_space(s)] : Mat3::Zero();
            if (conj) w = w.conjugate().eval();
            worst = std::max(worst, (col[s] - double(sign) * w).cwiseAbs().maxCoeff());
        }
    }
    return worst / scale;
}

double block_reality_defect(const BlockOperator& R) { return symmetry_defect(R, 1, true); }
double block_reversibility_defect(const BlockOperator& R, int sign) { return symmetry_defect(R, sign, false); }

bool block_is_real(const BlockOperator& R, double rel_tol) { return block_reality_defect(R) <= rel_tol; }
bool block_is_reversible(const BlockOperator& R, double rel_tol) {
    return block_reversibility_defect(R, -1) <= rel_tol;
}
bool block_is_reversibility_preserving(const BlockOperator& R, double rel_tol) {
    return block_reversibility_defect(R, 1) <= rel_tol;
}

BlockOperator block_neumann_inverse(const BlockOperator& Psi, double s0, const NeumannOptions& opt) {
    double n0 = decay_norm(Psi, s0);
    if (n0 > opt.margin)
        fail(ErrorCode::precondition, "block Neumann inverse: |Psi|_s0 = " + std::to_string(n0) + " exceeds margin " +
                                          std::to_string(opt.margin));
    const Lattice& lat = Psi.lattice();
    BlockOperator sum = BlockOperator::identity(lat);
    BlockOperator minus = Psi;
    minus *= -1.0;
    BlockOperator term = sum;
    for (int n = 1; n < opt.max_terms; ++n) {
        term = compose(term, minus);
        if (decay_norm(term, s0) < opt.term_tol) break;
        sum += term;
    }
    return sum;
}

FourierField apply_neumann_inverse(const BlockOperator& Psi, const FourierField& h, const NeumannOptions& opt) {
    FourierField sum = h;
    FourierField term = h;
    double h0 = std::max(sobolev_norm(h, 0), 1e-300);
    for (int n = 1; n < opt.max_terms; ++n) {
        term = apply(Psi, term);
        term *= -1.0;
        sum += term;
        if (sobolev_norm(term, 0) < opt.term_tol * h0) break;
    }
    return sum;
}

FourierField apply_transport(const FourierField& h, const ParameterPoint& lambda) {
    return transport_const(h, lambda.omega, std::vector<double>(lambda.zeta.begin(), lambda.zeta.end()));
}

}  // namespace qpe
