#include "qpe/lattice.hpp"

#include <algorithm>
#include <cmath>

#include "qpe/errors.hpp"

namespace qpe {

Lattice::Lattice(int nu, int L, int K, double grid_factor)
    : nu_(nu), L_(L), K_(K), grid_factor_(grid_factor) {
    require(nu >= 1 && nu <= kMaxNu, "lattice: nu must lie in [1, " + std::to_string(kMaxNu) + "]");
    require(L >= 1 && K >= 1, "lattice: L and K must be >= 1");
    require(L <= 60 && K <= 60, "lattice: truncation too large");
    require(grid_factor >= 1.5, "lattice: grid_factor must be >= 3/2");
    n_time_ = 1;
    for (int d = 0; d < nu; ++d) n_time_ *= static_cast<std::size_t>(2 * L + 1);
    n_space_ = static_cast<std::size_t>(2 * K + 1) * (2 * K + 1) * (2 * K + 1);

    auto tab = std::make_shared<Tables>();
    tab->tcoord.assign(n_time_ * kMaxNu, 0);
    tab->tnorm2.assign(n_time_, 0);
    for (std::size_t t = 0; t < n_time_; ++t) {
        std::size_t r = t;
        int n2 = 0;
        for (int d = nu - 1; d >= 0; --d) {
            int c = static_cast<int>(r % (2 * L + 1)) - L;
            r /= (2 * L + 1);
            tab->tcoord[t * kMaxNu + d] = static_cast<std::int8_t>(c);
            n2 += c * c;
        }
        tab->tnorm2[t] = n2;
    }
    tab->scoord.assign(n_space_ * 3, 0);
    tab->snorm2.assign(n_space_, 0);
    const int w = 2 * K + 1;
    for (std::size_t s = 0; s < n_space_; ++s) {
        int c0 = static_cast<int>(s / (w * w)) - K;
        int c1 = static_cast<int>((s / w) % w) - K;
        int c2 = static_cast<int>(s % w) - K;
        tab->scoord[s * 3 + 0] = static_cast<std::int8_t>(c0);
        tab->scoord[s * 3 + 1] = static_cast<std::int8_t>(c1);
        tab->scoord[s * 3 + 2] = static_cast<std::int8_t>(c2);
        tab->snorm2[s] = c0 * c0 + c1 * c1 + c2 * c2;
    }
    tables_ = tab;
}

std::ptrdiff_t Lattice::time_index(const int* l) const {
    std::ptrdiff_t t = 0;
    for (int d = 0; d < nu_; ++d) {
        if (l[d] < -L_ || l[d] > L_) return -1;
        t = t * (2 * L_ + 1) + (l[d] + L_);
    }
    return t;
}

std::ptrdiff_t Lattice::space_index(const int* j) const {
    std::ptrdiff_t s = 0;
    for (int d = 0; d < 3; ++d) {
        if (j[d] < -K_ || j[d] > K_) return -1;
        s = s * (2 * K_ + 1) + (j[d] + K_);
    }
    return s;
}

std::ptrdiff_t Lattice::index_of(const int* l, const int* j) const {
    auto t = time_index(l);
    auto s = space_index(j);
    if (t < 0 || s < 0) return -1;
    return t * static_cast<std::ptrdiff_t>(n_space_) + s;
}

double Lattice::bracket(std::size_t t, std::size_t s) const {
    double m = std::max(tables_->tnorm2[t], tables_->snorm2[s]);
    return std::max(1.0, std::sqrt(m));
}

int Lattice::grid_time() const { return static_cast<int>(std::ceil(grid_factor_ * (2 * L_ + 1))); }
int Lattice::grid_space() const { return static_cast<int>(std::ceil(grid_factor_ * (2 * K_ + 1))); }

double bracket(const Mode& m, int nu) {
    double l2 = 0, j2 = 0;
    for (int d = 0; d < nu; ++d) l2 += double(m.l[d]) * m.l[d];
    for (int d = 0; d < 3; ++d) j2 += double(m.j[d]) * m.j[d];
    return std::max(1.0, std::sqrt(std::max(l2, j2)));
}

}  // namespace qpe
