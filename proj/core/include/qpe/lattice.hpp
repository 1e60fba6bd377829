#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace qpe {

using cplx = std::complex<double>;
using Mat3 = Eigen::Matrix3cd;
using Vec3 = Eigen::Vector3cd;

constexpr int kMaxNu = 4;

// Truncated frequency box {(l, j) : |l|_inf <= L, |j|_inf <= K} in Z^nu x Z^3.
// Linear index = t * n_space + s with t, s lexicographic (first coordinate
// most significant), so (l, j) -> (-l, -j) maps index i to size - 1 - i.
class Lattice {
public:
    Lattice() : Lattice(2, 4, 4) {}
    Lattice(int nu, int L, int K, double grid_factor = 2.0);

    int nu() const { return nu_; }
    int L() const { return L_; }
    int K() const { return K_; }
    double grid_factor() const { return grid_factor_; }

    std::size_t n_time() const { return n_time_; }
    std::size_t n_space() const { return n_space_; }
    std::size_t size() const { return n_time_ * n_space_; }

    std::size_t index(std::size_t t, std::size_t s) const { return t * n_space_ + s; }
    std::size_t time_of(std::size_t idx) const { return idx / n_space_; }
    std::size_t space_of(std::size_t idx) const { return idx % n_space_; }

    // -1 when the point lies outside the box.
    std::ptrdiff_t time_index(const int* l) const;
    std::ptrdiff_t space_index(const int* j) const;
    std::ptrdiff_t index_of(const int* l, const int* j) const;

    const std::int8_t* time_coords(std::size_t t) const { return &tables_->tcoord[t * kMaxNu]; }
    const std::int8_t* space_coords(std::size_t s) const { return &tables_->scoord[s * 3]; }
    int time_norm2(std::size_t t) const { return tables_->tnorm2[t]; }
    int space_norm2(std::size_t s) const { return tables_->snorm2[s]; }

    std::size_t time_zero() const { return (n_time_ - 1) / 2; }
    std::size_t space_zero() const { return (n_space_ - 1) / 2; }
    std::size_t neg_time(std::size_t t) const { return n_time_ - 1 - t; }
    std::size_t neg_space(std::size_t s) const { return n_space_ - 1 - s; }
    std::size_t neg(std::size_t idx) const { return size() - 1 - idx; }

    // <l, j> = max{1, |l|, |j|}, Euclidean norms.
    double bracket(std::size_t t, std::size_t s) const;
    double bracket_idx(std::size_t idx) const { return bracket(time_of(idx), space_of(idx)); }

    // Grid points per axis used by physical-space products.
    int grid_time() const;
    int grid_space() const;

    bool operator==(const Lattice& o) const { return nu_ == o.nu_ && L_ == o.L_ && K_ == o.K_; }
    bool operator!=(const Lattice& o) const { return !(*this == o); }

private:
    struct Tables {
        std::vector<std::int8_t> tcoord;
        std::vector<std::int8_t> scoord;
        std::vector<int> tnorm2;
        std::vector<int> snorm2;
    };
    int nu_, L_, K_;
    double grid_factor_;
    std::size_t n_time_, n_space_;
    std::shared_ptr<const Tables> tables_;
};

// Two frequency vectors used as a "mode" label.
struct Mode {
    std::array<int, kMaxNu> l{};
    std::array<int, 3> j{};
};

double bracket(const Mode& m, int nu);

}  // namespace qpe
