#pragma once

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "qpe/lattice.hpp"

namespace qpe {

// Frequency offset (l, dj) of a symbol coefficient or an operator band.
struct Offset {
    std::array<int, kMaxNu> l{};
    std::array<int, 3> d{};

    bool operator<(const Offset& o) const { return l != o.l ? l < o.l : d < o.d; }
    bool operator==(const Offset& o) const { return l == o.l && d == o.d; }
    bool operator!=(const Offset& o) const { return !(*this == o); }
    Offset operator+(const Offset& o) const {
        Offset r;
        for (int k = 0; k < kMaxNu; ++k) r.l[k] = l[k] + o.l[k];
        for (int k = 0; k < 3; ++k) r.d[k] = d[k] + o.d[k];
        return r;
    }
    Offset operator-() const {
        Offset r;
        for (int k = 0; k < kMaxNu; ++k) r.l[k] = -l[k];
        for (int k = 0; k < 3; ++k) r.d[k] = -d[k];
        return r;
    }
    bool is_zero() const { return *this == Offset{}; }
    bool time_zero() const { return l == std::array<int, kMaxNu>{}; }
    double l_norm() const {
        double s = 0;
        for (int v : l) s += double(v) * v;
        return std::sqrt(s);
    }
    double d_norm() const { return std::sqrt(double(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])); }
    // <l, dj> = max{1, |l|, |dj|}
    double bracket() const { return std::max({1.0, l_norm(), d_norm()}); }
};

inline Offset offset_of(const Lattice& lat, std::size_t field_idx) {
    Offset o;
    const auto* lc = lat.time_coords(lat.time_of(field_idx));
    const auto* jc = lat.space_coords(lat.space_of(field_idx));
    for (int k = 0; k < lat.nu(); ++k) o.l[k] = lc[k];
    for (int k = 0; k < 3; ++k) o.d[k] = jc[k];
    return o;
}

namespace detail {
template <class T>
inline T zero_value();
template <>
inline cplx zero_value<cplx>() {
    return 0.0;
}
template <>
inline Mat3 zero_value<Mat3>() {
    return Mat3::Zero();
}
inline double magnitude(const cplx& v) { return std::abs(v); }
inline double magnitude(const Mat3& v) { return v.cwiseAbs().maxCoeff(); }
inline double hs2(const cplx& v) { return std::norm(v); }
inline double hs2(const Mat3& v) { return v.squaredNorm(); }
}  // namespace detail

// Map (l, dj) -> per-fiber array over the space box (fiber = column index j').
// Offsets are kept within |l|_inf <= 2L, |dj|_inf <= 2K, which covers every
// band that can connect two lattice points.
template <class T>
class OffsetTable {
public:
    using Column = std::vector<T>;
    using Map = std::map<Offset, Column>;

    OffsetTable() = default;
    explicit OffsetTable(const Lattice& lat) : lat_(lat) {}

    const Lattice& lattice() const { return lat_; }
    std::size_t n_fibers() const { return lat_.n_space(); }
    std::size_t n_offsets() const { return map_.size(); }
    Map& data() { return map_; }
    const Map& data() const { return map_; }
    bool empty() const { return map_.empty(); }

    bool in_bounds(const Offset& o) const {
        for (int k = 0; k < lat_.nu(); ++k)
            if (std::abs(o.l[k]) > 2 * lat_.L()) return false;
        for (int k = lat_.nu(); k < kMaxNu; ++k)
            if (o.l[k] != 0) return false;
        for (int k = 0; k < 3; ++k)
            if (std::abs(o.d[k]) > 2 * lat_.K()) return false;
        return true;
    }

    Column& entry(const Offset& o) {
        auto it = map_.find(o);
        if (it == map_.end()) it = map_.emplace(o, Column(n_fibers(), detail::zero_value<T>())).first;
        return it->second;
    }
    const Column* find(const Offset& o) const {
        auto it = map_.find(o);
        return it == map_.end() ? nullptr : &it->second;
    }

    OffsetTable& add_scaled(const OffsetTable& o, cplx a) {
        for (const auto& [k, col] : o.map_) {
            auto& dst = entry(k);
            for (std::size_t s = 0; s < col.size(); ++s) dst[s] += a * col[s];
        }
        return *this;
    }
    OffsetTable& operator+=(const OffsetTable& o) { return add_scaled(o, 1.0); }
    OffsetTable& operator-=(const OffsetTable& o) { return add_scaled(o, -1.0); }
    OffsetTable& scale(cplx a) {
        for (auto& [k, col] : map_)
            for (auto& v : col) v *= a;
        return *this;
    }

    double max_abs() const {
        double m = 0;
        for (const auto& [k, col] : map_)
            for (const auto& v : col) m = std::max(m, detail::magnitude(v));
        return m;
    }

    // Drops offsets whose entries all sit below rel * max_abs().
    void prune(double rel) {
        double thr = rel * max_abs();
        for (auto it = map_.begin(); it != map_.end();) {
            double m = 0;
            for (const auto& v : it->second) m = std::max(m, detail::magnitude(v));
            if (m <= thr)
                it = map_.erase(it);
            else
                ++it;
        }
    }

private:
    Lattice lat_;
    Map map_;
};

}  // namespace qpe
