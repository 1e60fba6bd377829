#pragma once

#include <cmath>
#include <random>

#include "qpe/block_operator.hpp"
#include "qpe/field.hpp"

namespace qpe::testing {

inline Mode mode(std::initializer_list<int> l, std::initializer_list<int> j) {
    Mode m;
    int i = 0;
    for (int v : l) m.l[i++] = v;
    i = 0;
    for (int v : j) m.j[i++] = v;
    return m;
}

// max |a - b| / max |b|
inline double rel_diff(const FourierField& a, const FourierField& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.coeffs().size(); ++i) {
        num = std::max(num, std::abs(a.coeffs()[i] - b.coeffs()[i]));
        den = std::max(den, std::abs(b.coeffs()[i]));
    }
    return den > 0 ? num / den : num;
}

inline cplx inner(const FourierField& a, const FourierField& b) {
    cplx s = 0;
    for (std::size_t i = 0; i < a.coeffs().size(); ++i) s += std::conj(a.coeffs()[i]) * b.coeffs()[i];
    return s;
}

// Smooth, xi-even, real 3x3 profile used to give test symbols xi dependence.
inline Mat3 xi_profile(const int* xi, double seed) {
    double r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
    Mat3 m;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            m(a, b) = std::cos(seed + a - 2 * b) * (xi[a] * xi[b] + 1.0 + (a == b)) / (1.0 + r2);
    return m;
}

// Real block operator Op(M(phi,x) P(xi)) with M a random band-limited matrix
// field of the given parity.
inline BlockOperator random_block(const Lattice& lat, double radius, Parity p, std::mt19937_64& rng, double amp = 1.0,
                                  double seed = 0.3) {
    auto M = random_field(lat, 9, radius, p, rng, false);
    M *= amp;
    auto V = symbol_product(MatrixSymbol::from_field(M),
                            MatrixSymbol::from_function(lat, [&](const int* xi) { return xi_profile(xi, seed); }));
    return BlockOperator::from_symbol(V);
}

}  // namespace qpe::testing
