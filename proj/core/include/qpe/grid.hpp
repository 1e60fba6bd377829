#pragma once

#include <vector>

#include "qpe/field.hpp"

namespace qpe {

// Physical collocation grid of lattice.grid_time()^nu * lattice.grid_space()^3
// points, transforms by FFTW.
class GridTransform {
public:
    explicit GridTransform(const Lattice& lat);
    ~GridTransform();
    GridTransform(const GridTransform&) = delete;
    GridTransform& operator=(const GridTransform&) = delete;

    std::size_t points() const { return npts_; }
    const std::vector<int>& dims() const { return dims_; }

    // Values of component comp at the grid points.
    std::vector<cplx> to_grid(const FourierField& f, int comp);
    // Projects grid values back onto the lattice into component comp of out.
    void from_grid(const std::vector<cplx>& values, FourierField& out, int comp);

    // Flat grid index -> physical coordinates (phi_1..phi_nu, x_1..x_3).
    void point(std::size_t g, double* coords) const;

private:
    Lattice lat_;
    std::vector<int> dims_;
    std::size_t npts_ = 0;
    void* buf_ = nullptr;
    void* plan_fwd_ = nullptr;
    void* plan_bwd_ = nullptr;
    std::vector<std::size_t> map_;  // lattice point -> grid index
};

// Reuse one transform per thread and lattice in the grid products (default on).
void set_transform_cache(bool on);
bool transform_cache_enabled();

FourierField grid_product_comp(const FourierField& a, int ca, const FourierField& b, int cb);

// Mean of |u|^2 over the grid for component comp (Parseval check).
double grid_mean_square(const FourierField& f, int comp);

}  // namespace qpe
