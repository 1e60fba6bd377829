#include "qpe/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <atomic>
#include <complex>
#include <cstring>
#include <memory>
#include <mutex>

#include "qpe/errors.hpp"

namespace qpe {

namespace {
// FFTW planning is not thread safe.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

std::atomic<bool> g_cache{true};

// A cached transform for the lattice, or a fresh one held by `own`.
GridTransform& transform_for(const Lattice& lat, std::unique_ptr<GridTransform>& own) {
    if (!g_cache.load(std::memory_order_relaxed)) {
        own = std::make_unique<GridTransform>(lat);
        return *own;
    }
    thread_local std::unique_ptr<GridTransform> cached;
    thread_local Lattice cached_lat;
    thread_local double cached_gf = 0;
    if (!cached || cached_lat != lat || cached_gf != lat.grid_factor()) {
        cached.reset();
        cached = std::make_unique<GridTransform>(lat);
        cached_lat = lat;
        cached_gf = lat.grid_factor();
    }
    return *cached;
}
}  // namespace

void set_transform_cache(bool on) { g_cache.store(on); }
bool transform_cache_enabled() { return g_cache.load(); }

GridTransform::GridTransform(const Lattice& lat) : lat_(lat) {
    for (int d = 0; d < lat.nu(); ++d) dims_.push_back(lat.grid_time());
    for (int d = 0; d < 3; ++d) dims_.push_back(lat.grid_space());
    npts_ = 1;
    for (int n : dims_) npts_ *= static_cast<std::size_t>(n);
    buf_ = fftw_malloc(sizeof(fftw_complex) * npts_);
    require(buf_ != nullptr, "grid: allocation failed");
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        auto* b = static_cast<fftw_complex*>(buf_);
        plan_fwd_ = fftw_plan_dft(static_cast<int>(dims_.size()), dims_.data(), b, b, FFTW_FORWARD, FFTW_ESTIMATE);
        plan_bwd_ = fftw_plan_dft(static_cast<int>(dims_.size()), dims_.data(), b, b, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    map_.resize(lat.size());
    const int nd = static_cast<int>(dims_.size());
    for (std::size_t idx = 0; idx < lat.size(); ++idx) {
        const auto* lc = lat.time_coords(lat.time_of(idx));
        const auto* jc = lat.space_coords(lat.space_of(idx));
        std::size_t g = 0;
        for (int d = 0; d < nd; ++d) {
            int c = d < lat.nu() ? lc[d] : jc[d - lat.nu()];
            int m = dims_[d];
            int w = ((c % m) + m) % m;
            g = g * m + w;
        }
        map_[idx] = g;
    }
}

GridTransform::~GridTransform() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    if (plan_bwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
    if (buf_) fftw_free(buf_);
}

std::vector<cplx> GridTransform::to_grid(const FourierField& f, int comp) {
    require(f.lattice() == lat_, "grid: lattice mismatch");
    auto* b = static_cast<fftw_complex*>(buf_);
    std::memset(b, 0, sizeof(fftw_complex) * npts_);
    for (std::size_t idx = 0; idx < lat_.size(); ++idx) {
        cplx c = f.at(idx, comp);
        b[map_[idx]][0] = c.real();
        b[map_[idx]][1] = c.imag();
    }
    fftw_execute(static_cast<fftw_plan>(plan_bwd_));
    std::vector<cplx> out(npts_);
    std::memcpy(reinterpret_cast<double*>(out.data()), b, sizeof(fftw_complex) * npts_);
    return out;
}

void GridTransform::from_grid(const std::vector<cplx>& values, FourierField& out, int comp) {
    require(values.size() == npts_, "grid: size mismatch");
    auto* b = static_cast<fftw_complex*>(buf_);
    std::memcpy(b, reinterpret_cast<const double*>(values.data()), sizeof(fftw_complex) * npts_);
    fftw_execute(static_cast<fftw_plan>(plan_fwd_));
    const double inv = 1.0 / static_cast<double>(npts_);
    for (std::size_t idx = 0; idx < lat_.size(); ++idx) {
        const auto& v = b[map_[idx]];
        out.at(idx, comp) = cplx(v[0], v[1]) * inv;
    }
}

void GridTransform::point(std::size_t g, double* coords) const {
    const int nd = static_cast<int>(dims_.size());
    for (int d = nd - 1; d >= 0; --d) {
        int m = dims_[d];
        coords[d] = 2.0 * M_PI * static_cast<double>(g % m) / m;
        g /= m;
    }
}

FourierField grid_product_comp(const FourierField& a, int ca, const FourierField& b, int cb) {
    require(a.lattice() == b.lattice(), "grid product: lattice mismatch");
    std::unique_ptr<GridTransform> own;
    auto& gt = transform_for(a.lattice(), own);
    auto ga = gt.to_grid(a, ca);
    auto gb = gt.to_grid(b, cb);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= gb[i];
    FourierField out(a.lattice(), 1, combine_product(a.parity(), b.parity()));
    gt.from_grid(ga, out, 0);
    return out;
}

double grid_mean_square(const FourierField& f, int comp) {
    std::unique_ptr<GridTransform> own;
    auto& gt = transform_for(f.lattice(), own);
    auto g = gt.to_grid(f, comp);
    double s = 0;
    for (const auto& v : g) s += std::norm(v);
    return s / static_cast<double>(g.size());
}

}  // namespace qpe
