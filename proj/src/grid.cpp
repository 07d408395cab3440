#include "fbctl/error.hpp"
#include "fbctl/hjb.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace fbctl {

double Grid::dx(int axis) const noexcept {
    const double span = box_hi(axis) - box_lo(axis);
    return periodic[axis] ? span / nx[axis] : span / (nx[axis] - 1);
}

double Grid::min_dx() const noexcept {
    double h = dx(0);
    for (int k = 1; k < dim; ++k) h = std::min(h, dx(k));
    return h;
}

std::size_t Grid::node_count() const noexcept {
    std::size_t n = 1;
    for (int k = 0; k < dim; ++k) n *= static_cast<std::size_t>(nx[k]);
    return n;
}

std::array<int, kMaxDim> Grid::unravel(std::size_t node) const noexcept {
    std::array<int, kMaxDim> idx{0, 0};
    for (int k = 0; k < dim; ++k) {
        idx[k] = static_cast<int>(node % static_cast<std::size_t>(nx[k]));
        node /= static_cast<std::size_t>(nx[k]);
    }
    return idx;
}

std::size_t Grid::ravel(const std::array<int, kMaxDim>& index) const noexcept {
    std::size_t node = 0;
    for (int k = dim - 1; k >= 0; --k) node = node * static_cast<std::size_t>(nx[k]) + static_cast<std::size_t>(index[k]);
    return node;
}

Vec Grid::node(std::size_t index) const {
    const auto idx = unravel(index);
    Vec x(dim);
    for (int k = 0; k < dim; ++k) x(k) = box_lo(k) + idx[k] * dx(k);
    return x;
}

bool Grid::in_interior(std::size_t index, double margin) const {
    const Vec x = node(index);
    for (int k = 0; k < dim; ++k) {
        if (periodic[k]) continue;
        const double shell = margin * (box_hi(k) - box_lo(k));
        if (x(k) < box_lo(k) + shell || x(k) > box_hi(k) - shell) return false;
    }
    return true;
}

void Grid::validate() const {
    if (dim < 1 || dim > kMaxDim) throw Error(ErrorKind::domain, "grid dimension must be 1 or 2");
    if (box_lo.size() != dim || box_hi.size() != dim) throw Error(ErrorKind::domain, "grid box has wrong dimension");
    for (int k = 0; k < dim; ++k) {
        if (!(box_lo(k) < box_hi(k))) throw Error(ErrorKind::domain, "grid box must satisfy lo < hi");
        if (nx[k] < 3) throw Error(ErrorKind::domain, "grid needs nx >= 3");
    }
    if (nt < 1) throw Error(ErrorKind::domain, "grid needs nt >= 1");
    if (!(t0 < T)) throw Error(ErrorKind::domain, "grid needs t0 < T");
}

bool Grid::same_shape(const Grid& other) const {
    if (dim != other.dim || nt != other.nt || t0 != other.t0 || T != other.T) return false;
    for (int k = 0; k < dim; ++k) {
        if (nx[k] != other.nx[k] || periodic[k] != other.periodic[k]) return false;
        if (box_lo(k) != other.box_lo(k) || box_hi(k) != other.box_hi(k)) return false;
    }
    return true;
}

double max_stable_dt(const Grid& grid, double bound_M, double lipschitz_C, double delta) {
    const double h = grid.min_dx();
    const double denom = grid.dim * (bound_M * bound_M + delta * delta) + bound_M * h + lipschitz_C * h * h;
    if (denom <= 0.0) return std::numeric_limits<double>::infinity();
    return h * h / denom;
}

int required_nt(const Grid& grid, double bound_M, double lipschitz_C, double delta) {
    const double dt_max = max_stable_dt(grid, bound_M, lipschitz_C, delta);
    if (!std::isfinite(dt_max)) return 1;
    const double n = (grid.T - grid.t0) / dt_max;
    // Guard against n landing a hair above an integer through rounding.
    int nt = static_cast<int>(std::ceil(n - 1e-9));
    return std::max(nt, 1);
}

void check_stability(const Grid& grid, double bound_M, double lipschitz_C, double delta) {
    const int need = required_nt(grid, bound_M, lipschitz_C, delta);
    if (grid.nt < need) {
        throw Error(ErrorKind::stability, "unstable grid: nt = " + std::to_string(grid.nt) +
                                              " violates the explicit-scheme bound; required nt >= " +
                                              std::to_string(need));
    }
}

Grid make_grid(const Problem& p, const GridSpec& spec, double delta) {
    Grid g;
    g.dim = p.dim;
    g.box_lo = Vec(p.dim);
    g.box_hi = Vec(p.dim);
    for (int k = 0; k < p.dim; ++k) {
        if (spec.box) {
            g.box_lo(k) = spec.box->first;
            g.box_hi(k) = spec.box->second;
        } else {
            g.box_lo(k) = p.start_x(k) - 3.0;
            g.box_hi(k) = p.start_x(k) + 3.0;
        }
        g.nx[k] = spec.nx;
        g.periodic[k] = spec.periodic;
    }
    g.t0 = p.start_t;
    g.T = p.horizon;
    g.nt = 1;
    if (spec.nx < 3) throw Error(ErrorKind::config, "grid needs nx >= 3", "grid.nx");
    for (int k = 0; k < p.dim; ++k) {
        if (!(g.box_lo(k) < g.box_hi(k))) throw Error(ErrorKind::config, "grid box must satisfy lo < hi", "grid.box");
    }
    g.nt = spec.nt ? *spec.nt : required_nt(g, p.bound_M, p.lipschitz_C, delta);
    if (g.nt < 1) throw Error(ErrorKind::config, "grid needs nt >= 1", "grid.nt");
    return g;
}

}  // namespace fbctl
