#pragma once

#include "fbctl/mollifier.hpp"
#include "fbctl/problem.hpp"
#include "fbctl/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace fbctl {

/// Space-time grid on a truncation box.  Periodic axes place nx nodes on
/// [lo, hi) (hi identified with lo); the others place nx nodes on [lo, hi].
struct Grid {
    int dim = 1;
    Vec box_lo;
    Vec box_hi;
    std::array<int, kMaxDim> nx{1, 1};
    std::array<bool, kMaxDim> periodic{false, false};
    int nt = 1;
    double t0 = 0.0;
    double T = 1.0;

    double dt() const noexcept { return (T - t0) / nt; }
    double dx(int axis) const noexcept;
    double min_dx() const noexcept;
    std::size_t node_count() const noexcept;
    std::array<int, kMaxDim> unravel(std::size_t node) const noexcept;
    std::size_t ravel(const std::array<int, kMaxDim>& index) const noexcept;
    Vec node(std::size_t index) const;
    double time(int level) const noexcept { return t0 + level * dt(); }
    /// False within margin * (box width) of a non-periodic box face.
    bool in_interior(std::size_t node, double margin) const;

    /// Throws Error(domain) if an invariant fails.
    void validate() const;
    bool same_shape(const Grid& other) const;
};

/// Largest step allowed by dt <= dx^2 / (d (M^2 + delta^2) + M dx + C dx^2).
double max_stable_dt(const Grid& grid, double bound_M, double lipschitz_C, double delta);
int required_nt(const Grid& grid, double bound_M, double lipschitz_C, double delta);
/// Throws Error(stability) naming the required nt.
void check_stability(const Grid& grid, double bound_M, double lipschitz_C, double delta);

/// Grid request as given on the command line.  Missing nt means "smallest
/// stable nt"; a missing box means start_x +/- 3 per axis.
struct GridSpec {
    int nx = 201;
    std::optional<int> nt;
    std::optional<std::pair<double, double>> box;
    bool periodic = false;
};

Grid make_grid(const Problem& p, const GridSpec& spec, double delta);

/// V^delta on the grid.  values/gradients are stored per kept time level
/// (all levels by default).
struct ValueField {
    Grid grid;
    double delta = 0.0;
    std::vector<int> levels;         // kept time levels, increasing
    std::vector<double> values;      // levels.size() x node_count
    std::vector<double> gradients;   // levels.size() x node_count x dim
    double sup_norm = 0.0;
    double lipschitz_x_estimate = 0.0;

    bool full_history() const noexcept { return static_cast<int>(levels.size()) == grid.nt + 1; }
    /// Row of a kept level; throws Error(domain) if the level was not kept.
    std::size_t row(int level) const;
    double value(int level, std::size_t node) const;
    Vec gradient(int level, std::size_t node) const;
    /// Second-difference stencil (same boundary treatment as the scheme).
    Mat hessian(int level, std::size_t node) const;
};

/// Mesh index chosen per (time level, node) for levels 0..nt-1; the choice at
/// level n is used on [t_n, t_{n+1}).
struct FeedbackPolicy {
    Grid grid;
    double delta = 0.0;
    std::vector<std::uint16_t> choice;  // nt x node_count

    std::size_t at(int level, std::size_t node) const {
        return choice[static_cast<std::size_t>(level) * grid.node_count() + node];
    }
};

struct SolveOptions {
    bool keep_history = true;  // false keeps only levels 0 and nt and no policy
};

struct SolveResult {
    ValueField field;
    FeedbackPolicy policy;
};

/// 1/2 tr((sigma_d sigma_d^* + delta^2 I) A) + b_d . p + f_d(x, y, sigma_d^* p, v)
/// with the coefficients taken from mp and the elliptic term from delta.
double hamiltonian_delta(const MollifiedProblem& mp, const Vec& x, double y, const Vec& p, const Mat& A,
                         const ControlPoint& v, double delta);

/// Backward explicit monotone scheme for the regularized HJB equation with the
/// minimum over the control mesh taken nodewise (ties to the lowest index).
/// delta is mp.delta().  Throws Error(stability) or Error(numerical).
SolveResult solve(const MollifiedProblem& mp, const Grid& grid, const SolveOptions& options = {});

/// Same scheme with the control frozen to the policy: the linear cost PDE.
ValueField solve_frozen(const MollifiedProblem& mp, const FeedbackPolicy& policy,
                        const SolveOptions& options = {});

/// The operator the scheme minimizes at (level, node) for mesh atom `control`,
/// evaluated on the stored level-(n+1) data: hamiltonian_delta with the drift
/// term upwinded.  Requires full history.
double discrete_hamiltonian(const MollifiedProblem& mp, const ValueField& field, int level, std::size_t node,
                            std::size_t control);

struct Interpolated {
    double value = 0.0;
    Vec gradient;
    bool clamped = false;
};

/// Multilinear in space, linear in time.  x outside the box is clamped (and
/// flagged); t outside [t0, T] throws Error(domain).
Interpolated interpolate(const ValueField& field, double t, const Vec& x);

struct HolderEnvelopes {
    double lip_x = 0.0;
    double holder_t = 0.0;
};

/// Max neighbor quotient |dV|/|dx| over kept levels, and the max over nodes of
/// |V(t, x) - V(t', x)| / ((1 + |x|) |t - t'|^(1/2)) over dyadic lags
/// t' - t = (T - t0) 2^-k, k = 1..6.
HolderEnvelopes holder_envelopes(const ValueField& field);

/// Uniform random atom per (level, node).
FeedbackPolicy random_policy(const Grid& grid, double delta, std::size_t n_controls, std::uint64_t seed);

}  // namespace fbctl
