#pragma once

#include "fbctl/hjb.hpp"
#include "fbctl/mollifier.hpp"
#include "fbctl/problem.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fbctl {

struct SimConfig {
    int n_paths = 10000;
    double dt = 1e-3;  // rounded so that (T - t0) / dt steps fit exactly
    std::uint64_t seed = 1;
    double delta = 0.0;
};

/// Either a fixed mesh atom for all (t, x) or a feedback policy looked up at
/// the nearest grid node of the current time level.
struct ControlLaw {
    std::optional<std::size_t> fixed;
    const FeedbackPolicy* policy = nullptr;

    static ControlLaw constant(std::size_t index) { return {index, nullptr}; }
    static ControlLaw feedback(const FeedbackPolicy& p) { return {std::nullopt, &p}; }
};

/// Simulated paths, stored path-major.  x has steps + 1 entries per path,
/// increments and controls have steps entries.  y and z are empty unless a
/// value field was supplied.
struct PathBundle {
    int dim = 1;
    int n_paths = 0;
    int steps = 0;
    double t0 = 0.0;
    double dt = 0.0;
    double delta = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> times;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> z;
    std::vector<double> dW;
    std::vector<double> dB;
    std::vector<std::uint16_t> control;
    std::vector<std::uint8_t> clamped;  // per path
    int clamped_count = 0;
    bool tainted = false;  // more than 1% of paths clamped
    std::optional<Grid> field_grid;

    Vec state(int path, int step) const;
    double value(int path, int step) const { return y[index(path, step)]; }
    Vec z_at(int path, int step) const;
    Vec dw(int path, int step) const;
    Vec db(int path, int step) const;
    std::size_t control_at(int path, int step) const {
        return control[static_cast<std::size_t>(path) * static_cast<std::size_t>(steps) + static_cast<std::size_t>(step)];
    }

private:
    std::size_t index(int path, int step) const {
        return static_cast<std::size_t>(path) * static_cast<std::size_t>(steps + 1) + static_cast<std::size_t>(step);
    }
};

/// Number of Euler steps for cfg on [t0, T]; validates cfg.
int simulation_steps(const Problem& p, const SimConfig& cfg);

/// Euler-Maruyama for dX = b_d dt + sigma_d dW + delta dB from (t0, x0).
/// With a field, y and z are filled with V(t_k, X_k) and sigma_d^* DV(t_k, X_k).
/// Paths leaving the (non-periodic) box of the policy or field grid are
/// clamped and counted.  cfg.delta must equal mp.delta().
PathBundle simulate_forward(const MollifiedProblem& mp, const ControlLaw& law, const SimConfig& cfg,
                            const ValueField* field = nullptr);

enum class CostMethod { frozen_pde, regression_mc };
const char* to_string(CostMethod m);

struct CostEstimate {
    double value = 0.0;
    double std_error = 0.0;
    CostMethod method = CostMethod::frozen_pde;
    int n_paths = 0;
};

/// Cost of a feedback policy from the frozen-control PDE; value at (t0, x0).
struct FrozenCost {
    ValueField field;
    CostEstimate estimate;
};
FrozenCost evaluate_cost_frozen(const MollifiedProblem& mp, const FeedbackPolicy& policy,
                                const SolveOptions& options = {});

struct BasisSpec {
    int degree = 3;
    bool include_terminal = true;  // add Phi_delta(X) when Phi is not constant
};

/// Backward least-squares regression on simulated paths.  Throws
/// Error(numerical) naming the step if a regression stays rank deficient.
CostEstimate evaluate_cost_mc(const MollifiedProblem& mp, const ControlLaw& law, const SimConfig& cfg,
                              const BasisSpec& basis = {});

struct IdentityReport {
    double max_abs = 0.0;   // max over paths of |sum_k r_k|
    double mean_abs = 0.0;  // mean over paths of |sum_k r_k|
    int paths_used = 0;
    int paths_excluded = 0;
    bool tainted = false;
};

/// Cumulative discrete BSDE residual along paths simulated with the field's
/// own policy.  Clamped paths are excluded.
IdentityReport check_value_identity(const MollifiedProblem& mp, const ValueField& field, const PathBundle& bundle);

struct AuxiliaryPaths {
    PathBundle mollified;  // X^delta with Y^delta integrated forward from V^delta(t0, x0)
    PathBundle auxiliary;  // X^n, Y^n driven by the unmollified coefficients
    double reference_value = 0.0;
    double reference_gap = 0.0;  // |V^delta(t0, x0) - reference_value|
};

/// Both forward systems on the same increments and the same control trace.
/// The auxiliary system uses w_k = DV^delta(t_k, X^delta_k) and starts from
/// reference_value.
AuxiliaryPaths simulate_auxiliary(const Problem& p, const MollifiedProblem& mp, const ValueField& field,
                                  const FeedbackPolicy& policy, const SimConfig& cfg, double reference_value);

struct CouplingMoments {
    double sup_x_sq = 0.0;
    double sup_x_sq_se = 0.0;
    double sup_y_sq = 0.0;
    double sup_y_sq_se = 0.0;
    int n_paths = 0;
};

/// Sample mean and standard error of sup_k |X^a - X^b|^2 and sup_k |Y^a - Y^b|^2.
CouplingMoments coupling_moments(const PathBundle& a, const PathBundle& b);

/// Per-path generator seed from (seed, path).
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path);

}  // namespace fbctl
