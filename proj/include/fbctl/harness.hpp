#pragma once

#include "fbctl/fbsde.hpp"
#include "fbctl/hjb.hpp"
#include "fbctl/mollifier.hpp"
#include "fbctl/problem.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fbctl {

/// Grid request: the config's optional "grid" object, then the
/// "nx=..,nt=..,box=lo:hi,periodic=0|1" flag string on top.
GridSpec grid_spec(const nlohmann::json& config, const std::string& flags);

/// mollify_problem for delta > 0, the raw view for delta == 0.
MollifiedProblem mollified_view(const Problem& p, double delta, int quad_nodes = 9);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Parses "0.4,0.2,0.1".
std::vector<double> parse_ladder(const std::string& text);

struct RateReport {
    std::vector<double> deltas;
    std::vector<double> values;
    std::vector<double> gaps;
    double reference = 0.0;         // delta = 0 on the same grid
    double grid_error_floor = 0.0;  // |V0(grid) - V0(refined grid)|
    std::optional<double> fitted_slope;
    int points_used = 0;
    bool inconclusive = false;
    Grid grid;
    int refined_nx = 0;
};

/// One shared grid for the whole ladder (nt stable for the largest delta).
/// Gaps below 10x the floor are left out of the fit; fewer than two fitted
/// points marks the report inconclusive.  Throws Error(config) on a ladder
/// with fewer than three entries.
RateReport run_rate_study(const Problem& p, const std::vector<double>& ladder, const GridSpec& spec,
                          int quad_nodes = 9);

struct GapReport {
    double optimal_value = 0.0;
    double frozen_value = 0.0;                 // J(u^delta) at (t0, x0)
    double frozen_max_deviation = 0.0;         // max nodewise |J(u^delta) - V^delta|
    std::vector<std::pair<std::uint64_t, double>> challenger_values;
    std::optional<double> min_gap;             // over challengers, at (t0, x0)
    std::optional<double> min_nodewise_gap;    // over challengers, levels and interior nodes
    Grid grid;
};

/// The nodewise gap skips the 10% shell next to non-periodic box faces,
/// where one-sided differences leave the scheme non-monotone.
GapReport run_optimality_gap(const Problem& p, double delta, int n_challengers, std::uint64_t seed,
                             const GridSpec& spec, int quad_nodes = 9);

struct CouplingRow {
    double delta = 0.0;
    CouplingMoments moments;
    double reference_gap = 0.0;
    bool tainted = false;
};

struct CouplingReport {
    std::vector<CouplingRow> rows;
    std::optional<double> slope_x;  // log-log slope over rows with delta > 0
    double K_hat = 0.0;             // max over delta > 0 of E sup|dX|^2 / delta
    double reference_value = 0.0;
    Grid grid;
};

CouplingReport run_coupling_study(const Problem& p, const std::vector<double>& ladder, const GridSpec& spec,
                                  const SimConfig& sim, int quad_nodes = 9);

/// Command-line entry point; returns the process exit code
/// (0 ok, 1 numerical failure, 2 configuration error, 3 stability refusal,
/// 4 inconclusive study).
int run_cli(int argc, char** argv);

}  // namespace fbctl
