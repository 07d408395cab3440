#pragma once

#include "fbctl/catalog.hpp"
#include "fbctl/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fbctl {

/// A controlled forward-backward problem: coefficients from the catalog, the
/// control mesh standing in for the compact control set, and the declared
/// constants (M bounds b and sigma, F bounds f and Phi, C is the joint
/// Lipschitz constant).
struct Problem {
    std::string name;
    int dim = 1;
    double horizon = 1.0;
    double start_t = 0.0;
    Vec start_x;

    Drift drift;
    Diffusion diffusion;
    Driver driver;
    Terminal terminal;

    double bound_M = 0.0;
    double bound_fphi = 0.0;
    double lipschitz_C = 0.0;

    std::vector<ControlPoint> control_mesh;

    /// Mesh index of v, if v is an atom (exact comparison up to 1e-12).
    std::optional<std::size_t> control_index(const ControlPoint& v) const;
};

struct DeclaredBounds {
    double M = 0.0;
    double C = 0.0;
    double F = 0.0;
};

/// Constants implied by the catalog metadata of the four coefficients.
DeclaredBounds catalog_bounds(const Problem& p);

/// Build a Problem from a config document.  Keys: dimension, horizon,
/// drift, diffusion, driver, terminal, control_mesh, bounds {M, C, F};
/// optional: name, start_time, start_x.  Missing bounds fall back to the
/// catalog metadata.
Problem load_problem(const nlohmann::json& config);
Problem load_problem_file(const std::filesystem::path& path);

struct Dynamics {
    Vec b;
    Mat sigma;
    double f = 0.0;
};

/// Pointwise coefficient values.  Throws Error(domain) if v is not a mesh atom.
Dynamics evaluate_dynamics(const Problem& p, const Vec& x, double y, const Vec& z, const ControlPoint& v);
double evaluate_terminal(const Problem& p, const Vec& x);

struct ProbePoint {
    Vec x;
    double y = 0.0;
    Vec z;
    std::size_t control = 0;
};

struct Violation {
    std::string inequality;  // bound_b, bound_sigma, bound_f, bound_phi, lipschitz_b_sigma, lipschitz_f_phi
    ProbePoint first;
    std::optional<ProbePoint> second;  // present for Lipschitz inequalities
    double observed = 0.0;
    double declared = 0.0;
    double slack = 0.0;  // observed - declared
};

struct AssumptionReport {
    double estimated_M = 0.0;
    double estimated_C = 0.0;
    double estimated_F = 0.0;
    std::optional<Violation> worst_violation;
    std::vector<Violation> violations;  // worst per inequality
    int samples_used = 0;
};

/// Spot-check boundedness and Lipschitz continuity of the coefficients on
/// the probe box [-w, w] for every control atom: random pairs plus nearby
/// pairs at distance 1e-3.  A violating problem yields a report, not an error.
AssumptionReport audit_assumptions(const Problem& p, int n_samples, std::uint64_t seed,
                                   double box_half_width = kProbeHalfWidth);

}  // namespace fbctl
