#pragma once

#include "fbctl/problem.hpp"
#include "fbctl/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fbctl {

struct ControlTriple {
    Vec z;
    Vec theta;
    ControlPoint v;
};

/// (Sigma Sigma^*, beta) with Sigma = [[sigma(x, v), 0], [z^*, theta^*]] and
/// beta = (b(x, v), -f(x, y, z, v)).
struct LiftedPoint {
    LiftedMat big_sigma_sq;
    LiftedVec beta_vec;
};

/// Coefficients are evaluated directly, so v need not be a mesh atom.
LiftedPoint lift(const Problem& p, const Vec& x, double y, const ControlTriple& triple);

enum class Assumption { H1, H2 };
enum class Verdict { satisfied, violated, inconclusive };
const char* to_string(Assumption a);
const char* to_string(Verdict v);

struct ConvexityWitness {
    std::vector<double> first;
    std::vector<double> second;
    std::vector<double> midpoint;
    double lambda = 0.5;   // midpoint = lambda first + (1 - lambda) second
    double distance = 0.0; // from the midpoint to the nearest sampled image point
};

struct ConvexityReport {
    Assumption assumption_id = Assumption::H2;
    Verdict verdict = Verdict::inconclusive;
    bool satisfied = false;
    double deficiency = 0.0;
    double tolerance = 0.0;
    std::optional<ConvexityWitness> witness;
    Vec probe_x;
    double probe_y = 0.0;
    int samples_used = 0;
    double radius_K = 0.0;
};

/// Image {(sigma sigma^*, b, f)(x, y, v) : v in mesh}.  For random pairs and
/// random weights, the combination counts as realized when it lies within tol
/// of an image point or of the image of the blended control.  deficiency is
/// the largest distance from an unrealized combination to the image set.
/// Throws Error(domain) when the driver depends on z.
ConvexityReport check_H2(const Problem& p, const Vec& x, double y, double tol, int n_pairs, std::uint64_t seed);

/// Same test on {(sigma sigma^*, sigma sigma^* w, b, f(x, y, sigma^* w, v))}
/// over Gamma = {(v, w) : |sigma^*(x, v) w| <= K}, sampled by rejection from a
/// ball of radius K / s_min(sigma(x, v)) per atom.  Fewer than n_w_samples / 10
/// acceptances gives an inconclusive verdict.
ConvexityReport check_H1(const Problem& p, const Vec& x, double y, double radius_K, int n_w_samples, double tol,
                         std::uint64_t seed);

struct MeasureAtom {
    double weight = 0.0;
    ControlPoint v;
    Vec w;
};

struct MeasureSample {
    std::vector<MeasureAtom> atoms;
    Vec probe_x;
    double probe_y = 0.0;
    double radius_K = 1.0;
};

struct Reduction {
    ControlTriple triple;
    Vec w_bar;
    double alpha = 0.0;
    double identity_lhs = 0.0;  // integral of |sigma^* w|^2
    double identity_rhs = 0.0;  // |z|^2 + |theta|^2
};

/// Finds (v, w) whose image matches the mu-barycenter (candidates: the atoms
/// of mu, then the mesh atoms; w solved on the range of sigma sigma^*(x, v)), then
/// z = sigma^* w and theta = (sqrt(alpha), 0, ...).  Throws Error(numerical)
/// with the barycenter when nothing matches within tol.
Reduction barycentric_reduction(const Problem& p, const MeasureSample& mu, double tol);

/// Sum of mu-weighted lifted points (sigma^* w, 0, v) of the atoms.
LiftedPoint lifted_barycenter(const Problem& p, const MeasureSample& mu);

}  // namespace fbctl
