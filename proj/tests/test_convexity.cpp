#include "fbctl/convexity.hpp"
#include "fbctl/error.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace fbctl;
using namespace fbctl::testing;
using nlohmann::json;

namespace {

json linspace_mesh(double lo, double hi, int n) {
    json m = json::array();
    for (int i = 0; i < n; ++i) m.push_back(lo + (hi - lo) * i / (n - 1));
    return m;
}

Problem sigma_is_v(const json& mesh) {
    return load_problem(problem_json(family("constant-drift", {{"c", 0.0}}), family("control-diffusion", {{"gain", 1.0}}),
                                     family("constant-driver", {{"c", 0.0}}), family("trig-terminal", {{"amp", 1.0}}),
                                     mesh));
}

// Image coordinates (sigma sigma^*, b, f) of every mesh atom, computed from
// evaluate_dynamics.
std::vector<std::vector<double>> h2_cloud(const Problem& p, const Vec& x, double y) {
    std::vector<std::vector<double>> out;
    for (const ControlPoint& v : p.control_mesh) {
        const Dynamics dyn = evaluate_dynamics(p, x, y, Vec::Zero(p.dim), v);
        std::vector<double> c;
        const Mat a = dyn.sigma * dyn.sigma.transpose();
        for (int i = 0; i < p.dim; ++i) {
            for (int j = i; j < p.dim; ++j) c.push_back(a(i, j));
        }
        for (int i = 0; i < p.dim; ++i) c.push_back(dyn.b(i));
        c.push_back(dyn.f);
        out.push_back(c);
    }
    return out;
}

MeasureAtom atom(double weight, double v, const Vec& w) { return {weight, ctrl(v), w}; }

}  // namespace

TEST_SUITE("convexity") {

TEST_CASE("lift examples") {
    const Problem p = load_problem(problem_json(family("constant-drift", {{"c", 0.7}}),
                                                family("identity-diffusion", {{"scale", 1.0}}),
                                                family("linear-z-driver", {{"g", 0.5}, {"c", 1.0}}),
                                                family("trig-terminal", {{"amp", 1.0}})));
    const Vec x = vec1(0.2);
    LiftedPoint l = lift(p, x, 0.0, {vec1(0.0), vec1(0.0), ctrl(0.0)});
    CHECK(l.big_sigma_sq(0, 0) == 1.0);
    CHECK(l.big_sigma_sq(1, 1) == 0.0);
    CHECK(l.big_sigma_sq(0, 1) == 0.0);
    CHECK(l.beta_vec(0) == doctest::Approx(0.7));
    CHECK(l.beta_vec(1) == doctest::Approx(-1.0));
    l = lift(p, x, 0.0, {vec1(3.0), vec1(0.0), ctrl(0.0)});
    CHECK(l.big_sigma_sq(1, 1) == 9.0);
    l = lift(p, x, 0.0, {vec1(3.0), vec1(4.0), ctrl(0.0)});
    CHECK(l.big_sigma_sq(1, 1) == 25.0);
    CHECK(l.big_sigma_sq(0, 1) == 3.0);
    CHECK(l.big_sigma_sq(1, 0) == 3.0);
    CHECK(l.beta_vec(1) == doctest::Approx(-(0.5 * 3.0 + 1.0)));

    const Problem q = shipped("plane");
    const Vec x2 = vec2(0.3, -0.4);
    for (const ControlPoint& v : q.control_mesh) {
        const LiftedPoint lq = lift(q, x2, 0.1, {vec2(0.5, -1.0), vec2(0.2, 0.0), v});
        const Dynamics dyn = evaluate_dynamics(q, x2, 0.1, vec2(0.5, -1.0), v);
        CHECK((lq.big_sigma_sq.topLeftCorner(2, 2) - dyn.sigma * dyn.sigma.transpose()).norm() <= 1e-15);
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Eigen::MatrixXd(lq.big_sigma_sq)).eigenvalues().minCoeff() >=
              -1e-12);
    }
}

TEST_CASE("H2 holds on an affine image") {
    const Problem p = load_problem(problem_json(family("bang-drift", {{"gain", 0.8}}),
                                                family("identity-diffusion", {{"scale", 0.5}}),
                                                family("control-cost-driver", {{"a", 0.3}, {"c", 0.1}}),
                                                family("trig-terminal", {{"amp", 1.0}}), linspace_mesh(-1.0, 1.0, 11)));
    const ConvexityReport r = check_H2(p, vec1(0.4), 0.0, 1e-6, 400, 1);
    CHECK(r.verdict == Verdict::satisfied);
    CHECK(r.satisfied);
    CHECK(r.deficiency <= 1e-6);
    CHECK(r.samples_used == 11);
    const ConvexityReport dense = check_H2(p, vec1(0.4), 0.0, 1e-6, 800, 1);
    CHECK(dense.satisfied);
}

TEST_CASE("H2 fails for sigma = v on two atoms") {
    const Problem p = sigma_is_v(json::array({1, 2}));
    const Vec x = vec1(0.0);
    const ConvexityReport r = check_H2(p, x, 0.0, 1e-6, 200, 3);
    CHECK(r.verdict == Verdict::violated);
    REQUIRE(r.witness.has_value());
    const auto cloud = h2_cloud(p, x, 0.0);
    const double oracle_distance = oracle::set_distance(cloud, r.witness->midpoint);
    CHECK(r.witness->distance == doctest::Approx(oracle_distance));
    CHECK(oracle_distance >= 0.5);
    CHECK(r.deficiency == doctest::Approx(oracle_distance));
    // The witness is a genuine convex combination of two image points.
    CHECK(oracle::hull_distance(cloud, r.witness->midpoint) <= 1e-9);
}

TEST_CASE("H2 on a densified curve") {
    // {(v^2, 0, 0) : v in mesh} is a finite sample of a curve; combinations
    // between atoms are not images of the blended control.
    const Problem p = sigma_is_v(linspace_mesh(1.0, 2.0, 21));
    const Vec x = vec1(0.0);
    const ConvexityReport r = check_H2(p, x, 0.0, 1e-6, 300, 5);
    CHECK(r.verdict == Verdict::violated);
    REQUIRE(r.witness.has_value());
    const auto cloud = h2_cloud(p, x, 0.0);
    CHECK(oracle::hull_distance(cloud, r.witness->midpoint) <= 1e-9);
    CHECK(oracle::set_distance(cloud, r.witness->midpoint) == doctest::Approx(r.deficiency));
    double v = 0.0;
    for (double c = 1.0; c <= 2.0; c += 1e-5) {
        if (std::abs(c * c - r.witness->midpoint[0]) < std::abs(v * v - r.witness->midpoint[0])) v = c;
    }
    CHECK(std::abs(v * v - r.witness->midpoint[0]) < 1e-4);  // the curve itself passes through it
    CHECK(r.deficiency > 1e-6);
}

TEST_CASE("H2 refuses z-dependent drivers") {
    try {
        check_H2(shipped("recursive"), vec1(0.0), 0.0, 1e-6, 10, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::domain);
        CHECK(std::string(e.what()).find("check_H1") != std::string::npos);
    }
}

TEST_CASE("H1 with a driver linear in z") {
    const Problem p = load_problem(problem_json(family("constant-drift", {{"c", 0.2}}),
                                                family("identity-diffusion", {{"scale", 1.0}}),
                                                family("linear-z-driver", {{"g", 0.7}, {"c", 0.0}}),
                                                family("trig-terminal", {{"amp", 1.0}})));
    const ConvexityReport r = check_H1(p, vec1(0.3), 0.1, 1.0, 300, 1e-6, 2);
    CHECK(r.verdict == Verdict::satisfied);
    CHECK(r.deficiency <= 1e-6);
    CHECK(r.samples_used == 300);
    CHECK(r.radius_K == 1.0);
    CHECK(check_H1(p, vec1(0.3), 0.1, 1.0, 600, 1e-6, 2).satisfied);
}

TEST_CASE("H1 fails for a driver quadratic in z") {
    const Problem p = load_problem(problem_json(family("constant-drift", {{"c", 0.0}}),
                                                family("identity-diffusion", {{"scale", 1.0}}),
                                                family("huber-z-driver", {{"a", 1.0}}),
                                                family("trig-terminal", {{"amp", 1.0}})));
    const ConvexityReport r = check_H1(p, vec1(0.0), 0.0, 1.0, 300, 1e-6, 4);
    CHECK(r.verdict == Verdict::violated);
    REQUIRE(r.witness.has_value());
    // Points on the graph (1, w, 0, w^2/2); the witness is inside their hull
    // but above the graph.
    const auto& m = r.witness->midpoint;
    REQUIRE(m.size() == 4);
    CHECK(m[3] > m[1] * m[1] / 2.0 + 1e-9);
    CHECK(r.witness->distance > 1e-6);
}

TEST_CASE("H1 with zero diffusion reduces to H2") {
    const Problem p = load_problem(problem_json(family("bang-drift", {{"gain", 1.0}}),
                                                family("identity-diffusion", {{"scale", 0.0}}),
                                                family("control-cost-driver", {{"a", 0.5}, {"c", 0.0}}),
                                                family("trig-terminal", {{"amp", 1.0}}), linspace_mesh(-1.0, 1.0, 5)));
    const ConvexityReport h1 = check_H1(p, vec1(0.0), 0.0, 1.0, 200, 1e-6, 8);
    const ConvexityReport h2 = check_H2(p, vec1(0.0), 0.0, 1e-6, 200, 8);
    CHECK(h1.verdict == h2.verdict);
    CHECK(h1.verdict == Verdict::satisfied);
    CHECK(h1.samples_used == 200);
}

TEST_CASE("H1 with a degenerate diffusion is inconclusive") {
    const Problem p = load_problem(problem_json(family("constant-drift", {{"c", 0.0}}),
                                                family("split-diffusion", {{"scale", 1.0}, {"gain", 1.0}}),
                                                family("linear-z-driver", {{"g", 1.0}, {"c", 0.0}}),
                                                family("trig-terminal", {{"amp", 1.0}}), json::array({0}), 1.0, 2));
    const ConvexityReport r = check_H1(p, vec2(0.0, 0.0), 0.0, 1.0, 200, 1e-6, 1);
    CHECK(r.verdict == Verdict::inconclusive);
    CHECK(!r.satisfied);
    CHECK(r.samples_used * 10 < 200);
}

TEST_CASE("reduction of a point mass is exact") {
    const Problem p = shipped("plane");
    MeasureSample mu{{{1.0, p.control_mesh[1], vec2(0.5, -0.25)}}, vec2(0.1, 0.2), 0.3, 1.0};
    const Reduction r = barycentric_reduction(p, mu, 1e-9);
    const Mat s = p.diffusion.fn(mu.probe_x, p.control_mesh[1]);
    CHECK((r.triple.z - s.transpose() * vec2(0.5, -0.25)).norm() == 0.0);
    CHECK(r.triple.theta.norm() == 0.0);
    CHECK(r.alpha == 0.0);
    CHECK((r.triple.v - p.control_mesh[1]).norm() == 0.0);
}

TEST_CASE("two symmetric atoms") {
    const Problem p = load_problem(problem_json(family("constant-drift", {{"c", 0.3}}),
                                                family("identity-diffusion", {{"scale", 1.0}}),
                                                family("constant-driver", {{"c", 0.5}}),
                                                family("trig-terminal", {{"amp", 1.0}}), json::array({-1, 0, 1})));
    const double w0 = 0.8;
    const MeasureSample mu{{atom(0.5, 1.0, vec1(w0)), atom(0.5, 1.0, vec1(-w0))}, vec1(0.0), 0.0, 1.0};
    const Reduction r = barycentric_reduction(p, mu, 1e-9);
    CHECK(r.triple.v(0) == 1.0);
    CHECK(std::abs(r.w_bar(0)) <= 1e-15);
    CHECK(std::abs(r.triple.z(0)) <= 1e-15);
    CHECK(r.alpha == doctest::Approx(w0 * w0));
    CHECK(r.triple.theta(0) == doctest::Approx(w0));
    const double lhs = 0.5 * w0 * w0 + 0.5 * w0 * w0;
    const double rhs = r.triple.z.squaredNorm() + r.triple.theta.squaredNorm();
    CHECK(std::abs(lhs - rhs) <= 1e-8);
    CHECK(std::abs(r.identity_lhs - r.identity_rhs) <= 1e-8);
}

TEST_CASE("singular diffusion solves on the range space") {
    const Problem p = load_problem(problem_json(family("constant-drift", {{"c", 0.0}}),
                                                family("split-diffusion", {{"scale", 1.0}, {"gain", 1.0}}),
                                                family("linear-z-driver", {{"g", 1.0}, {"c", 0.0}}),
                                                family("trig-terminal", {{"amp", 1.0}}), json::array({0}), 1.0, 2));
    const MeasureSample mu{{atom(0.25, 0.0, vec2(0.4, 3.0)), atom(0.75, 0.0, vec2(-0.2, -1.0))}, vec2(0.0, 0.0), 0.0, 1.0};
    const Reduction r = barycentric_reduction(p, mu, 1e-9);
    // Oracle: w_bar = pinv(A) * moment with A = diag(1, 0).
    Eigen::Matrix2d A;
    A << 1.0, 0.0, 0.0, 0.0;
    const Eigen::Vector2d moment = 0.25 * (A * Eigen::Vector2d(0.4, 3.0)) + 0.75 * (A * Eigen::Vector2d(-0.2, -1.0));
    const Eigen::Vector2d w = A.completeOrthogonalDecomposition().pseudoInverse() * moment;
    CHECK(std::abs(r.w_bar(0) - w(0)) <= 1e-12);
    CHECK(std::abs(r.w_bar(1) - w(1)) <= 1e-12);
    const double second = 0.25 * 0.16 + 0.75 * 0.04;
    CHECK(r.alpha == doctest::Approx(second - w(0) * w(0)));
}

TEST_CASE("unmatched barycenter reports the violation") {
    const Problem p = sigma_is_v(json::array({1, 2}));
    const MeasureSample mu{{atom(0.5, 1.0, vec1(0.1)), atom(0.5, 2.0, vec1(0.2))}, vec1(0.0), 0.0, 1.0};
    try {
        barycentric_reduction(p, mu, 1e-9);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numerical);
        CHECK(std::string(e.what()).find("H1 violated at probe") != std::string::npos);
        CHECK(std::string(e.what()).find("2.5") != std::string::npos);
    }
    const MeasureSample outside{{atom(1.0, 2.0, vec1(0.9))}, vec1(0.0), 0.0, 1.0};
    CHECK_THROWS_AS(barycentric_reduction(p, outside, 1e-9), Error);
}

TEST_CASE("reduction is sound on random measures") {
    const Problem p = load_problem(problem_json(family("trig-drift", {{"amp", 0.5}, {"gain", 1.0}}),
                                                family("identity-diffusion", {{"scale", 0.7}}),
                                                family("linear-z-driver", {{"g", 0.4}, {"c", 0.2}}),
                                                family("trig-terminal", {{"amp", 1.0}}), json::array({-1, 1}), 1.0, 2));
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double tol = 1e-9;
    const double K = 1.0;
    for (int trial = 0; trial < 50; ++trial) {
        MeasureSample mu;
        mu.probe_x = vec2(u(rng), u(rng));
        mu.probe_y = u(rng);
        mu.radius_K = K;
        const double v = trial % 2 == 0 ? -1.0 : 1.0;
        const int n = 1 + trial % 5;
        for (int i = 0; i < n; ++i) {
            Vec w = vec2(u(rng), u(rng));
            w *= 0.99 * K / 0.7 / std::max(1.0, w.norm());
            mu.atoms.push_back(atom(1.0 / n, v, w));
        }
        const Reduction r = barycentric_reduction(p, mu, tol);
        const LiftedPoint lhs = lift(p, mu.probe_x, mu.probe_y, r.triple);
        const LiftedPoint rhs = lifted_barycenter(p, mu);
        CHECK((lhs.big_sigma_sq - rhs.big_sigma_sq).cwiseAbs().maxCoeff() <= 10 * tol);
        CHECK((lhs.beta_vec - rhs.beta_vec).cwiseAbs().maxCoeff() <= 10 * tol);
        CHECK(r.triple.z.norm() <= K + tol);
        CHECK(r.triple.theta.norm() <= K + tol);
    }
}

}
