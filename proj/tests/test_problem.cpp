#include "fbctl/error.hpp"
#include "fbctl/problem.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace fbctl;
using namespace fbctl::testing;
using nlohmann::json;

namespace {

json base_config() {
    return problem_json(family("bang-drift", {{"gain", 1.0}}), family("identity-diffusion", {{"scale", 0.5}}),
                        family("constant-driver", {{"c", 2.0}}), family("kink-terminal", {{"cap", 1.0}}),
                        json::array({-1, 1}));
}

void expect_error(const json& cfg, ErrorKind kind, const std::string& message, const std::string& field) {
    try {
        load_problem(cfg);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == kind);
        CHECK(std::string(e.what()).find(message) != std::string::npos);
        CHECK(e.field() == field);
    }
}

}  // namespace

TEST_SUITE("problem") {

TEST_CASE("shipped configs load") {
    for (const char* name : {"heat", "constant_driver", "bang_drift", "constant_coeff", "zero_diffusion", "recursive",
                             "plane"}) {
        CAPTURE(name);
        const Problem p = shipped(name);
        CHECK(p.horizon > 0.0);
        CHECK(!p.control_mesh.empty());
        CHECK(p.start_x.size() == p.dim);
    }
}

TEST_CASE("missing and malformed fields") {
    json cfg = base_config();
    cfg.erase("driver");
    expect_error(cfg, ErrorKind::config, "missing coefficient 'driver'", "driver");

    cfg = base_config();
    cfg["control_mesh"] = json::array();
    expect_error(cfg, ErrorKind::config, "empty control mesh", "control_mesh");

    cfg = base_config();
    cfg["horizon"] = 0.0;
    expect_error(cfg, ErrorKind::config, "non-positive horizon", "horizon");

    cfg = base_config();
    cfg["control_mesh"] = json::array({1, 0, 1});
    expect_error(cfg, ErrorKind::config, "duplicate control atom", "control_mesh[2]");

    cfg = base_config();
    cfg["dimension"] = 3;
    expect_error(cfg, ErrorKind::config, "dimension must be 1 or 2", "dimension");

    cfg = base_config();
    cfg["terminal"] = family("kink-terminal", {{"cap", 1.0}, {"slope", 2.0}});
    expect_error(cfg, ErrorKind::config, "expects 1 params", "terminal.params");

    cfg = base_config();
    cfg["bounds"] = {{"M", -1.0}};
    expect_error(cfg, ErrorKind::config, "non-negative", "bounds.M");
}

TEST_CASE("missing file") {
    try {
        load_problem_file("/nonexistent/cfg.json");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
        CHECK(std::string(e.what()).find("config not found") != std::string::npos);
    }
}

TEST_CASE("bounds default to catalog metadata and may be overridden") {
    json cfg = base_config();
    Problem p = load_problem(cfg);
    CHECK(p.bound_M == doctest::Approx(1.0));
    CHECK(p.bound_fphi == doctest::Approx(2.0));
    CHECK(p.lipschitz_C == doctest::Approx(1.0));
    cfg["bounds"] = {{"M", 3.0}, {"C", 4.0}, {"F", 5.0}};
    p = load_problem(cfg);
    CHECK(p.bound_M == 3.0);
    CHECK(p.lipschitz_C == 4.0);
    CHECK(p.bound_fphi == 5.0);
}

TEST_CASE("pointwise evaluation") {
    const Problem p = load_problem(base_config());
    const Dynamics dyn = evaluate_dynamics(p, vec1(0.2), 0.0, vec1(0.0), ctrl(-1.0));
    CHECK(dyn.b(0) == -1.0);
    CHECK(dyn.sigma(0, 0) == 0.5);
    CHECK(dyn.f == 2.0);
    CHECK(evaluate_terminal(p, vec1(-0.3)) == doctest::Approx(0.3));
    try {
        evaluate_dynamics(p, vec1(0.2), 0.0, vec1(0.0), ctrl(0.5));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::domain);
    }
}

TEST_CASE("audit of consistent problems reports no violation") {
    for (const char* name : {"heat", "bang_drift", "recursive", "plane", "constant_coeff"}) {
        CAPTURE(name);
        const Problem p = shipped(name);
        const AssumptionReport r = audit_assumptions(p, 500, 3);
        CHECK(!r.worst_violation.has_value());
        CHECK(r.estimated_M <= p.bound_M + 1e-12);
        CHECK(r.estimated_F <= p.bound_fphi + 1e-12);
        CHECK(r.estimated_C <= p.lipschitz_C + 1e-12);
        CHECK(r.samples_used == 500);
    }
}

TEST_CASE("understated bound is reported with its witness") {
    json cfg = base_config();
    cfg["bounds"] = {{"M", 0.4}};
    const Problem p = load_problem(cfg);
    const AssumptionReport r = audit_assumptions(p, 200, 5);
    REQUIRE(r.worst_violation.has_value());
    CHECK(r.worst_violation->inequality == "bound_b");
    CHECK(r.worst_violation->observed == doctest::Approx(1.0));
    CHECK(r.worst_violation->slack == doctest::Approx(0.6));
    const Dynamics dyn = evaluate_dynamics(p, r.worst_violation->first.x, 0.0, r.worst_violation->first.z,
                                           p.control_mesh[r.worst_violation->first.control]);
    CHECK(dyn.b.norm() == doctest::Approx(r.worst_violation->observed));
}

TEST_CASE("understated Lipschitz constant is reported") {
    json cfg = problem_json(family("trig-drift", {{"amp", 2.0}, {"gain", 0.0}}),
                            family("identity-diffusion", {{"scale", 0.5}}), family("constant-driver", {{"c", 0.0}}),
                            family("trig-terminal", {{"amp", 1.0}}));
    cfg["bounds"] = {{"C", 1.0}};
    const Problem p = load_problem(cfg);
    const AssumptionReport r = audit_assumptions(p, 500, 9);
    REQUIRE(r.worst_violation.has_value());
    CHECK(r.worst_violation->inequality == "lipschitz_b_sigma");
    REQUIRE(r.worst_violation->second.has_value());
    CHECK(r.estimated_C > 1.9);
    CHECK(r.estimated_C <= 2.0 + 1e-9);
}

TEST_CASE("terminal slope is measured in x alone") {
    const Problem p = shipped("plane");
    const AssumptionReport r = audit_assumptions(p, 2000, 13);
    CHECK(r.estimated_C > 0.95);
    CHECK(r.estimated_C <= 1.0 + 1e-9);
}

}
