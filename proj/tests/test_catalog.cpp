#include "fbctl/catalog.hpp"
#include "fbctl/error.hpp"

#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace fbctl;
using namespace fbctl::testing;

namespace {

std::vector<ControlPoint> mesh_of(std::initializer_list<double> values) {
    std::vector<ControlPoint> m;
    for (double v : values) m.push_back(ctrl(v));
    return m;
}

CoefficientFamily fam(const std::string& name, std::vector<std::pair<std::string, double>> params) {
    return {name, std::move(params)};
}

template <class F>
void expect_config_error(F&& f, const std::string& field) {
    try {
        f();
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
        CHECK(e.field() == field);
    }
}

}  // namespace

TEST_SUITE("catalog") {

TEST_CASE("every family resolves in its supported dimensions") {
    const auto mesh = mesh_of({-1.0, 0.5});
    for (const FamilyInfo& info : catalog()) {
        std::vector<std::pair<std::string, double>> params;
        for (const auto& n : info.param_names) params.emplace_back(n, 0.7);
        const CoefficientFamily f{info.name, params};
        for (int d = 1; d <= 2; ++d) {
            if (info.required_dim != 0 && info.required_dim != d) continue;
            switch (info.kind) {
                case CoefficientKind::drift: CHECK(make_drift(f, d, mesh).fn(Vec::Zero(d), mesh[0]).size() == d); break;
                case CoefficientKind::diffusion: CHECK(make_diffusion(f, d, mesh).fn(Vec::Zero(d), mesh[0]).rows() == d); break;
                case CoefficientKind::driver: CHECK(std::isfinite(make_driver(f, d, mesh).fn(Vec::Zero(d), 0.1, Vec::Zero(d), mesh[0]))); break;
                case CoefficientKind::terminal: CHECK(std::isfinite(make_terminal(f, d).fn(Vec::Zero(d)))); break;
            }
        }
    }
}

TEST_CASE("selection errors name the offending field") {
    const auto mesh = mesh_of({0.0});
    expect_config_error([&] { make_drift(fam("warp-drift", {}), 1, mesh); }, "drift.family");
    expect_config_error([&] { make_drift(fam("constant-drift", {}), 1, mesh); }, "drift.params");
    expect_config_error([&] { make_drift(fam("constant-drift", {{"k", 1.0}}), 1, mesh); }, "drift.params.c");
    expect_config_error([&] { make_diffusion(fam("rotation-diffusion", {{"scale", 1.0}, {"omega", 1.0}}), 1, mesh); },
                        "diffusion.family");
    expect_config_error([&] { make_terminal(fam("trig-terminal", {{"amp", 1.0}, {"extra", 2.0}}), 1); }, "terminal.params");
}

TEST_CASE("params are reordered to catalog order") {
    const auto f = resolve_family(CoefficientKind::driver, fam("linear-in-y-driver", {{"c", 3.0}, {"a", 2.0}}), "driver");
    REQUIRE(f.params.size() == 2);
    CHECK(f.params[0].first == "a");
    CHECK(f.params[1].first == "c");
    CHECK(f.param("a") == 2.0);
    const auto mesh = mesh_of({0.0});
    const Driver drv = make_driver(fam("linear-in-y-driver", {{"c", 3.0}, {"a", 2.0}}), 1, mesh);
    CHECK(drv.fn(vec1(0.0), 1.5, vec1(0.0), mesh[0]) == doctest::Approx(6.0));
}

TEST_CASE("closed forms") {
    const auto mesh = mesh_of({-1.0, 1.0});
    const Vec x = vec2(0.3, -1.1);
    CHECK(make_terminal(fam("trig-terminal", {{"amp", 2.0}}), 2).fn(x) == doctest::Approx(2.0 * std::sin(-0.8)));
    CHECK(make_terminal(fam("kink-terminal", {{"cap", 1.0}}), 2).fn(x) == doctest::Approx(1.0));
    CHECK(make_terminal(fam("kink-terminal", {{"cap", 1.0}}), 1).fn(vec1(-0.4)) == doctest::Approx(0.4));
    const Vec b = make_drift(fam("bang-drift", {{"gain", 2.0}}), 2, mesh).fn(x, mesh[1]);
    CHECK(b(0) == 2.0);
    CHECK(b(1) == 2.0);
    const Mat s = make_diffusion(fam("rotation-diffusion", {{"scale", 0.5}, {"omega", 1.0}}), 2, mesh).fn(x, mesh[0]);
    CHECK((s * s.transpose() - 0.25 * Mat::Identity(2, 2)).norm() < 1e-15);
    const double h = make_driver(fam("huber-z-driver", {{"a", 1.0}}), 1, mesh).fn(x.head(1), 0.0, vec1(0.5), mesh[0]);
    CHECK(h == doctest::Approx(0.125));
}

TEST_CASE("declared Lipschitz constants and bounds hold on random probes") {
    // Independent check: sample pairs on the probe box and compare quotients
    // against the metadata.
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-kProbeHalfWidth, kProbeHalfWidth);
    const auto mesh = mesh_of({-1.0, 0.25, 1.0});
    for (const FamilyInfo& info : catalog()) {
        std::vector<std::pair<std::string, double>> params;
        double k = 0.6;
        for (const auto& n : info.param_names) params.emplace_back(n, k += 0.35);
        const CoefficientFamily f{info.name, params};
        const int d = info.required_dim == 0 ? 2 : info.required_dim;
        auto rvec = [&] {
            Vec v(d);
            for (int i = 0; i < d; ++i) v(i) = u(rng);
            return v;
        };
        CAPTURE(info.name);
        for (int n = 0; n < 400; ++n) {
            const Vec x1 = rvec();
            const Vec x2 = rvec();
            const Vec z1 = rvec();
            const Vec z2 = rvec();
            const double y1 = u(rng);
            const double y2 = u(rng);
            const ControlPoint& v = mesh[static_cast<std::size_t>(n) % mesh.size()];
            switch (info.kind) {
                case CoefficientKind::drift: {
                    const Drift c = make_drift(f, d, mesh);
                    CHECK((c.fn(x1, v) - c.fn(x2, v)).norm() <= c.lipschitz * (x1 - x2).norm() + 1e-12);
                    CHECK(c.fn(x1, v).norm() <= c.bound + 1e-12);
                    break;
                }
                case CoefficientKind::diffusion: {
                    const Diffusion c = make_diffusion(f, d, mesh);
                    CHECK((c.fn(x1, v) - c.fn(x2, v)).norm() <= c.lipschitz * (x1 - x2).norm() + 1e-12);
                    CHECK(Eigen::JacobiSVD<Eigen::MatrixXd>(Eigen::MatrixXd(c.fn(x1, v))).singularValues()(0) <=
                          c.bound + 1e-12);
                    break;
                }
                case CoefficientKind::driver: {
                    const Driver c = make_driver(f, d, mesh);
                    const double dist = std::sqrt((x1 - x2).squaredNorm() + (y1 - y2) * (y1 - y2) + (z1 - z2).squaredNorm());
                    CHECK(std::abs(c.fn(x1, y1, z1, v) - c.fn(x2, y2, z2, v)) <= c.lipschitz * dist + 1e-12);
                    CHECK(std::abs(c.fn(x1, y1, z1, v)) <= c.bound + 1e-12);
                    break;
                }
                case CoefficientKind::terminal: {
                    const Terminal c = make_terminal(f, d);
                    CHECK(std::abs(c.fn(x1) - c.fn(x2)) <= c.lipschitz * (x1 - x2).norm() + 1e-12);
                    CHECK(std::abs(c.fn(x1)) <= c.bound + 1e-12);
                    break;
                }
            }
        }
    }
}

}
