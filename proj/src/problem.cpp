#include "fbctl/problem.hpp"

#include "fbctl/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace fbctl {

std::optional<std::size_t> Problem::control_index(const ControlPoint& v) const {
    for (std::size_t i = 0; i < control_mesh.size(); ++i) {
        const auto& atom = control_mesh[i];
        if (atom.size() == v.size() && (atom - v).cwiseAbs().maxCoeff() <= 1e-12) return i;
    }
    return std::nullopt;
}

DeclaredBounds catalog_bounds(const Problem& p) {
    return {std::max(p.drift.bound, p.diffusion.bound),
            std::max(p.drift.lipschitz + p.diffusion.lipschitz, p.terminal.lipschitz + p.driver.lipschitz),
            std::max(p.driver.bound, p.terminal.bound)};
}

namespace {

using nlohmann::json;

double read_number(const json& node, const std::string& field) {
    if (!node.is_number()) throw Error(ErrorKind::config, "expected a number", field);
    const double v = node.get<double>();
    if (!std::isfinite(v)) throw Error(ErrorKind::config, "value is not finite", field);
    return v;
}

CoefficientFamily read_family(const json& config, const char* key) {
    const std::string field = key;
    if (!config.contains(key)) throw Error(ErrorKind::config, "missing coefficient '" + field + "'", field);
    const json& node = config.at(key);
    CoefficientFamily family;
    if (node.is_string()) {
        family.name = node.get<std::string>();
        return family;
    }
    if (!node.is_object() || !node.contains("family") || !node.at("family").is_string()) {
        throw Error(ErrorKind::config, "coefficient must be a family name or {family, params}", field);
    }
    family.name = node.at("family").get<std::string>();
    if (node.contains("params")) {
        const json& params = node.at("params");
        if (!params.is_object()) throw Error(ErrorKind::config, "params must be an object", field + ".params");
        for (auto it = params.begin(); it != params.end(); ++it) {
            family.params.emplace_back(it.key(), read_number(it.value(), field + ".params." + it.key()));
        }
    }
    return family;
}

ControlPoint read_control(const json& node, const std::string& field) {
    if (node.is_number()) {
        ControlPoint v(1);
        v(0) = read_number(node, field);
        return v;
    }
    if (!node.is_array() || node.empty() || node.size() > static_cast<std::size_t>(kMaxControlDim)) {
        throw Error(ErrorKind::config, "control point must be a number or an array of 1..4 numbers", field);
    }
    ControlPoint v(static_cast<int>(node.size()));
    for (std::size_t i = 0; i < node.size(); ++i) {
        v(static_cast<int>(i)) = read_number(node[i], field + "[" + std::to_string(i) + "]");
    }
    return v;
}

}  // namespace

Problem load_problem(const json& config) {
    if (!config.is_object()) throw Error(ErrorKind::config, "config must be a JSON object", "");
    Problem p;
    p.name = config.value("name", std::string{});

    if (!config.contains("dimension")) throw Error(ErrorKind::config, "missing dimension", "dimension");
    const json& dim_node = config.at("dimension");
    if (!dim_node.is_number_integer()) throw Error(ErrorKind::config, "dimension must be an integer", "dimension");
    p.dim = dim_node.get<int>();
    if (p.dim < 1 || p.dim > kMaxDim) {
        throw Error(ErrorKind::config, "dimension must be 1 or 2", "dimension");
    }

    if (!config.contains("horizon")) throw Error(ErrorKind::config, "missing horizon", "horizon");
    p.horizon = read_number(config.at("horizon"), "horizon");
    if (p.horizon <= 0.0) throw Error(ErrorKind::config, "non-positive horizon", "horizon");

    p.start_t = config.contains("start_time") ? read_number(config.at("start_time"), "start_time") : 0.0;
    if (p.start_t < 0.0 || p.start_t >= p.horizon) {
        throw Error(ErrorKind::config, "start_time must lie in [0, horizon)", "start_time");
    }
    p.start_x = Vec::Zero(p.dim);
    if (config.contains("start_x")) {
        const json& sx = config.at("start_x");
        if (sx.is_number() && p.dim == 1) {
            p.start_x(0) = read_number(sx, "start_x");
        } else if (sx.is_array() && sx.size() == static_cast<std::size_t>(p.dim)) {
            for (int i = 0; i < p.dim; ++i) p.start_x(i) = read_number(sx[i], "start_x[" + std::to_string(i) + "]");
        } else {
            throw Error(ErrorKind::config, "start_x must have dimension entries", "start_x");
        }
    }

    if (!config.contains("control_mesh")) throw Error(ErrorKind::config, "missing control_mesh", "control_mesh");
    const json& mesh = config.at("control_mesh");
    if (!mesh.is_array()) throw Error(ErrorKind::config, "control_mesh must be an array", "control_mesh");
    if (mesh.empty()) throw Error(ErrorKind::config, "empty control mesh", "control_mesh");
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        const std::string field = "control_mesh[" + std::to_string(i) + "]";
        ControlPoint v = read_control(mesh[i], field);
        if (!p.control_mesh.empty() && v.size() != p.control_mesh.front().size()) {
            throw Error(ErrorKind::config, "control points must share one dimension", field);
        }
        if (p.control_index(v)) throw Error(ErrorKind::config, "duplicate control atom", field);
        p.control_mesh.push_back(v);
    }

    // Read all four before resolving so a missing one is reported first.
    const CoefficientFamily drift = read_family(config, "drift");
    const CoefficientFamily diffusion = read_family(config, "diffusion");
    const CoefficientFamily driver = read_family(config, "driver");
    const CoefficientFamily terminal = read_family(config, "terminal");
    p.drift = make_drift(drift, p.dim, p.control_mesh);
    p.diffusion = make_diffusion(diffusion, p.dim, p.control_mesh);
    p.driver = make_driver(driver, p.dim, p.control_mesh);
    p.terminal = make_terminal(terminal, p.dim);

    const DeclaredBounds implied = catalog_bounds(p);
    p.bound_M = implied.M;
    p.lipschitz_C = implied.C;
    p.bound_fphi = implied.F;
    if (config.contains("bounds")) {
        const json& bounds = config.at("bounds");
        if (!bounds.is_object()) throw Error(ErrorKind::config, "bounds must be an object", "bounds");
        auto read_bound = [&](const char* key, double& target) {
            if (!bounds.contains(key)) return;
            const std::string field = std::string("bounds.") + key;
            target = read_number(bounds.at(key), field);
            if (target < 0.0) throw Error(ErrorKind::config, "bounds must be non-negative", field);
        };
        read_bound("M", p.bound_M);
        read_bound("C", p.lipschitz_C);
        read_bound("F", p.bound_fphi);
    }
    return p;
}

Problem load_problem_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "config not found: " + path.string(), "config");
    json config;
    try {
        in >> config;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, std::string("config is not valid JSON: ") + e.what(), "config");
    }
    return load_problem(config);
}

Dynamics evaluate_dynamics(const Problem& p, const Vec& x, double y, const Vec& z, const ControlPoint& v) {
    if (!p.control_index(v)) throw Error(ErrorKind::domain, "control point is not in the control mesh");
    return {p.drift.fn(x, v), p.diffusion.fn(x, v), p.driver.fn(x, y, z, v)};
}

double evaluate_terminal(const Problem& p, const Vec& x) { return p.terminal.fn(x); }

namespace {

double operator_norm(const Mat& m) {
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

struct Tracker {
    Violation worst;
    bool violated = false;

    void offer(const std::string& id, double observed, double declared, const ProbePoint& a,
               const std::optional<ProbePoint>& b) {
        const double slack = observed - declared;
        if (observed <= declared * (1.0 + 1e-9) + 1e-12) return;
        if (!violated || slack > worst.slack) {
            worst = Violation{id, a, b, observed, declared, slack};
            violated = true;
        }
    }
};

}  // namespace

AssumptionReport audit_assumptions(const Problem& p, int n_samples, std::uint64_t seed, double box_half_width) {
    if (n_samples < 2) throw Error(ErrorKind::domain, "audit needs at least 2 samples");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> box(-box_half_width, box_half_width);
    std::normal_distribution<double> normal;
    const int d = p.dim;
    constexpr double kNearby = 1e-3;

    auto random_point = [&] {
        ProbePoint q{Vec(d), box(rng), Vec(d), 0};
        for (int i = 0; i < d; ++i) q.x(i) = box(rng);
        for (int i = 0; i < d; ++i) q.z(i) = box(rng);
        return q;
    };
    auto nearby_point = [&](const ProbePoint& q) {
        // Random direction in the joint (x, y, z) space, length kNearby.
        Eigen::VectorXd dir(2 * d + 1);
        for (int i = 0; i < dir.size(); ++i) dir(i) = normal(rng);
        dir *= kNearby / dir.norm();
        ProbePoint r = q;
        r.x += dir.head(d);
        r.y += dir(d);
        r.z += dir.tail(d);
        return r;
    };

    AssumptionReport report;
    Tracker trackers[6];
    const char* ids[6] = {"bound_b", "bound_sigma", "bound_f", "bound_phi", "lipschitz_b_sigma", "lipschitz_f_phi"};

    auto check_pair = [&](const ProbePoint& a, const ProbePoint& b) {
        const double dx = (a.x - b.x).norm();
        const double dsum = dx + std::abs(a.y - b.y) + (a.z - b.z).norm();
        const double dphi = std::abs(p.terminal.fn(a.x) - p.terminal.fn(b.x));
        for (std::size_t k = 0; k < p.control_mesh.size(); ++k) {
            const ControlPoint& v = p.control_mesh[k];
            ProbePoint ak = a, bk = b;
            ak.control = bk.control = k;
            if (dx > 0.0) {
                const double q = ((p.drift.fn(a.x, v) - p.drift.fn(b.x, v)).norm() +
                                  (p.diffusion.fn(a.x, v) - p.diffusion.fn(b.x, v)).norm()) /
                                 dx;
                report.estimated_C = std::max(report.estimated_C, q);
                trackers[4].offer(ids[4], q, p.lipschitz_C, ak, bk);
            }
            if (dsum > 0.0) {
                const double qf = std::abs(p.driver.fn(a.x, a.y, a.z, v) - p.driver.fn(b.x, b.y, b.z, v)) / dsum;
                const double q = std::max(qf, dx > 0.0 ? dphi / dx : 0.0);
                report.estimated_C = std::max(report.estimated_C, q);
                trackers[5].offer(ids[5], q, p.lipschitz_C, ak, bk);
            }
        }
    };
    auto check_point = [&](const ProbePoint& a) {
        const double phi = std::abs(p.terminal.fn(a.x));
        report.estimated_F = std::max(report.estimated_F, phi);
        trackers[3].offer(ids[3], phi, p.bound_fphi, a, std::nullopt);
        for (std::size_t k = 0; k < p.control_mesh.size(); ++k) {
            const ControlPoint& v = p.control_mesh[k];
            ProbePoint ak = a;
            ak.control = k;
            const double nb = p.drift.fn(a.x, v).norm();
            const double ns = operator_norm(p.diffusion.fn(a.x, v));
            const double nf = std::abs(p.driver.fn(a.x, a.y, a.z, v));
            report.estimated_M = std::max({report.estimated_M, nb, ns});
            report.estimated_F = std::max(report.estimated_F, nf);
            trackers[0].offer(ids[0], nb, p.bound_M, ak, std::nullopt);
            trackers[1].offer(ids[1], ns, p.bound_M, ak, std::nullopt);
            trackers[2].offer(ids[2], nf, p.bound_fphi, ak, std::nullopt);
        }
    };

    for (int s = 0; s < n_samples; ++s) {
        const ProbePoint a = random_point();
        const ProbePoint b = random_point();
        const ProbePoint c = nearby_point(a);
        check_point(a);
        check_point(b);
        check_pair(a, b);
        check_pair(a, c);
    }
    report.samples_used = n_samples;

    for (const auto& t : trackers) {
        if (!t.violated) continue;
        report.violations.push_back(t.worst);
        if (!report.worst_violation || t.worst.slack > report.worst_violation->slack) report.worst_violation = t.worst;
    }
    return report;
}

}  // namespace fbctl
