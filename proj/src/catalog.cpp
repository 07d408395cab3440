#include "fbctl/catalog.hpp"

#include "fbctl/error.hpp"

#include <algorithm>
#include <cmath>

namespace fbctl {

const char* to_string(CoefficientKind kind) {
    switch (kind) {
        case CoefficientKind::drift: return "drift";
        case CoefficientKind::diffusion: return "diffusion";
        case CoefficientKind::driver: return "driver";
        case CoefficientKind::terminal: return "terminal";
    }
    return "unknown";
}

double CoefficientFamily::param(std::string_view key) const {
    for (const auto& [name, value] : params) {
        if (name == key) return value;
    }
    throw Error(ErrorKind::config, "family '" + this->name + "' has no parameter '" + std::string(key) + "'");
}

const std::vector<FamilyInfo>& catalog() {
    using K = CoefficientKind;
    static const std::vector<FamilyInfo> table = {
        {K::drift, "constant-drift", {"c"}, {}, 0},
        {K::drift, "bang-drift", {"gain"}, {.v = true}, 0},
        {K::drift, "trig-drift", {"amp", "gain"}, {.x = true, .v = true}, 0},

        {K::diffusion, "identity-diffusion", {"scale"}, {}, 0},
        {K::diffusion, "control-diffusion", {"gain"}, {.v = true}, 0},
        {K::diffusion, "trig-diffusion", {"base", "amp"}, {.x = true}, 0},
        {K::diffusion, "rotation-diffusion", {"scale", "omega"}, {.x = true}, 2},
        {K::diffusion, "split-diffusion", {"scale", "gain"}, {.v = true}, 2},

        {K::driver, "constant-driver", {"c"}, {}, 0},
        {K::driver, "linear-in-y-driver", {"a", "c"}, {.y = true}, 0},
        {K::driver, "z-coupled-driver", {"gz", "gy"}, {.y = true, .z = true}, 0},
        {K::driver, "control-cost-driver", {"a", "c"}, {.v = true}, 0},
        {K::driver, "linear-z-driver", {"g", "c"}, {.z = true}, 0},
        {K::driver, "huber-z-driver", {"a"}, {.z = true}, 0},
        {K::driver, "trig-x-driver", {"amp"}, {.x = true}, 0},

        {K::terminal, "trig-terminal", {"amp"}, {.x = true}, 0},
        {K::terminal, "constant-terminal", {"c"}, {}, 0},
        {K::terminal, "kink-terminal", {"cap"}, {.x = true}, 0},
    };
    return table;
}

const FamilyInfo* find_family(CoefficientKind kind, std::string_view name) {
    for (const auto& info : catalog()) {
        if (info.kind == kind && info.name == name) return &info;
    }
    return nullptr;
}

CoefficientFamily resolve_family(CoefficientKind kind, CoefficientFamily family, const std::string& field) {
    const FamilyInfo* info = find_family(kind, family.name);
    if (!info) {
        throw Error(ErrorKind::config, "unknown " + std::string(to_string(kind)) + " family '" + family.name + "'",
                    field + ".family");
    }
    if (family.params.size() != info->param_names.size()) {
        throw Error(ErrorKind::config,
                    "family '" + family.name + "' expects " + std::to_string(info->param_names.size()) +
                        " params, got " + std::to_string(family.params.size()),
                    field + ".params");
    }
    CoefficientFamily ordered{family.name, {}};
    for (const auto& name : info->param_names) {
        auto it = std::find_if(family.params.begin(), family.params.end(),
                               [&](const auto& p) { return p.first == name; });
        if (it == family.params.end()) {
            throw Error(ErrorKind::config, "family '" + family.name + "' is missing param '" + name + "'",
                        field + ".params." + name);
        }
        if (!std::isfinite(it->second)) {
            throw Error(ErrorKind::config, "param '" + name + "' is not finite", field + ".params." + name);
        }
        ordered.params.emplace_back(name, it->second);
    }
    return ordered;
}

namespace {

const FamilyInfo& checked_info(CoefficientKind kind, const CoefficientFamily& family, int dim,
                               const std::string& field) {
    const FamilyInfo* info = find_family(kind, family.name);
    if (!info) {
        throw Error(ErrorKind::config, "unknown " + std::string(to_string(kind)) + " family '" + family.name + "'",
                    field + ".family");
    }
    if (info->required_dim != 0 && info->required_dim != dim) {
        throw Error(ErrorKind::config,
                    "family '" + family.name + "' requires dimension " + std::to_string(info->required_dim),
                    field + ".family");
    }
    return *info;
}

// Control component that drives state coordinate i.
inline double control_component(const ControlPoint& v, int i) {
    return v(std::min<int>(i, static_cast<int>(v.size()) - 1));
}

double max_over_mesh(std::span<const ControlPoint> mesh, const std::function<double(const ControlPoint&)>& g) {
    double m = 0.0;
    for (const auto& v : mesh) m = std::max(m, g(v));
    return m;
}

}  // namespace

Drift make_drift(const CoefficientFamily& family_in, int dim, std::span<const ControlPoint> mesh,
                 const std::string& field) {
    CoefficientFamily family = resolve_family(CoefficientKind::drift, family_in, field);
    const FamilyInfo& info = checked_info(CoefficientKind::drift, family, dim, field);
    Drift out{family, info.depends, 0.0, 0.0, {}};
    const double root_d = std::sqrt(static_cast<double>(dim));

    if (family.name == "constant-drift") {
        const double c = family.param("c");
        out.bound = std::abs(c) * root_d;
        out.fn = [c, dim](const Vec&, const ControlPoint&) { return Vec::Constant(dim, c); };
    } else if (family.name == "bang-drift" || family.name == "trig-drift") {
        const double gain = family.param("gain");
        const double amp = family.name == "trig-drift" ? family.param("amp") : 0.0;
        out.lipschitz = std::abs(amp);
        out.bound = std::abs(amp) * root_d + max_over_mesh(mesh, [&](const ControlPoint& v) {
                        double s = 0.0;
                        for (int i = 0; i < dim; ++i) s += std::pow(gain * control_component(v, i), 2);
                        return std::sqrt(s);
                    });
        out.fn = [gain, amp, dim](const Vec& x, const ControlPoint& v) {
            Vec b(dim);
            for (int i = 0; i < dim; ++i) b(i) = amp * std::sin(x(i)) + gain * control_component(v, i);
            return b;
        };
    }
    return out;
}

Diffusion make_diffusion(const CoefficientFamily& family_in, int dim, std::span<const ControlPoint> mesh,
                         const std::string& field) {
    CoefficientFamily family = resolve_family(CoefficientKind::diffusion, family_in, field);
    const FamilyInfo& info = checked_info(CoefficientKind::diffusion, family, dim, field);
    Diffusion out{family, info.depends, 0.0, 0.0, {}};

    if (family.name == "identity-diffusion") {
        const double s = family.param("scale");
        out.bound = std::abs(s);
        out.fn = [s, dim](const Vec&, const ControlPoint&) { return Mat(s * Mat::Identity(dim, dim)); };
    } else if (family.name == "control-diffusion") {
        const double g = family.param("gain");
        out.bound = max_over_mesh(mesh, [&](const ControlPoint& v) { return std::abs(g * v(0)); });
        out.fn = [g, dim](const Vec&, const ControlPoint& v) { return Mat(g * v(0) * Mat::Identity(dim, dim)); };
    } else if (family.name == "trig-diffusion") {
        const double base = family.param("base");
        const double amp = family.param("amp");
        out.lipschitz = std::abs(amp) * std::sqrt(static_cast<double>(dim));
        out.bound = std::abs(base) + std::abs(amp);
        out.fn = [base, amp, dim](const Vec& x, const ControlPoint&) {
            return Mat((base + amp * std::sin(x(0))) * Mat::Identity(dim, dim));
        };
    } else if (family.name == "rotation-diffusion") {
        const double s = family.param("scale");
        const double omega = family.param("omega");
        // |R(a) - R(b)|_F <= sqrt(2)|a - b| and |a - b| <= sqrt(2)|omega||x - x'|.
        out.lipschitz = 2.0 * std::abs(s * omega);
        out.bound = std::abs(s);
        out.fn = [s, omega](const Vec& x, const ControlPoint&) {
            const double angle = omega * (x(0) + x(1));
            Mat r(2, 2);
            r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
            return Mat(s * r);
        };
    } else if (family.name == "split-diffusion") {
        const double s = family.param("scale");
        const double g = family.param("gain");
        out.bound = std::max(std::abs(s), max_over_mesh(mesh, [&](const ControlPoint& v) { return std::abs(g * v(0)); }));
        out.fn = [s, g](const Vec&, const ControlPoint& v) {
            Mat m = Mat::Zero(2, 2);
            m(0, 0) = s;
            m(1, 1) = g * v(0);
            return m;
        };
    }
    return out;
}

Driver make_driver(const CoefficientFamily& family_in, int dim, std::span<const ControlPoint> mesh,
                   const std::string& field) {
    CoefficientFamily family = resolve_family(CoefficientKind::driver, family_in, field);
    const FamilyInfo& info = checked_info(CoefficientKind::driver, family, dim, field);
    Driver out{family, info.depends, 0.0, 0.0, {}};
    const double box = kProbeHalfWidth;
    const double root_d = std::sqrt(static_cast<double>(dim));

    if (family.name == "constant-driver") {
        const double c = family.param("c");
        out.bound = std::abs(c);
        out.fn = [c](const Vec&, double, const Vec&, const ControlPoint&) { return c; };
    } else if (family.name == "linear-in-y-driver") {
        const double a = family.param("a");
        const double c = family.param("c");
        out.lipschitz = std::abs(a);
        out.bound = std::abs(a) * box + std::abs(c);
        out.fn = [a, c](const Vec&, double y, const Vec&, const ControlPoint&) { return a * y + c; };
    } else if (family.name == "z-coupled-driver") {
        const double gz = family.param("gz");
        const double gy = family.param("gy");
        out.lipschitz = std::hypot(gz, gy);
        out.bound = std::abs(gz) + std::abs(gy) * box;
        out.fn = [gz, gy](const Vec&, double y, const Vec& z, const ControlPoint&) {
            return gz * std::sin(z(0)) + gy * y;
        };
    } else if (family.name == "control-cost-driver") {
        const double a = family.param("a");
        const double c = family.param("c");
        out.bound = max_over_mesh(mesh, [&](const ControlPoint& v) { return std::abs(a * v(0) + c); });
        out.fn = [a, c](const Vec&, double, const Vec&, const ControlPoint& v) { return a * v(0) + c; };
    } else if (family.name == "linear-z-driver") {
        const double g = family.param("g");
        const double c = family.param("c");
        out.lipschitz = std::abs(g) * root_d;
        out.bound = std::abs(g) * box * dim + std::abs(c);
        out.fn = [g, c](const Vec&, double, const Vec& z, const ControlPoint&) { return g * z.sum() + c; };
    } else if (family.name == "huber-z-driver") {
        const double a = family.param("a");
        out.lipschitz = std::abs(a);
        out.bound = std::abs(a) * (box * root_d - 0.5);
        out.fn = [a](const Vec&, double, const Vec& z, const ControlPoint&) {
            const double r = z.norm();
            return a * (r <= 1.0 ? 0.5 * r * r : r - 0.5);
        };
    } else if (family.name == "trig-x-driver") {
        const double amp = family.param("amp");
        out.lipschitz = std::abs(amp);
        out.bound = std::abs(amp);
        out.fn = [amp](const Vec& x, double, const Vec&, const ControlPoint&) { return amp * std::cos(x(0)); };
    }
    return out;
}

Terminal make_terminal(const CoefficientFamily& family_in, int dim, const std::string& field) {
    CoefficientFamily family = resolve_family(CoefficientKind::terminal, family_in, field);
    const FamilyInfo& info = checked_info(CoefficientKind::terminal, family, dim, field);
    Terminal out{family, info.depends, 0.0, 0.0, {}};

    if (family.name == "trig-terminal") {
        const double amp = family.param("amp");
        out.lipschitz = std::abs(amp) * std::sqrt(static_cast<double>(dim));
        out.bound = std::abs(amp);
        out.fn = [amp](const Vec& x) { return amp * std::sin(x.sum()); };
    } else if (family.name == "constant-terminal") {
        const double c = family.param("c");
        out.bound = std::abs(c);
        out.fn = [c](const Vec&) { return c; };
    } else if (family.name == "kink-terminal") {
        const double cap = family.param("cap");
        out.lipschitz = 1.0;
        out.bound = std::abs(cap);
        out.fn = [cap](const Vec& x) { return std::min(x.norm(), cap); };
    }
    return out;
}

}  // namespace fbctl
