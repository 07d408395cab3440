#pragma once

#include "fbctl/types.hpp"

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fbctl {

/// Half-width of the default probe box [-5, 5] used by audits.  Bounds of
/// families that grow in y or z are declared on this box.
inline constexpr double kProbeHalfWidth = 5.0;

enum class CoefficientKind { drift, diffusion, driver, terminal };

const char* to_string(CoefficientKind kind);

/// A catalog selection: family name plus named parameters in catalog order.
struct CoefficientFamily {
    std::string name;
    std::vector<std::pair<std::string, double>> params;

    double param(std::string_view key) const;
};

/// Which arguments a family reads.  Mollification only integrates over the
/// coordinates a family depends on.
struct Dependence {
    bool x = false;
    bool y = false;
    bool z = false;
    bool v = false;
};

struct FamilyInfo {
    CoefficientKind kind;
    std::string name;
    std::vector<std::string> param_names;
    Dependence depends;
    int required_dim = 0;  // 0 = any supported dimension
};

const std::vector<FamilyInfo>& catalog();
const FamilyInfo* find_family(CoefficientKind kind, std::string_view name);

using DriftFn = std::function<Vec(const Vec& x, const ControlPoint& v)>;
using DiffusionFn = std::function<Mat(const Vec& x, const ControlPoint& v)>;
using DriverFn = std::function<double(const Vec& x, double y, const Vec& z, const ControlPoint& v)>;
using TerminalFn = std::function<double(const Vec& x)>;

// A resolved coefficient carries its handle together with the catalog
// metadata: Euclidean (Frobenius for sigma) Lipschitz constant in the
// variables it is mollified over, and its sup bound (operator norm for sigma).
template <class Fn>
struct Coefficient {
    CoefficientFamily family;
    Dependence depends;
    double lipschitz = 0.0;
    double bound = 0.0;
    Fn fn;
};

using Drift = Coefficient<DriftFn>;
using Diffusion = Coefficient<DiffusionFn>;
using Driver = Coefficient<DriverFn>;
using Terminal = Coefficient<TerminalFn>;

/// Resolve a family against the catalog.  Throws Error(config) on unknown
/// names, parameter mismatch or an unsupported dimension; `field` prefixes
/// the reported path.
Drift make_drift(const CoefficientFamily& family, int dim, std::span<const ControlPoint> mesh,
                 const std::string& field = "drift");
Diffusion make_diffusion(const CoefficientFamily& family, int dim, std::span<const ControlPoint> mesh,
                         const std::string& field = "diffusion");
Driver make_driver(const CoefficientFamily& family, int dim, std::span<const ControlPoint> mesh,
                   const std::string& field = "driver");
Terminal make_terminal(const CoefficientFamily& family, int dim, const std::string& field = "terminal");

/// Check a family selection against the catalog and reorder its params to
/// catalog order.
CoefficientFamily resolve_family(CoefficientKind kind, CoefficientFamily family, const std::string& field);

}  // namespace fbctl
