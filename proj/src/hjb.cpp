#include "fbctl/hjb.hpp"

#include "fbctl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace fbctl {

namespace {

// Node access with the boundary rule of the scheme: periodic axes wrap,
// the others extrapolate linearly to a ghost node (V_ghost = 2 V_b - V_in),
// which makes boundary differences one-sided and the second difference zero.
// A drift whose upwind neighbor is a ghost node contributes nothing, which
// keeps the scheme monotone on the boundary.
class Lattice {
public:
    explicit Lattice(const Grid& g) : g_(g) {}

    double at(const double* V, int i0, int i1) const {
        const int n0 = g_.nx[0];
        if (i0 < 0) {
            if (g_.periodic[0]) {
                i0 += n0;
            } else {
                return 2.0 * at(V, 0, i1) - at(V, 1, i1);
            }
        } else if (i0 >= n0) {
            if (g_.periodic[0]) {
                i0 -= n0;
            } else {
                return 2.0 * at(V, n0 - 1, i1) - at(V, n0 - 2, i1);
            }
        }
        if (g_.dim == 1) return V[i0];
        const int n1 = g_.nx[1];
        if (i1 < 0) {
            if (g_.periodic[1]) {
                i1 += n1;
            } else {
                return 2.0 * at(V, i0, 0) - at(V, i0, 1);
            }
        } else if (i1 >= n1) {
            if (g_.periodic[1]) {
                i1 -= n1;
            } else {
                return 2.0 * at(V, i0, n1 - 1) - at(V, i0, n1 - 2);
            }
        }
        return V[static_cast<std::size_t>(i0) + static_cast<std::size_t>(n0) * static_cast<std::size_t>(i1)];
    }

    struct Stencil {
        std::array<double, kMaxDim> fwd{};
        std::array<double, kMaxDim> bwd{};
        std::array<bool, kMaxDim> fwd_ghost{};
        std::array<bool, kMaxDim> bwd_ghost{};
        Vec central;
        Mat hess;
    };

    Stencil stencil(const double* V, std::size_t node) const {
        const int d = g_.dim;
        const auto idx = g_.unravel(node);
        const int i0 = idx[0];
        const int i1 = idx[1];
        const double vc = V[node];
        Stencil s;
        s.central = Vec(d);
        s.hess = Mat::Zero(d, d);
        for (int k = 0; k < d; ++k) {
            const double h = g_.dx(k);
            const double up = k == 0 ? at(V, i0 + 1, i1) : at(V, i0, i1 + 1);
            const double dn = k == 0 ? at(V, i0 - 1, i1) : at(V, i0, i1 - 1);
            const int ik = idx[static_cast<std::size_t>(k)];
            s.fwd_ghost[k] = !g_.periodic[k] && ik + 1 >= g_.nx[k];
            s.bwd_ghost[k] = !g_.periodic[k] && ik == 0;
            s.fwd[k] = (up - vc) / h;
            s.bwd[k] = (vc - dn) / h;
            s.central(k) = 0.5 * (s.fwd[k] + s.bwd[k]);
            s.hess(k, k) = (s.fwd[k] - s.bwd[k]) / h;
        }
        if (d == 2) {
            const double c = (at(V, i0 + 1, i1 + 1) - at(V, i0 + 1, i1 - 1) - at(V, i0 - 1, i1 + 1) +
                              at(V, i0 - 1, i1 - 1)) /
                             (4.0 * g_.dx(0) * g_.dx(1));
            s.hess(0, 1) = c;
            s.hess(1, 0) = c;
        }
        return s;
    }

    Vec central_gradient(const double* V, std::size_t node) const {
        const int d = g_.dim;
        const auto idx = g_.unravel(node);
        Vec grad(d);
        for (int k = 0; k < d; ++k) {
            const double up = k == 0 ? at(V, idx[0] + 1, idx[1]) : at(V, idx[0], idx[1] + 1);
            const double dn = k == 0 ? at(V, idx[0] - 1, idx[1]) : at(V, idx[0], idx[1] - 1);
            grad(k) = (up - dn) / (2.0 * g_.dx(k));
        }
        return grad;
    }

    double neighbor_lipschitz(const double* V) const {
        double lip = 0.0;
        const std::size_t n = g_.node_count();
        for (std::size_t node = 0; node < n; ++node) {
            const auto idx = g_.unravel(node);
            for (int k = 0; k < g_.dim; ++k) {
                if (!g_.periodic[k] && idx[k] + 1 >= g_.nx[k]) continue;
                const double up = k == 0 ? at(V, idx[0] + 1, idx[1]) : at(V, idx[0], idx[1] + 1);
                lip = std::max(lip, std::abs(up - V[node]) / g_.dx(k));
            }
        }
        return lip;
    }

private:
    const Grid& g_;
};

// Coefficient values of one (node, atom) pair.
struct LocalCoefficients {
    Vec b;
    Mat a;      // sigma sigma^* + delta^2 I
    Mat sigma;
};

// The scheme operator: diffusion central, drift upwinded, driver at the
// central gradient.
template <class DriverEval>
double scheme_operator(const LocalCoefficients& c, const Lattice::Stencil& s, DriverEval&& driver) {
    const int d = static_cast<int>(c.b.size());
    double diffusion = 0.0;
    for (int k = 0; k < d; ++k) {
        for (int l = 0; l < d; ++l) diffusion += c.a(k, l) * s.hess(k, l);
    }
    double drift = 0.0;
    for (int k = 0; k < d; ++k) {
        if (c.b(k) > 0.0) {
            if (!s.fwd_ghost[k]) drift += c.b(k) * s.fwd[k];
        } else if (!s.bwd_ghost[k]) {
            drift += c.b(k) * s.bwd[k];
        }
    }
    const Vec z = c.sigma.transpose() * s.central;
    return 0.5 * diffusion + drift + driver(z);
}

LocalCoefficients local_coefficients(const MollifiedProblem& mp, const Vec& x, const ControlPoint& v) {
    LocalCoefficients c;
    c.b = mp.drift(x, v);
    c.sigma = mp.diffusion(x, v);
    const double d2 = mp.delta() * mp.delta();
    c.a = c.sigma * c.sigma.transpose();
    c.a.diagonal().array() += d2;
    return c;
}

enum class DriverMode { constant, state_only, general };

struct Tables {
    std::size_t N = 0;
    std::size_t K = 0;
    std::vector<Vec> nodes;
    std::vector<LocalCoefficients> coeff;  // N x K
    DriverMode mode = DriverMode::general;
    std::vector<double> f;                 // K (constant) or N x K (state_only)

    const LocalCoefficients& at(std::size_t node, std::size_t k) const { return coeff[node * K + k]; }
};

Tables build_tables(const MollifiedProblem& mp, const Grid& g) {
    const Problem& p = mp.base();
    Tables t;
    t.N = g.node_count();
    t.K = p.control_mesh.size();
    t.nodes.reserve(t.N);
    for (std::size_t i = 0; i < t.N; ++i) t.nodes.push_back(g.node(i));
    t.coeff.resize(t.N * t.K);
    for (std::size_t i = 0; i < t.N; ++i) {
        for (std::size_t k = 0; k < t.K; ++k) t.coeff[i * t.K + k] = local_coefficients(mp, t.nodes[i], p.control_mesh[k]);
    }
    const Dependence dep = p.driver.depends;
    const Vec z0 = Vec::Zero(g.dim);
    if (!dep.x && !dep.y && !dep.z) {
        t.mode = DriverMode::constant;
        t.f.resize(t.K);
        for (std::size_t k = 0; k < t.K; ++k) t.f[k] = mp.driver(t.nodes[0], 0.0, z0, p.control_mesh[k]);
    } else if (!dep.y && !dep.z) {
        t.mode = DriverMode::state_only;
        t.f.resize(t.N * t.K);
        for (std::size_t i = 0; i < t.N; ++i) {
            for (std::size_t k = 0; k < t.K; ++k) t.f[i * t.K + k] = mp.driver(t.nodes[i], 0.0, z0, p.control_mesh[k]);
        }
    }
    return t;
}

double driver_value(const MollifiedProblem& mp, const Tables& t, std::size_t node, std::size_t k, double y,
                    const Vec& z) {
    switch (t.mode) {
        case DriverMode::constant: return t.f[k];
        case DriverMode::state_only: return t.f[node * t.K + k];
        case DriverMode::general: break;
    }
    return mp.driver(t.nodes[node], y, z, mp.base().control_mesh[k]);
}

void store_level(ValueField& field, const Lattice& lat, std::size_t row, const std::vector<double>& V) {
    const std::size_t N = V.size();
    const int d = field.grid.dim;
    std::copy(V.begin(), V.end(), field.values.begin() + static_cast<std::ptrdiff_t>(row * N));
    for (std::size_t i = 0; i < N; ++i) {
        const Vec g = lat.central_gradient(V.data(), i);
        for (int k = 0; k < d; ++k) field.gradients[(row * N + i) * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] = g(k);
    }
}

ValueField march(const MollifiedProblem& mp, const Grid& grid, const SolveOptions& options,
                 const FeedbackPolicy* frozen, FeedbackPolicy* policy_out) {
    grid.validate();
    const Problem& p = mp.base();
    if (grid.dim != p.dim) throw Error(ErrorKind::domain, "grid dimension does not match the problem");
    check_stability(grid, p.bound_M, p.lipschitz_C, mp.delta());
    if (p.control_mesh.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw Error(ErrorKind::domain, "control mesh too large");
    }

    const Tables tables = build_tables(mp, grid);
    const Lattice lat(grid);
    const std::size_t N = tables.N;
    const std::size_t K = tables.K;
    const int d = grid.dim;
    const int nt = grid.nt;
    const double dt = grid.dt();

    ValueField field;
    field.grid = grid;
    field.delta = mp.delta();
    if (options.keep_history) {
        for (int n = 0; n <= nt; ++n) field.levels.push_back(n);
    } else {
        field.levels = {0, nt};
    }
    field.values.assign(field.levels.size() * N, 0.0);
    field.gradients.assign(field.levels.size() * N * static_cast<std::size_t>(d), 0.0);

    if (policy_out) {
        policy_out->grid = grid;
        policy_out->delta = mp.delta();
        policy_out->choice.assign(static_cast<std::size_t>(nt) * N, 0);
    }

    std::vector<double> next(N);
    std::vector<double> cur(N);
    for (std::size_t i = 0; i < N; ++i) next[i] = mp.terminal(tables.nodes[i]);

    double sup = 0.0;
    double lip = 0.0;
    auto account = [&](const std::vector<double>& V) {
        for (double v : V) sup = std::max(sup, std::abs(v));
        lip = std::max(lip, lat.neighbor_lipschitz(V.data()));
    };
    account(next);
    store_level(field, lat, field.levels.size() - 1, next);

    std::vector<std::uint16_t> choice(N, 0);
    for (int n = nt - 1; n >= 0; --n) {
        const long long count = static_cast<long long>(N);
#pragma omp parallel for schedule(static)
        for (long long ii = 0; ii < count; ++ii) {
            const std::size_t i = static_cast<std::size_t>(ii);
            const Lattice::Stencil s = lat.stencil(next.data(), i);
            const double y = next[i];
            auto eval = [&](std::size_t k) {
                return scheme_operator(tables.at(i, k), s,
                                       [&](const Vec& z) { return driver_value(mp, tables, i, k, y, z); });
            };
            if (frozen) {
                cur[i] = y + dt * eval(frozen->at(n, i));
            } else {
                double best = eval(0);
                std::size_t arg = 0;
                for (std::size_t k = 1; k < K; ++k) {
                    const double L = eval(k);
                    if (L < best) {
                        best = L;
                        arg = k;
                    }
                }
                choice[i] = static_cast<std::uint16_t>(arg);
                cur[i] = y + dt * best;
            }
        }
        for (std::size_t i = 0; i < N; ++i) {
            if (!std::isfinite(cur[i])) {
                std::ostringstream msg;
                msg << "non-finite value during marching at node " << i << " (x =";
                for (int k = 0; k < d; ++k) msg << ' ' << tables.nodes[i](k);
                msg << "), t = " << grid.time(n);
                throw Error(ErrorKind::numerical, msg.str());
            }
        }
        if (policy_out) {
            std::copy(choice.begin(), choice.end(),
                      policy_out->choice.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(n) * N));
        }
        account(cur);
        if (options.keep_history) {
            store_level(field, lat, static_cast<std::size_t>(n), cur);
        } else if (n == 0) {
            store_level(field, lat, 0, cur);
        }
        next.swap(cur);
    }
    field.sup_norm = sup;
    field.lipschitz_x_estimate = lip;
    return field;
}

}  // namespace

std::size_t ValueField::row(int level) const {
    if (full_history()) {
        if (level < 0 || level > grid.nt) throw Error(ErrorKind::domain, "time level out of range");
        return static_cast<std::size_t>(level);
    }
    const auto it = std::find(levels.begin(), levels.end(), level);
    if (it == levels.end()) throw Error(ErrorKind::domain, "time level " + std::to_string(level) + " not kept");
    return static_cast<std::size_t>(it - levels.begin());
}

double ValueField::value(int level, std::size_t node) const {
    return values[row(level) * grid.node_count() + node];
}

Vec ValueField::gradient(int level, std::size_t node) const {
    const std::size_t d = static_cast<std::size_t>(grid.dim);
    const std::size_t base = (row(level) * grid.node_count() + node) * d;
    Vec g(grid.dim);
    for (std::size_t k = 0; k < d; ++k) g(static_cast<Eigen::Index>(k)) = gradients[base + k];
    return g;
}

Mat ValueField::hessian(int level, std::size_t node) const {
    const Lattice lat(grid);
    return lat.stencil(values.data() + row(level) * grid.node_count(), node).hess;
}

double hamiltonian_delta(const MollifiedProblem& mp, const Vec& x, double y, const Vec& p, const Mat& A,
                         const ControlPoint& v, double delta) {
    const Vec b = mp.drift(x, v);
    const Mat sigma = mp.diffusion(x, v);
    Mat a = sigma * sigma.transpose();
    a.diagonal().array() += delta * delta;
    const double trace = (a * A).trace();
    const Vec z = sigma.transpose() * p;
    return 0.5 * trace + b.dot(p) + mp.driver(x, y, z, v);
}

SolveResult solve(const MollifiedProblem& mp, const Grid& grid, const SolveOptions& options) {
    SolveResult out;
    out.field = march(mp, grid, options, nullptr, options.keep_history ? &out.policy : nullptr);
    if (!options.keep_history) {
        out.policy.grid = grid;
        out.policy.delta = mp.delta();
    }
    return out;
}

ValueField solve_frozen(const MollifiedProblem& mp, const FeedbackPolicy& policy, const SolveOptions& options) {
    const std::size_t expected = static_cast<std::size_t>(policy.grid.nt) * policy.grid.node_count();
    if (policy.choice.size() != expected) throw Error(ErrorKind::domain, "policy does not cover its grid");
    const std::size_t K = mp.base().control_mesh.size();
    for (auto c : policy.choice) {
        if (c >= K) throw Error(ErrorKind::domain, "policy entry outside the control mesh");
    }
    return march(mp, policy.grid, options, &policy, nullptr);
}

double discrete_hamiltonian(const MollifiedProblem& mp, const ValueField& field, int level, std::size_t node,
                            std::size_t control) {
    if (!field.full_history()) throw Error(ErrorKind::domain, "discrete_hamiltonian needs the full history");
    if (level < 0 || level >= field.grid.nt) throw Error(ErrorKind::domain, "time level out of range");
    const Problem& p = mp.base();
    if (control >= p.control_mesh.size()) throw Error(ErrorKind::domain, "control index outside the mesh");
    const Lattice lat(field.grid);
    const double* V = field.values.data() + field.row(level + 1) * field.grid.node_count();
    const Lattice::Stencil s = lat.stencil(V, node);
    const Vec x = field.grid.node(node);
    const ControlPoint& v = p.control_mesh[control];
    const LocalCoefficients c = local_coefficients(mp, x, v);
    const double y = V[node];
    return scheme_operator(c, s, [&](const Vec& z) { return mp.driver(x, y, z, v); });
}

Interpolated interpolate(const ValueField& field, double t, const Vec& x) {
    const Grid& g = field.grid;
    const double eps = 1e-12 * std::max(1.0, std::abs(g.T));
    if (t < g.t0 - eps || t > g.T + eps) throw Error(ErrorKind::domain, "interpolation time outside [t0, T]");
    if (x.size() != g.dim) throw Error(ErrorKind::domain, "interpolation point has wrong dimension");

    // Time bracket.
    double s = (t - g.t0) / g.dt();
    s = std::clamp(s, 0.0, static_cast<double>(g.nt));
    int n0 = std::min(static_cast<int>(std::floor(s)), g.nt - 1);
    double wt = s - n0;
    if (wt <= 0.0) {
        wt = 0.0;
    } else if (wt >= 1.0) {
        n0 += 1;
        wt = 0.0;
    }

    Interpolated out;
    out.gradient = Vec::Zero(g.dim);

    // Space bracket per axis.
    std::array<int, kMaxDim> lo{0, 0};
    std::array<int, kMaxDim> hi{0, 0};
    std::array<double, kMaxDim> w{0.0, 0.0};
    for (int k = 0; k < g.dim; ++k) {
        const double h = g.dx(k);
        double u = (x(k) - g.box_lo(k)) / h;
        if (g.periodic[k]) {
            u = std::fmod(u, static_cast<double>(g.nx[k]));
            if (u < 0.0) u += g.nx[k];
            int i0 = static_cast<int>(std::floor(u));
            if (i0 >= g.nx[k]) i0 = g.nx[k] - 1;
            lo[k] = i0;
            hi[k] = (i0 + 1) % g.nx[k];
            w[k] = u - i0;
        } else {
            const double umax = g.nx[k] - 1;
            if (u < 0.0 || u > umax) {
                out.clamped = true;
                u = std::clamp(u, 0.0, umax);
            }
            int i0 = std::min(static_cast<int>(std::floor(u)), g.nx[k] - 2);
            lo[k] = i0;
            hi[k] = i0 + 1;
            w[k] = u - i0;
        }
    }

    auto spatial = [&](int level, double& value, Vec& grad) {
        value = 0.0;
        grad = Vec::Zero(g.dim);
        const int corners = 1 << g.dim;
        for (int c = 0; c < corners; ++c) {
            std::array<int, kMaxDim> idx{0, 0};
            double weight = 1.0;
            for (int k = 0; k < g.dim; ++k) {
                const bool up = (c >> k) & 1;
                idx[k] = up ? hi[k] : lo[k];
                weight *= up ? w[k] : 1.0 - w[k];
            }
            if (weight == 0.0) continue;
            const std::size_t node = g.ravel(idx);
            value += weight * field.value(level, node);
            grad += weight * field.gradient(level, node);
        }
    };

    double v0 = 0.0;
    Vec g0;
    spatial(n0, v0, g0);
    if (wt == 0.0) {
        out.value = v0;
        out.gradient = g0;
        return out;
    }
    double v1 = 0.0;
    Vec g1;
    spatial(n0 + 1, v1, g1);
    out.value = (1.0 - wt) * v0 + wt * v1;
    out.gradient = (1.0 - wt) * g0 + wt * g1;
    return out;
}

HolderEnvelopes holder_envelopes(const ValueField& field) {
    const Grid& g = field.grid;
    const Lattice lat(g);
    const std::size_t N = g.node_count();
    HolderEnvelopes env;
    for (std::size_t r = 0; r < field.levels.size(); ++r) {
        env.lip_x = std::max(env.lip_x, lat.neighbor_lipschitz(field.values.data() + r * N));
    }

    std::set<int> lags;
    for (int k = 1; k <= 6; ++k) {
        const int lag = static_cast<int>(std::lround(g.nt / std::pow(2.0, k)));
        if (lag >= 1) lags.insert(lag);
    }
    std::vector<double> norm(N);
    for (std::size_t i = 0; i < N; ++i) norm[i] = 1.0 + g.node(i).norm();
    for (int lag : lags) {
        const double root = std::sqrt(lag * g.dt());
        for (std::size_t a = 0; a < field.levels.size(); ++a) {
            const int target = field.levels[a] + lag;
            const auto it = std::lower_bound(field.levels.begin(), field.levels.end(), target);
            if (it == field.levels.end() || *it != target) continue;
            const std::size_t b = static_cast<std::size_t>(it - field.levels.begin());
            for (std::size_t i = 0; i < N; ++i) {
                const double dv = std::abs(field.values[b * N + i] - field.values[a * N + i]);
                env.holder_t = std::max(env.holder_t, dv / (norm[i] * root));
            }
        }
    }
    return env;
}

FeedbackPolicy random_policy(const Grid& grid, double delta, std::size_t n_controls, std::uint64_t seed) {
    if (n_controls == 0) throw Error(ErrorKind::domain, "random policy needs a nonempty mesh");
    FeedbackPolicy pol;
    pol.grid = grid;
    pol.delta = delta;
    pol.choice.resize(static_cast<std::size_t>(grid.nt) * grid.node_count());
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n_controls - 1);
    for (auto& c : pol.choice) c = static_cast<std::uint16_t>(pick(rng));
    return pol;
}

}  // namespace fbctl
