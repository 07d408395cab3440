#include "fbctl/fbsde.hpp"

#include "fbctl/error.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace fbctl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::size_t lookup_policy(const FeedbackPolicy& pol, double t, const Vec& x) {
    const Grid& g = pol.grid;
    int level = static_cast<int>(std::floor((t - g.t0) / g.dt() + 1e-9));
    level = std::clamp(level, 0, g.nt - 1);
    std::array<int, kMaxDim> idx{0, 0};
    for (int k = 0; k < g.dim; ++k) {
        long i = std::lround((x(k) - g.box_lo(k)) / g.dx(k));
        if (g.periodic[k]) {
            i %= g.nx[k];
            if (i < 0) i += g.nx[k];
        } else {
            i = std::clamp<long>(i, 0, g.nx[k] - 1);
        }
        idx[k] = static_cast<int>(i);
    }
    return pol.at(level, g.ravel(idx));
}

// Clamp non-periodic coordinates into the box; true if anything moved.
bool clamp_to_box(const Grid& g, Vec& x) {
    bool moved = false;
    for (int k = 0; k < g.dim; ++k) {
        if (g.periodic[k]) continue;
        if (x(k) < g.box_lo(k)) {
            x(k) = g.box_lo(k);
            moved = true;
        } else if (x(k) > g.box_hi(k)) {
            x(k) = g.box_hi(k);
            moved = true;
        }
    }
    return moved;
}

void put(std::vector<double>& store, std::size_t slot, const Vec& v) {
    for (Eigen::Index k = 0; k < v.size(); ++k) store[slot * static_cast<std::size_t>(v.size()) + static_cast<std::size_t>(k)] = v(k);
}

Vec get(const std::vector<double>& store, std::size_t slot, int d) {
    Vec v(d);
    for (int k = 0; k < d; ++k) v(k) = store[slot * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)];
    return v;
}

// Least squares on a fixed design: standardized monomials of total degree
// <= degree in the coordinates that actually spread, plus an optional extra
// column.  A cloud with no spread reduces to the sample mean.
class Regressor {
public:
    Regressor(const Eigen::MatrixXd& X, const Eigen::VectorXd* extra, int degree, int step) {
        const Eigen::Index n = X.rows();
        std::vector<Eigen::VectorXd> cols;
        std::vector<Eigen::VectorXd> live;
        for (Eigen::Index k = 0; k < X.cols(); ++k) {
            const double mean = X.col(k).mean();
            const double sd = std::sqrt((X.col(k).array() - mean).square().mean());
            if (sd > 1e-12 * (1.0 + std::abs(mean))) live.push_back((X.col(k).array() - mean) / sd);
        }
        cols.push_back(Eigen::VectorXd::Ones(n));
        if (live.size() == 1) {
            for (int p = 1; p <= degree; ++p) cols.push_back(live[0].array().pow(p));
        } else if (live.size() == 2) {
            for (int p = 1; p <= degree; ++p) {
                for (int a = p; a >= 0; --a) cols.push_back(live[0].array().pow(a) * live[1].array().pow(p - a));
            }
        }
        description_ = std::to_string(live.size()) + " live coordinates, degree " + std::to_string(degree);
        bool with_extra = false;
        if (extra && !live.empty()) {
            const double mean = extra->mean();
            const double sd = std::sqrt((extra->array() - mean).square().mean());
            if (sd > 1e-12 * (1.0 + std::abs(mean))) {
                cols.push_back((extra->array() - mean) / sd);
                with_extra = true;
            }
        }
        build(cols);
        if (rank_deficient_ && with_extra) {
            cols.pop_back();
            build(cols);
        } else if (with_extra) {
            description_ += " + terminal";
        }
        if (rank_deficient_) {
            std::ostringstream msg;
            msg << "regression matrix rank deficient at step " << step << " (basis: " << description_ << ")";
            throw Error(ErrorKind::numerical, msg.str());
        }
    }

    Eigen::VectorXd fit(const Eigen::VectorXd& target) const {
        const double lo = target.minCoeff();
        const double hi = target.maxCoeff();
        if (lo == hi) return Eigen::VectorXd::Constant(target.size(), lo);
        if (design_.cols() == 1) return Eigen::VectorXd::Constant(target.size(), target.mean());
        const Eigen::VectorXd coef = qr_.solve(target);
        return design_ * coef;
    }

private:
    void build(const std::vector<Eigen::VectorXd>& cols) {
        design_.resize(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) design_.col(static_cast<Eigen::Index>(j)) = cols[j];
        qr_.setThreshold(1e-10);
        qr_.compute(design_);
        rank_deficient_ = qr_.rank() < design_.cols();
    }

    Eigen::MatrixXd design_;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
    bool rank_deficient_ = false;
    std::string description_;
};

}  // namespace

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
    return splitmix64(splitmix64(seed) ^ (path * 0xD1B54A32D192ED03ULL));
}

const char* to_string(CostMethod m) {
    return m == CostMethod::frozen_pde ? "frozen-pde" : "regression-mc";
}

Vec PathBundle::state(int path, int step) const { return get(x, index(path, step), dim); }
Vec PathBundle::z_at(int path, int step) const { return get(z, index(path, step), dim); }
Vec PathBundle::dw(int path, int step) const {
    return get(dW, static_cast<std::size_t>(path) * static_cast<std::size_t>(steps) + static_cast<std::size_t>(step), dim);
}
Vec PathBundle::db(int path, int step) const {
    return get(dB, static_cast<std::size_t>(path) * static_cast<std::size_t>(steps) + static_cast<std::size_t>(step), dim);
}

int simulation_steps(const Problem& p, const SimConfig& cfg) {
    const double span = p.horizon - p.start_t;
    if (cfg.n_paths < 1) throw Error(ErrorKind::domain, "n_paths must be >= 1");
    if (!(cfg.dt > 0.0)) throw Error(ErrorKind::domain, "dt must be positive");
    if (cfg.dt > span / 10.0 * (1.0 + 1e-12)) throw Error(ErrorKind::domain, "dt must not exceed horizon / 10");
    if (cfg.delta < 0.0) throw Error(ErrorKind::domain, "delta must be non-negative");
    return std::max(10, static_cast<int>(std::lround(span / cfg.dt)));
}

PathBundle simulate_forward(const MollifiedProblem& mp, const ControlLaw& law, const SimConfig& cfg,
                            const ValueField* field) {
    const Problem& p = mp.base();
    const int steps = simulation_steps(p, cfg);
    if (cfg.delta != mp.delta()) throw Error(ErrorKind::domain, "SimConfig delta differs from the problem's delta");
    const std::size_t K = p.control_mesh.size();
    if (law.fixed && *law.fixed >= K) throw Error(ErrorKind::domain, "fixed control outside the mesh");
    if (!law.fixed && !law.policy) throw Error(ErrorKind::domain, "control law needs a fixed atom or a policy");
    if (field && !field->full_history()) throw Error(ErrorKind::domain, "value field must keep all time levels");

    const Grid* box = law.policy ? &law.policy->grid : (field ? &field->grid : nullptr);
    const int d = p.dim;
    const double dt = (p.horizon - p.start_t) / steps;
    const double sqdt = std::sqrt(dt);
    const double delta = mp.delta();

    PathBundle b;
    b.dim = d;
    b.n_paths = cfg.n_paths;
    b.steps = steps;
    b.t0 = p.start_t;
    b.dt = dt;
    b.delta = delta;
    b.seed = cfg.seed;
    if (field) b.field_grid = field->grid;
    b.times.resize(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) b.times[static_cast<std::size_t>(k)] = p.start_t + k * dt;
    b.times.back() = p.horizon;

    const std::size_t n = static_cast<std::size_t>(cfg.n_paths);
    const std::size_t sd = static_cast<std::size_t>(d);
    const std::size_t npts = n * (static_cast<std::size_t>(steps) + 1);
    const std::size_t ninc = n * static_cast<std::size_t>(steps);
    b.x.resize(npts * sd);
    if (field) {
        b.y.resize(npts);
        b.z.resize(npts * sd);
    }
    b.dW.resize(ninc * sd);
    b.dB.resize(ninc * sd);
    b.control.resize(ninc);
    b.clamped.assign(n, 0);

    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < count; ++ii) {
        const std::size_t path = static_cast<std::size_t>(ii);
        std::mt19937_64 rng(path_seed(cfg.seed, path));
        std::normal_distribution<double> normal(0.0, 1.0);
        Vec x = p.start_x;
        Vec w(d);
        Vec bm(d);
        const std::size_t base = path * (static_cast<std::size_t>(steps) + 1);
        const std::size_t ibase = path * static_cast<std::size_t>(steps);
        std::size_t last = 0;
        for (int k = 0; k < steps; ++k) {
            const double t = b.times[static_cast<std::size_t>(k)];
            const std::size_t c = law.fixed ? *law.fixed : lookup_policy(*law.policy, t, x);
            last = c;
            const ControlPoint& v = p.control_mesh[c];
            for (int j = 0; j < d; ++j) w(j) = sqdt * normal(rng);
            for (int j = 0; j < d; ++j) bm(j) = sqdt * normal(rng);
            const Vec drift = mp.drift(x, v);
            const Mat sigma = mp.diffusion(x, v);
            put(b.x, base + static_cast<std::size_t>(k), x);
            if (field) {
                const Interpolated vi = interpolate(*field, t, x);
                b.y[base + static_cast<std::size_t>(k)] = vi.value;
                put(b.z, base + static_cast<std::size_t>(k), sigma.transpose() * vi.gradient);
            }
            put(b.dW, ibase + static_cast<std::size_t>(k), w);
            put(b.dB, ibase + static_cast<std::size_t>(k), bm);
            b.control[ibase + static_cast<std::size_t>(k)] = static_cast<std::uint16_t>(c);
            x += drift * dt + sigma * w + delta * bm;
            if (box && clamp_to_box(*box, x)) b.clamped[path] = 1;
        }
        put(b.x, base + static_cast<std::size_t>(steps), x);
        if (field) {
            const Interpolated vi = interpolate(*field, b.times.back(), x);
            b.y[base + static_cast<std::size_t>(steps)] = vi.value;
            const Mat sigma = mp.diffusion(x, p.control_mesh[last]);
            put(b.z, base + static_cast<std::size_t>(steps), sigma.transpose() * vi.gradient);
        }
    }
    b.clamped_count = static_cast<int>(std::count(b.clamped.begin(), b.clamped.end(), 1));
    b.tainted = b.clamped_count * 100 > cfg.n_paths;
    return b;
}

FrozenCost evaluate_cost_frozen(const MollifiedProblem& mp, const FeedbackPolicy& policy,
                                const SolveOptions& options) {
    FrozenCost out;
    out.field = solve_frozen(mp, policy, options);
    const Problem& p = mp.base();
    out.estimate.value = interpolate(out.field, p.start_t, p.start_x).value;
    out.estimate.std_error = 0.0;
    out.estimate.method = CostMethod::frozen_pde;
    return out;
}

CostEstimate evaluate_cost_mc(const MollifiedProblem& mp, const ControlLaw& law, const SimConfig& cfg,
                              const BasisSpec& basis) {
    if (basis.degree < 0 || basis.degree > 3) throw Error(ErrorKind::domain, "basis degree must be in 0..3");
    const Problem& p = mp.base();
    const PathBundle b = simulate_forward(mp, law, cfg, nullptr);
    const int d = p.dim;
    const Eigen::Index n = b.n_paths;
    const bool use_terminal = basis.include_terminal && p.terminal.depends.x;

    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) Y(i) = mp.terminal(b.state(static_cast<int>(i), b.steps));

    Eigen::MatrixXd X(n, d);
    Eigen::VectorXd phi(n);
    Eigen::VectorXd E(n);
    Eigen::VectorXd target(n);
    std::vector<Eigen::VectorXd> Z(static_cast<std::size_t>(d), Eigen::VectorXd(n));
    // Pathwise cumulative target Phi(X_T) + sum_k f_k dt.  With an intercept
    // column the fitted mean equals the target mean at every step, so the
    // estimate is the sample mean of this quantity.
    Eigen::VectorXd cumulative = Y;
    for (int k = b.steps - 1; k >= 0; --k) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const Vec xi = b.state(static_cast<int>(i), k);
            for (int j = 0; j < d; ++j) X(i, j) = xi(j);
            if (use_terminal) phi(i) = mp.terminal(xi);
        }
        const Regressor reg(X, use_terminal ? &phi : nullptr, basis.degree, k);
        for (int j = 0; j < d; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) target(i) = Y(i) * b.dw(static_cast<int>(i), k)(j) / b.dt;
            Z[static_cast<std::size_t>(j)] = reg.fit(target);
        }
        E = reg.fit(Y);
        Vec z(d);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) z(j) = Z[static_cast<std::size_t>(j)](i);
            const ControlPoint& v = p.control_mesh[b.control_at(static_cast<int>(i), k)];
            const double fdt = mp.driver(b.state(static_cast<int>(i), k), E(i), z, v) * b.dt;
            target(i) = Y(i) + fdt;
            cumulative(i) += fdt;
        }
        Y = reg.fit(target);
    }
    double std_error = 0.0;
    if (n > 1 && cumulative.minCoeff() != cumulative.maxCoeff()) {
        const double mean = cumulative.mean();
        std_error = std::sqrt((cumulative.array() - mean).square().sum() / static_cast<double>(n - 1) /
                              static_cast<double>(n));
    }
    CostEstimate est;
    est.value = Y.minCoeff() == Y.maxCoeff() ? Y(0) : Y.mean();
    est.std_error = std_error;
    est.method = CostMethod::regression_mc;
    est.n_paths = b.n_paths;
    return est;
}

IdentityReport check_value_identity(const MollifiedProblem& mp, const ValueField& field, const PathBundle& bundle) {
    if (!bundle.field_grid || !bundle.field_grid->same_shape(field.grid) || bundle.y.empty()) {
        throw Error(ErrorKind::domain, "bundle was not generated on this field's grid");
    }
    const Problem& p = mp.base();
    IdentityReport rep;
    rep.tainted = bundle.tainted;
    double total = 0.0;
    for (int path = 0; path < bundle.n_paths; ++path) {
        if (bundle.clamped[static_cast<std::size_t>(path)]) {
            ++rep.paths_excluded;
            continue;
        }
        double sum = 0.0;
        for (int k = 0; k < bundle.steps; ++k) {
            const Vec x = bundle.state(path, k);
            const double y = bundle.value(path, k);
            const Vec z = bundle.z_at(path, k);
            const ControlPoint& v = p.control_mesh[bundle.control_at(path, k)];
            const Vec grad = interpolate(field, bundle.times[static_cast<std::size_t>(k)], x).gradient;
            sum += bundle.value(path, k + 1) - y + mp.driver(x, y, z, v) * bundle.dt - z.dot(bundle.dw(path, k)) -
                   bundle.delta * grad.dot(bundle.db(path, k));
        }
        const double a = std::abs(sum);
        rep.max_abs = std::max(rep.max_abs, a);
        total += a;
        ++rep.paths_used;
    }
    rep.mean_abs = rep.paths_used > 0 ? total / rep.paths_used : 0.0;
    return rep;
}

AuxiliaryPaths simulate_auxiliary(const Problem& p, const MollifiedProblem& mp, const ValueField& field,
                                  const FeedbackPolicy& policy, const SimConfig& cfg, double reference_value) {
    AuxiliaryPaths out;
    out.reference_value = reference_value;
    out.mollified = simulate_forward(mp, ControlLaw::feedback(policy), cfg, &field);
    PathBundle& md = out.mollified;
    const double v0 = interpolate(field, p.start_t, p.start_x).value;
    out.reference_gap = std::abs(v0 - reference_value);

    const MollifiedProblem raw = unmollified(p);
    PathBundle aux = md;
    aux.delta = 0.0;
    std::fill(aux.clamped.begin(), aux.clamped.end(), 0);
    const Grid& box = policy.grid;
    const int d = p.dim;
    const std::size_t sd = static_cast<std::size_t>(d);
    const double dt = md.dt;
    const double delta = mp.delta();

    const long long count = md.n_paths;
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < count; ++ii) {
        const int path = static_cast<int>(ii);
        const std::size_t base = static_cast<std::size_t>(path) * (static_cast<std::size_t>(md.steps) + 1);
        double yd = v0;
        double yn = reference_value;
        Vec xn = p.start_x;
        for (int k = 0; k < md.steps; ++k) {
            const std::size_t slot = base + static_cast<std::size_t>(k);
            const Vec xd = md.state(path, k);
            const ControlPoint& v = p.control_mesh[md.control_at(path, k)];
            const Vec w = interpolate(field, md.times[static_cast<std::size_t>(k)], xd).gradient;
            const Vec dw = md.dw(path, k);
            const Vec db = md.db(path, k);

            // Mollified system: Y^delta integrated forward along X^delta.
            const Vec zd = md.z_at(path, k);
            md.y[slot] = yd;
            yd = yd - mp.driver(xd, yd, zd, v) * dt + zd.dot(dw) + delta * w.dot(db);

            // Auxiliary system with the raw coefficients.
            const Vec bn = raw.drift(xn, v);
            const Mat sn = raw.diffusion(xn, v);
            const Vec zn = sn.transpose() * w;
            for (std::size_t j = 0; j < sd; ++j) aux.x[slot * sd + j] = xn(static_cast<Eigen::Index>(j));
            aux.y[slot] = yn;
            for (std::size_t j = 0; j < sd; ++j) aux.z[slot * sd + j] = zn(static_cast<Eigen::Index>(j));
            yn = yn - raw.driver(xn, yn, zn, v) * dt + zn.dot(dw);
            xn += bn * dt + sn * dw;
            if (clamp_to_box(box, xn)) aux.clamped[static_cast<std::size_t>(path)] = 1;
        }
        const std::size_t slot = base + static_cast<std::size_t>(md.steps);
        md.y[slot] = yd;
        for (std::size_t j = 0; j < sd; ++j) aux.x[slot * sd + j] = xn(static_cast<Eigen::Index>(j));
        aux.y[slot] = yn;
    }
    aux.clamped_count = static_cast<int>(std::count(aux.clamped.begin(), aux.clamped.end(), 1));
    aux.tainted = aux.clamped_count * 100 > aux.n_paths;
    out.auxiliary = std::move(aux);
    return out;
}

CouplingMoments coupling_moments(const PathBundle& a, const PathBundle& b) {
    if (a.n_paths != b.n_paths || a.steps != b.steps || a.dim != b.dim) {
        throw Error(ErrorKind::domain, "bundles have different shapes");
    }
    const bool with_y = !a.y.empty() && !b.y.empty();
    const int n = a.n_paths;
    std::vector<double> sx(static_cast<std::size_t>(n), 0.0);
    std::vector<double> sy(static_cast<std::size_t>(n), 0.0);
    for (int path = 0; path < n; ++path) {
        for (int k = 0; k <= a.steps; ++k) {
            sx[static_cast<std::size_t>(path)] =
                std::max(sx[static_cast<std::size_t>(path)], (a.state(path, k) - b.state(path, k)).squaredNorm());
            if (with_y) {
                const double dy = a.value(path, k) - b.value(path, k);
                sy[static_cast<std::size_t>(path)] = std::max(sy[static_cast<std::size_t>(path)], dy * dy);
            }
        }
    }
    auto moments = [n](const std::vector<double>& s, double& mean, double& se) {
        double sum = 0.0;
        for (double v : s) sum += v;
        mean = sum / n;
        double ss = 0.0;
        for (double v : s) ss += (v - mean) * (v - mean);
        se = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
    };
    CouplingMoments m;
    m.n_paths = n;
    moments(sx, m.sup_x_sq, m.sup_x_sq_se);
    moments(sy, m.sup_y_sq, m.sup_y_sq_se);
    return m;
}

}  // namespace fbctl
