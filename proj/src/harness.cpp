#include "fbctl/harness.hpp"

#include "fbctl/convexity.hpp"
#include "fbctl/error.hpp"
#include "fbctl/io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace fbctl {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kInteriorMargin = 0.1;

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

double parse_double(const std::string& s, const std::string& field) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw Error(ErrorKind::config, "not a number: '" + s + "'", field);
    }
    if (used != s.size()) throw Error(ErrorKind::config, "not a number: '" + s + "'", field);
    return v;
}

int parse_int(const std::string& s, const std::string& field) {
    const double v = parse_double(s, field);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw Error(ErrorKind::config, "not an integer: '" + s + "'", field);
    return static_cast<int>(v);
}

int max_required_nt(const Problem& p, const GridSpec& spec, const std::vector<double>& deltas) {
    int nt = 1;
    for (double d : deltas) nt = std::max(nt, make_grid(p, spec, d).nt);
    return nt;
}

}  // namespace

GridSpec grid_spec(const json& config, const std::string& flags) {
    GridSpec spec;
    if (config.is_object() && config.contains("grid")) {
        const json& g = config.at("grid");
        if (!g.is_object()) throw Error(ErrorKind::config, "grid must be an object", "grid");
        if (g.contains("nx")) spec.nx = g.at("nx").get<int>();
        if (g.contains("nt")) spec.nt = g.at("nt").get<int>();
        if (g.contains("box")) {
            const json& b = g.at("box");
            if (!b.is_array() || b.size() != 2) throw Error(ErrorKind::config, "grid.box must be [lo, hi]", "grid.box");
            spec.box = std::make_pair(b[0].get<double>(), b[1].get<double>());
        }
        if (g.contains("periodic")) spec.periodic = g.at("periodic").get<bool>();
    }
    for (const std::string& item : split(flags, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::config, "grid flag needs key=value: '" + item + "'", "grid");
        const std::string key = item.substr(0, eq);
        const std::string val = item.substr(eq + 1);
        if (key == "nx") {
            spec.nx = parse_int(val, "grid.nx");
        } else if (key == "nt") {
            spec.nt = parse_int(val, "grid.nt");
        } else if (key == "box") {
            const auto colon = val.find(':', 1);
            if (colon == std::string::npos) throw Error(ErrorKind::config, "grid box must be lo:hi", "grid.box");
            spec.box = std::make_pair(parse_double(val.substr(0, colon), "grid.box"),
                                      parse_double(val.substr(colon + 1), "grid.box"));
        } else if (key == "periodic") {
            spec.periodic = parse_int(val, "grid.periodic") != 0;
        } else {
            throw Error(ErrorKind::config, "unknown grid key '" + key + "'", "grid");
        }
    }
    if (spec.nx < 3) throw Error(ErrorKind::config, "grid needs nx >= 3", "grid.nx");
    if (spec.nt && *spec.nt < 1) throw Error(ErrorKind::config, "grid needs nt >= 1", "grid.nt");
    return spec;
}

MollifiedProblem mollified_view(const Problem& p, double delta, int quad_nodes) {
    if (delta < 0.0) throw Error(ErrorKind::config, "delta must be non-negative", "delta");
    return delta == 0.0 ? unmollified(p) : mollify_problem(p, delta, quad_nodes);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw Error(ErrorKind::domain, "slope fit needs two or more points");
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw Error(ErrorKind::domain, "slope fit needs distinct abscissae");
    return sxy / sxx;
}

std::vector<double> parse_ladder(const std::string& text) {
    std::vector<double> out;
    for (const std::string& s : split(text, ',')) out.push_back(parse_double(s, "ladder"));
    return out;
}

RateReport run_rate_study(const Problem& p, const std::vector<double>& ladder, const GridSpec& spec, int quad_nodes) {
    if (ladder.size() < 3) throw Error(ErrorKind::config, "ladder too short: need at least 3 deltas", "ladder");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (!(ladder[i] > 0.0 && ladder[i] <= 1.0)) throw Error(ErrorKind::config, "ladder deltas must lie in (0, 1]", "ladder");
        if (i > 0 && !(ladder[i] < ladder[i - 1])) throw Error(ErrorKind::config, "ladder must be strictly decreasing", "ladder");
    }
    GridSpec shared = spec;
    if (!shared.nt) shared.nt = max_required_nt(p, spec, ladder);
    const Grid grid = make_grid(p, shared, ladder.front());
    const SolveOptions lean{false};
    auto value_at_start = [&](const MollifiedProblem& mp, const Grid& g) {
        const SolveResult r = solve(mp, g, lean);
        return interpolate(r.field, p.start_t, p.start_x).value;
    };

    RateReport rep;
    rep.grid = grid;
    rep.deltas = ladder;
    rep.reference = value_at_start(unmollified(p), grid);

    GridSpec fine = spec;
    fine.nx = spec.periodic ? 2 * spec.nx : 2 * spec.nx - 1;
    fine.nt.reset();
    const Grid fine_grid = make_grid(p, fine, 0.0);
    rep.refined_nx = fine.nx;
    rep.grid_error_floor = std::abs(value_at_start(unmollified(p), fine_grid) - rep.reference);

    std::vector<double> fx;
    std::vector<double> fy;
    for (double delta : ladder) {
        const double v = value_at_start(mollify_problem(p, delta, quad_nodes), grid);
        const double gap = std::abs(v - rep.reference);
        rep.values.push_back(v);
        rep.gaps.push_back(gap);
        if (gap >= 10.0 * rep.grid_error_floor && gap > 0.0) {
            fx.push_back(delta);
            fy.push_back(gap);
        }
    }
    rep.points_used = static_cast<int>(fx.size());
    if (fx.size() >= 2) {
        rep.fitted_slope = loglog_slope(fx, fy);
    } else {
        rep.inconclusive = true;
    }
    return rep;
}

GapReport run_optimality_gap(const Problem& p, double delta, int n_challengers, std::uint64_t seed,
                             const GridSpec& spec, int quad_nodes) {
    if (n_challengers < 0) throw Error(ErrorKind::config, "challenger count must be non-negative", "challengers");
    const MollifiedProblem mp = mollified_view(p, delta, quad_nodes);
    const Grid grid = make_grid(p, spec, delta);
    const SolveResult opt = solve(mp, grid);
    const FrozenCost own = evaluate_cost_frozen(mp, opt.policy);

    GapReport rep;
    rep.grid = grid;
    rep.optimal_value = interpolate(opt.field, p.start_t, p.start_x).value;
    rep.frozen_value = own.estimate.value;
    for (std::size_t i = 0; i < opt.field.values.size(); ++i) {
        rep.frozen_max_deviation = std::max(rep.frozen_max_deviation, std::abs(own.field.values[i] - opt.field.values[i]));
    }
    std::vector<bool> interior(grid.node_count());
    for (std::size_t i = 0; i < interior.size(); ++i) interior[i] = grid.in_interior(i, kInteriorMargin);
    for (int c = 0; c < n_challengers; ++c) {
        const std::uint64_t cseed = path_seed(seed, static_cast<std::uint64_t>(c));
        const FeedbackPolicy u = random_policy(grid, delta, p.control_mesh.size(), cseed);
        const FrozenCost cost = evaluate_cost_frozen(mp, u);
        rep.challenger_values.emplace_back(cseed, cost.estimate.value);
        const double gap = cost.estimate.value - rep.frozen_value;
        rep.min_gap = rep.min_gap ? std::min(*rep.min_gap, gap) : gap;
        double nodewise = std::numeric_limits<double>::infinity();
        const std::size_t N = grid.node_count();
        for (std::size_t i = 0; i < cost.field.values.size(); ++i) {
            if (!interior[i % N]) continue;
            nodewise = std::min(nodewise, cost.field.values[i] - own.field.values[i]);
        }
        rep.min_nodewise_gap = rep.min_nodewise_gap ? std::min(*rep.min_nodewise_gap, nodewise) : nodewise;
    }
    return rep;
}

CouplingReport run_coupling_study(const Problem& p, const std::vector<double>& ladder, const GridSpec& spec,
                                  const SimConfig& sim, int quad_nodes) {
    if (ladder.empty()) throw Error(ErrorKind::config, "ladder is empty", "ladder");
    for (double d : ladder) {
        if (!(d >= 0.0 && d <= 1.0)) throw Error(ErrorKind::config, "ladder deltas must lie in [0, 1]", "ladder");
    }
    GridSpec shared = spec;
    if (!shared.nt) shared.nt = max_required_nt(p, spec, ladder);
    const Grid grid = make_grid(p, shared, 0.0);

    CouplingReport rep;
    rep.grid = grid;
    {
        const SolveResult ref = solve(unmollified(p), grid, SolveOptions{false});
        rep.reference_value = interpolate(ref.field, p.start_t, p.start_x).value;
    }
    std::vector<double> fx;
    std::vector<double> fy;
    for (double delta : ladder) {
        const MollifiedProblem mp = mollified_view(p, delta, quad_nodes);
        const SolveResult r = solve(mp, grid);
        SimConfig cfg = sim;
        cfg.delta = delta;
        const AuxiliaryPaths aux = simulate_auxiliary(p, mp, r.field, r.policy, cfg, rep.reference_value);
        CouplingRow row;
        row.delta = delta;
        row.moments = coupling_moments(aux.mollified, aux.auxiliary);
        row.reference_gap = aux.reference_gap;
        row.tainted = aux.mollified.tainted || aux.auxiliary.tainted;
        rep.rows.push_back(row);
        if (delta > 0.0 && row.moments.sup_x_sq > 0.0) {
            fx.push_back(delta);
            fy.push_back(row.moments.sup_x_sq);
            rep.K_hat = std::max(rep.K_hat, row.moments.sup_x_sq / delta);
        }
    }
    if (fx.size() >= 2) rep.slope_x = loglog_slope(fx, fy);
    return rep;
}

namespace {

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::domain: return 2;
        case ErrorKind::stability: return 3;
        case ErrorKind::inconclusive: return 4;
        case ErrorKind::numerical: return 1;
    }
    return 1;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct CliState {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    double delta = 0.1;
    std::string grid_flags;
    int quad_nodes = 9;

    json raw_config;
    Problem problem;
    GridSpec spec;

    void load() {
        if (config_path.empty()) throw Error(ErrorKind::config, "--config is required", "config");
        std::ifstream is(config_path);
        if (!is) throw Error(ErrorKind::config, "config not found: " + config_path, "config");
        try {
            raw_config = json::parse(is);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::config, std::string("config is not valid JSON: ") + e.what(), "config");
        }
        problem = load_problem(raw_config);
        spec = grid_spec(raw_config, grid_flags);
        std::filesystem::create_directories(out_dir);
    }

    std::filesystem::path out(const std::string& name) const { return std::filesystem::path(out_dir) / name; }

    void write_run_json(const std::string& command, const json& extra) const {
        json run;
        run["command"] = command;
        run["version"] = kVersion;
        run["timestamp"] = utc_timestamp();
        run["config_path"] = config_path;
        run["config"] = raw_config;
        run["resolved"] = {{"name", problem.name},
                           {"dimension", problem.dim},
                           {"bounds", {{"M", problem.bound_M}, {"C", problem.lipschitz_C}, {"F", problem.bound_fphi}}},
                           {"control_atoms", problem.control_mesh.size()}};
        run["flags"] = {{"seed", seed}, {"delta", delta}, {"grid", grid_flags}, {"quad_nodes", quad_nodes}};
        run["result"] = extra;
        write_json(out("run.json"), run);
    }
};

template <class Writer>
void write_csv(const std::filesystem::path& path, Writer&& writer) {
    std::ostringstream os;
    writer(os);
    write_text(path, os.str());
}

int cmd_solve(CliState& s, int stride_flag) {
    s.load();
    const MollifiedProblem mp = mollified_view(s.problem, s.delta, s.quad_nodes);
    const Grid grid = make_grid(s.problem, s.spec, s.delta);
    const SolveResult r = solve(mp, grid);
    const double v = interpolate(r.field, s.problem.start_t, s.problem.start_x).value;
    const int stride = stride_flag > 0 ? stride_flag : std::max(1, (grid.nt + 99) / 100);
    write_csv(s.out("value.csv"), [&](std::ostream& os) { write_value_csv(os, r.field, stride); });
    write_csv(s.out("policy.csv"), [&](std::ostream& os) { write_policy_csv(os, r.policy, stride); });
    json fside = field_sidecar(r.field);
    fside["level_stride"] = stride;
    write_json(s.out("value.json"), fside);
    write_json(s.out("policy.json"), policy_sidecar(r.policy));
    s.write_run_json("solve", {{"value", v}, {"grid", to_json(grid)}});
    std::cout << format_number(v) << '\n';
    return 0;
}

int cmd_simulate(CliState& s, int n_paths, double dt) {
    s.load();
    const MollifiedProblem mp = mollified_view(s.problem, s.delta, s.quad_nodes);
    const Grid grid = make_grid(s.problem, s.spec, s.delta);
    const SolveResult r = solve(mp, grid);
    SimConfig cfg{n_paths, dt, s.seed, s.delta};
    const PathBundle b = simulate_forward(mp, ControlLaw::feedback(r.policy), cfg, &r.field);
    const IdentityReport id = check_value_identity(mp, r.field, b);
    const FrozenCost frozen = evaluate_cost_frozen(mp, r.policy);
    const CostEstimate mc = evaluate_cost_mc(mp, ControlLaw::feedback(r.policy), cfg);
    write_csv(s.out("paths.csv"), [&](std::ostream& os) { write_paths_csv(os, b); });
    write_json(s.out("paths.json"), paths_sidecar(b));
    const json result = {{"frozen", to_json(frozen.estimate)}, {"regression_mc", to_json(mc)}, {"value_identity", to_json(id)}};
    write_json(s.out("cost.json"), result);
    s.write_run_json("simulate", result);
    std::cout << "frozen " << format_number(frozen.estimate.value) << " mc " << format_number(mc.value) << " +- "
              << format_number(mc.std_error) << '\n';
    return 0;
}

int cmd_rate(CliState& s, const std::string& ladder_text) {
    s.load();
    const RateReport rep = run_rate_study(s.problem, parse_ladder(ladder_text), s.spec, s.quad_nodes);
    write_csv(s.out("rate.csv"), [&](std::ostream& os) {
        os << "delta,value,gap\n";
        for (std::size_t i = 0; i < rep.deltas.size(); ++i) {
            os << format_number(rep.deltas[i]) << ',' << format_number(rep.values[i]) << ',' << format_number(rep.gaps[i]) << '\n';
        }
    });
    const json result = {{"deltas", rep.deltas},
                         {"values", rep.values},
                         {"gaps", rep.gaps},
                         {"reference", rep.reference},
                         {"grid_error_floor", rep.grid_error_floor},
                         {"fitted_slope", optional_number(rep.fitted_slope)},
                         {"points_used", rep.points_used},
                         {"inconclusive", rep.inconclusive},
                         {"grid", to_json(rep.grid)},
                         {"refined_nx", rep.refined_nx}};
    write_json(s.out("rate.json"), result);
    s.write_run_json("rate-study", result);
    if (rep.inconclusive) {
        std::cout << "inconclusive: grid-error floor " << format_number(rep.grid_error_floor) << '\n';
        return 4;
    }
    std::cout << "slope " << format_number(*rep.fitted_slope) << '\n';
    return 0;
}

int cmd_coupling(CliState& s, const std::string& ladder_text, int n_paths, double dt) {
    s.load();
    const SimConfig sim{n_paths, dt, s.seed, 0.0};
    const CouplingReport rep = run_coupling_study(s.problem, parse_ladder(ladder_text), s.spec, sim, s.quad_nodes);
    write_csv(s.out("coupling.csv"), [&](std::ostream& os) {
        os << "delta,sup_x_sq,sup_x_sq_se,sup_y_sq,sup_y_sq_se,reference_gap,tainted\n";
        for (const CouplingRow& r : rep.rows) {
            os << format_number(r.delta) << ',' << format_number(r.moments.sup_x_sq) << ','
               << format_number(r.moments.sup_x_sq_se) << ',' << format_number(r.moments.sup_y_sq) << ','
               << format_number(r.moments.sup_y_sq_se) << ',' << format_number(r.reference_gap) << ','
               << (r.tainted ? 1 : 0) << '\n';
        }
    });
    const json result = {{"slope_x", optional_number(rep.slope_x)},
                         {"K_hat", rep.K_hat},
                         {"reference_value", rep.reference_value},
                         {"grid", to_json(rep.grid)},
                         {"n_paths", n_paths},
                         {"dt", dt}};
    write_json(s.out("coupling.json"), result);
    s.write_run_json("coupling-study", result);
    std::cout << "slope " << (rep.slope_x ? format_number(*rep.slope_x) : std::string("null")) << '\n';
    return 0;
}

int cmd_gap(CliState& s, int challengers) {
    s.load();
    const GapReport rep = run_optimality_gap(s.problem, s.delta, challengers, s.seed, s.spec, s.quad_nodes);
    write_csv(s.out("gap.csv"), [&](std::ostream& os) {
        os << "policy_seed,value,gap\n";
        for (const auto& [seed, value] : rep.challenger_values) {
            os << seed << ',' << format_number(value) << ',' << format_number(value - rep.frozen_value) << '\n';
        }
    });
    json challengers_json = json::array();
    for (const auto& [seed, value] : rep.challenger_values) challengers_json.push_back({{"seed", seed}, {"value", value}});
    const json result = {{"optimal_value", rep.optimal_value},
                         {"frozen_value", rep.frozen_value},
                         {"frozen_max_deviation", rep.frozen_max_deviation},
                         {"challenger_values", challengers_json},
                         {"min_gap", optional_number(rep.min_gap)},
                         {"min_nodewise_gap", optional_number(rep.min_nodewise_gap)},
                         {"grid", to_json(rep.grid)}};
    write_json(s.out("gap.json"), result);
    s.write_run_json("optimality-gap", result);
    std::cout << "min_gap " << (rep.min_gap ? format_number(*rep.min_gap) : std::string("null")) << '\n';
    return 0;
}

int cmd_convexity(CliState& s, const std::string& assumption, const std::string& probe, std::optional<double> K,
                  double tol, int samples) {
    s.load();
    const Problem& p = s.problem;
    Vec x = p.start_x;
    double y = 0.0;
    for (const std::string& item : split(probe, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::config, "probe needs key=value", "probe");
        const std::string key = item.substr(0, eq);
        const std::string val = item.substr(eq + 1);
        if (key == "x") {
            const auto parts = split(val, ':');
            if (static_cast<int>(parts.size()) != p.dim) throw Error(ErrorKind::config, "probe x needs one value per dimension (a:b)", "probe");
            for (int k = 0; k < p.dim; ++k) x(k) = parse_double(parts[static_cast<std::size_t>(k)], "probe");
        } else if (key == "y") {
            y = parse_double(val, "probe");
        } else {
            throw Error(ErrorKind::config, "unknown probe key '" + key + "'", "probe");
        }
    }
    ConvexityReport rep;
    if (assumption == "h2") {
        try {
            rep = check_H2(p, x, y, tol, samples, s.seed);
        } catch (const Error& e) {
            throw Error(ErrorKind::config, e.what(), "assumption");
        }
    } else {
        double radius = 0.0;
        if (K) {
            radius = *K;
        } else {
            const MollifiedProblem mp = mollified_view(p, s.delta, s.quad_nodes);
            const SolveResult r = solve(mp, make_grid(p, s.spec, s.delta), SolveOptions{false});
            radius = r.field.lipschitz_x_estimate * p.bound_M;
            if (!(radius > 0.0)) radius = 1.0;
        }
        rep = check_H1(p, x, y, radius, samples, tol, s.seed);
    }
    const json result = to_json(rep);
    write_json(s.out("convexity.json"), result);
    s.write_run_json("check-convexity", result);
    std::cout << to_string(rep.verdict) << " deficiency " << format_number(rep.deficiency) << '\n';
    return rep.verdict == Verdict::inconclusive ? 4 : 0;
}

int cmd_audit(CliState& s, int samples) {
    s.load();
    const AssumptionReport rep = audit_assumptions(s.problem, samples, s.seed);
    const json result = to_json(rep);
    write_json(s.out("audit.json"), result);
    s.write_run_json("audit", result);
    std::cout << "estimated M " << format_number(rep.estimated_M) << " C " << format_number(rep.estimated_C) << " F "
              << format_number(rep.estimated_F) << " violations " << rep.violations.size() << '\n';
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Controlled FBSDE toolkit: HJB solves, path simulation, studies and audits"};
    app.require_subcommand(1);
    app.fallthrough();
    CliState s;
    app.add_option("--config", s.config_path, "Problem config (JSON)");
    app.add_option("--out", s.out_dir, "Output directory");
    app.add_option("--seed", s.seed, "Random seed");
    app.add_option("--delta", s.delta, "Mollification parameter")->check(CLI::Range(0.0, 1.0));
    app.add_option("--grid", s.grid_flags, "nx=..,nt=..,box=lo:hi,periodic=0|1");
    app.add_option("--quad-nodes", s.quad_nodes, "Mollifier quadrature nodes per dimension")->check(CLI::Range(1, 41));

    int stride = 0;
    auto* solve_cmd = app.add_subcommand("solve", "Solve the regularized HJB equation");
    solve_cmd->add_option("--time-stride", stride, "Write every k-th time level (default: about 100 levels)");

    int paths = 1000;
    double dt = 1e-3;
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate feedback-controlled paths");
    sim_cmd->add_option("--paths", paths, "Number of paths");
    sim_cmd->add_option("--dt", dt, "Euler step");

    std::string ladder = "0.4,0.2,0.1,0.05";
    auto* rate_cmd = app.add_subcommand("rate-study", "Fit the delta convergence rate");
    rate_cmd->add_option("--ladder", ladder, "Comma-separated deltas");

    auto* coupling_cmd = app.add_subcommand("coupling-study", "Coupling of the mollified and auxiliary systems");
    coupling_cmd->add_option("--ladder", ladder, "Comma-separated deltas");
    coupling_cmd->add_option("--paths", paths, "Number of paths");
    coupling_cmd->add_option("--dt", dt, "Euler step");

    int challengers = 20;
    auto* gap_cmd = app.add_subcommand("optimality-gap", "Compare the feedback policy with random challengers");
    gap_cmd->add_option("--challengers", challengers, "Number of random policies");

    std::string assumption = "h2";
    std::string probe;
    std::optional<double> K;
    double tol = 1e-6;
    int samples = 1000;
    auto* conv_cmd = app.add_subcommand("check-convexity", "Audit the convexity conditions at a probe");
    conv_cmd->add_option("--assumption", assumption, "h1 or h2")->check(CLI::IsMember({"h1", "h2"}));
    conv_cmd->add_option("--probe", probe, "x=..[:..],y=..");
    conv_cmd->add_option("--K", K, "Radius K (default: lip_x estimate times M)");
    conv_cmd->add_option("--tol", tol, "Tolerance");
    conv_cmd->add_option("--samples", samples, "Pairs (h2) or w samples (h1)");

    auto* audit_cmd = app.add_subcommand("audit", "Spot-check boundedness and Lipschitz constants");
    audit_cmd->add_option("--samples", samples, "Random probes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*solve_cmd) return cmd_solve(s, stride);
        if (*sim_cmd) return cmd_simulate(s, paths, dt);
        if (*rate_cmd) return cmd_rate(s, ladder);
        if (*coupling_cmd) return cmd_coupling(s, ladder, paths, dt);
        if (*gap_cmd) return cmd_gap(s, challengers);
        if (*conv_cmd) return cmd_convexity(s, assumption, probe, K, tol, samples);
        if (*audit_cmd) return cmd_audit(s, samples);
    } catch (const Error& e) {
        json err = {{"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}};
        if (!e.field().empty()) err["error"]["field"] = e.field();
        std::cout << err.dump() << '\n';
        return exit_code(e.kind());
    } catch (const json::exception& e) {
        std::cout << json{{"error", {{"kind", "config"}, {"message", e.what()}}}}.dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cout << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace fbctl
