#include "fbctl/io.hpp"

#include "fbctl/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace fbctl {

using nlohmann::json;

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

json vec_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json probe_json(const ProbePoint& p) {
    json j;
    j["x"] = vec_json(p.x);
    j["y"] = p.y;
    j["z"] = vec_json(p.z);
    j["control_index"] = p.control;
    return j;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<int> written_levels(const std::vector<int>& kept, int stride) {
    std::vector<int> out;
    if (stride < 1) stride = 1;
    for (std::size_t r = 0; r < kept.size(); ++r) {
        if (r % static_cast<std::size_t>(stride) == 0 || r + 1 == kept.size()) out.push_back(static_cast<int>(r));
    }
    return out;
}

}  // namespace

json to_json(const Grid& g) {
    json j;
    j["dimension"] = g.dim;
    j["box_lo"] = vec_json(g.box_lo);
    j["box_hi"] = vec_json(g.box_hi);
    j["nx"] = std::vector<int>(g.nx.begin(), g.nx.begin() + g.dim);
    j["periodic"] = std::vector<bool>(g.periodic.begin(), g.periodic.begin() + g.dim);
    j["nt"] = g.nt;
    j["t0"] = g.t0;
    j["T"] = g.T;
    j["dt"] = g.dt();
    return j;
}

json to_json(const CostEstimate& c) {
    json j;
    j["value"] = c.value;
    j["std_error"] = c.std_error;
    j["method"] = to_string(c.method);
    if (c.method == CostMethod::regression_mc) j["n_paths"] = c.n_paths;
    return j;
}

json to_json(const AssumptionReport& r) {
    json j;
    j["estimated_M"] = r.estimated_M;
    j["estimated_C"] = r.estimated_C;
    j["estimated_F"] = r.estimated_F;
    j["samples_used"] = r.samples_used;
    auto violation = [](const Violation& v) {
        json o;
        o["inequality"] = v.inequality;
        o["first"] = probe_json(v.first);
        if (v.second) o["second"] = probe_json(*v.second);
        o["observed"] = v.observed;
        o["declared"] = v.declared;
        o["slack"] = v.slack;
        return o;
    };
    j["worst_violation"] = r.worst_violation ? violation(*r.worst_violation) : json(nullptr);
    j["violations"] = json::array();
    for (const auto& v : r.violations) j["violations"].push_back(violation(v));
    return j;
}

json to_json(const ConvexityReport& r) {
    json j;
    j["assumption_id"] = to_string(r.assumption_id);
    j["verdict"] = to_string(r.verdict);
    j["satisfied"] = r.satisfied;
    j["deficiency"] = r.deficiency;
    j["tolerance"] = r.tolerance;
    j["probe"] = {{"x", vec_json(r.probe_x)}, {"y", r.probe_y}};
    j["samples_used"] = r.samples_used;
    j["radius_K"] = r.radius_K;
    if (r.witness) {
        j["witness"] = {{"first", r.witness->first},
                        {"second", r.witness->second},
                        {"midpoint", r.witness->midpoint},
                        {"lambda", r.witness->lambda},
                        {"distance", r.witness->distance}};
    } else {
        j["witness"] = nullptr;
    }
    return j;
}

json to_json(const IdentityReport& r) {
    return {{"max_abs", r.max_abs},
            {"mean_abs", r.mean_abs},
            {"paths_used", r.paths_used},
            {"paths_excluded", r.paths_excluded},
            {"tainted", r.tainted}};
}

void write_value_csv(std::ostream& os, const ValueField& field, int stride) {
    const Grid& g = field.grid;
    const int d = g.dim;
    os << "t";
    for (int k = 1; k <= d; ++k) os << ",x" << k;
    os << ",V";
    for (int k = 1; k <= d; ++k) os << ",dV" << k;
    os << '\n';
    const std::size_t N = g.node_count();
    for (int r : written_levels(field.levels, stride)) {
        const int level = field.levels[static_cast<std::size_t>(r)];
        const std::string t = format_number(g.time(level));
        for (std::size_t i = 0; i < N; ++i) {
            const Vec x = g.node(i);
            os << t;
            for (int k = 0; k < d; ++k) os << ',' << format_number(x(k));
            os << ',' << format_number(field.values[static_cast<std::size_t>(r) * N + i]);
            for (int k = 0; k < d; ++k) {
                os << ',' << format_number(field.gradients[(static_cast<std::size_t>(r) * N + i) * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)]);
            }
            os << '\n';
        }
    }
}

void write_policy_csv(std::ostream& os, const FeedbackPolicy& policy, int stride) {
    const Grid& g = policy.grid;
    const int d = g.dim;
    os << "t";
    for (int k = 1; k <= d; ++k) os << ",x" << k;
    os << ",control_index\n";
    if (policy.choice.empty()) return;
    std::vector<int> levels(static_cast<std::size_t>(g.nt));
    for (int n = 0; n < g.nt; ++n) levels[static_cast<std::size_t>(n)] = n;
    const std::size_t N = g.node_count();
    for (int n : written_levels(levels, stride)) {
        const std::string t = format_number(g.time(n));
        for (std::size_t i = 0; i < N; ++i) {
            const Vec x = g.node(i);
            os << t;
            for (int k = 0; k < d; ++k) os << ',' << format_number(x(k));
            os << ',' << policy.at(n, i) << '\n';
        }
    }
}

void write_paths_csv(std::ostream& os, const PathBundle& b) {
    os << "path_id,step,t";
    for (int k = 1; k <= b.dim; ++k) os << ",x" << k;
    os << ",y,control_index\n";
    for (int path = 0; path < b.n_paths; ++path) {
        for (int k = 0; k <= b.steps; ++k) {
            const Vec x = b.state(path, k);
            os << path << ',' << k << ',' << format_number(b.times[static_cast<std::size_t>(k)]);
            for (int j = 0; j < b.dim; ++j) os << ',' << format_number(x(j));
            os << ',';
            if (!b.y.empty()) os << format_number(b.value(path, k));
            os << ',' << b.control_at(path, std::min(k, b.steps - 1)) << '\n';
        }
    }
}

json field_sidecar(const ValueField& field) {
    return {{"grid", to_json(field.grid)},
            {"delta", field.delta},
            {"sup_norm", field.sup_norm},
            {"lipschitz_x_estimate", number_or_null(field.lipschitz_x_estimate)},
            {"levels_kept", field.levels.size()}};
}

json policy_sidecar(const FeedbackPolicy& policy) {
    return {{"grid", to_json(policy.grid)}, {"delta", policy.delta}, {"tie_break", "lowest index"}};
}

json paths_sidecar(const PathBundle& b) {
    return {{"seed", b.seed},
            {"dt", b.dt},
            {"delta", b.delta},
            {"n_paths", b.n_paths},
            {"steps", b.steps},
            {"clamped_paths", b.clamped_count},
            {"tainted", b.tainted}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorKind::config, "cannot write " + path.string(), "out");
    os << text;
}

void write_json(const std::filesystem::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

}  // namespace fbctl
