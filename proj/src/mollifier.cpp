#include "fbctl/mollifier.hpp"

#include "fbctl/error.hpp"

#include <cmath>
#include <map>

namespace fbctl {

double bump_kernel(std::span<const double> xi) {
    double r2 = 0.0;
    for (double c : xi) r2 += c * c;
    if (r2 >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - r2));
}

MollifierSpec MollifierSpec::make(double delta, int dim, int nodes_per_dim) {
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw Error(ErrorKind::domain, "mollifier delta must be >= 0");
    if (dim < 1) throw Error(ErrorKind::domain, "mollifier dimension must be positive");
    if (nodes_per_dim < 1) throw Error(ErrorKind::domain, "nodes_per_dim must be positive");

    MollifierSpec spec;
    spec.delta_ = delta;
    spec.dim_ = dim;
    spec.nodes_per_dim_ = nodes_per_dim;

    const double h = 2.0 / nodes_per_dim;
    std::size_t total = 1;
    for (int k = 0; k < dim; ++k) total *= static_cast<std::size_t>(nodes_per_dim);

    std::vector<double> node(dim);
    std::vector<int> idx(dim, 0);
    double mass = 0.0;
    for (std::size_t n = 0; n < total; ++n) {
        for (int k = 0; k < dim; ++k) node[k] = -1.0 + (idx[k] + 0.5) * h;
        const double phi = bump_kernel(node);
        if (phi > 0.0) {
            spec.points_.insert(spec.points_.end(), node.begin(), node.end());
            spec.weights_.push_back(phi);
            mass += phi;
        }
        for (int k = 0; k < dim; ++k) {
            if (++idx[k] < nodes_per_dim) break;
            idx[k] = 0;
        }
    }
    if (spec.weights_.empty()) {
        // nodes_per_dim too coarse to hit the open ball except at the origin.
        spec.points_.assign(dim, 0.0);
        spec.weights_.push_back(1.0);
        return spec;
    }
    for (double& w : spec.weights_) w /= mass;
    return spec;
}

MollifierSpec MollifierSpec::with_delta(double delta) const {
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw Error(ErrorKind::domain, "mollifier delta must be >= 0");
    MollifierSpec copy = *this;
    copy.delta_ = delta;
    return copy;
}

MollifierSpec MollifierSpec::marginal(std::span<const int> keep) const {
    MollifierSpec out;
    out.delta_ = delta_;
    out.nodes_per_dim_ = nodes_per_dim_;
    out.dim_ = static_cast<int>(keep.size());
    if (keep.empty()) {
        out.weights_.push_back(1.0);
        return out;
    }
    std::map<std::vector<double>, double> merged;
    std::vector<double> key(keep.size());
    for (std::size_t i = 0; i < size(); ++i) {
        const auto p = point(i);
        for (std::size_t k = 0; k < keep.size(); ++k) key[k] = p[static_cast<std::size_t>(keep[k])];
        merged[key] += weights_[i];
    }
    for (const auto& [pt, w] : merged) {
        out.points_.insert(out.points_.end(), pt.begin(), pt.end());
        out.weights_.push_back(w);
    }
    return out;
}

double mollification_gap(double lipschitz_C, double delta) {
    if (lipschitz_C < 0.0 || delta < 0.0) throw Error(ErrorKind::domain, "mollification_gap needs non-negative arguments");
    return lipschitz_C * delta;
}

MollifiedProblem mollify_problem(const Problem& p, double delta, int nodes_per_dim) {
    if (!(delta > 0.0 && delta <= 1.0)) throw Error(ErrorKind::domain, "delta must lie in (0, 1]");
    if (p.dim > kMaxDim) throw Error(ErrorKind::domain, "mollification supports d <= 2");
    MollifiedProblem mp;
    mp.base_ = std::make_shared<const Problem>(p);
    mp.delta_ = delta;
    mp.state_rule_ = MollifierSpec::make(delta, p.dim, nodes_per_dim);

    const int d = p.dim;
    const Dependence dep = p.driver.depends;
    for (int k = 0; k < d && dep.x; ++k) mp.driver_coords_.push_back(k);
    if (dep.y) mp.driver_coords_.push_back(d);
    for (int k = 0; k < d && dep.z; ++k) mp.driver_coords_.push_back(d + 1 + k);
    const MollifierSpec joint = MollifierSpec::make(delta, 2 * d + 1, nodes_per_dim);
    mp.driver_rule_ = joint.marginal(mp.driver_coords_);
    return mp;
}

MollifiedProblem unmollified(const Problem& p) {
    MollifiedProblem mp;
    mp.base_ = std::make_shared<const Problem>(p);
    mp.delta_ = 0.0;
    return mp;
}

Vec MollifiedProblem::drift(const Vec& x, const ControlPoint& v) const {
    const auto& fn = base_->drift.fn;
    if (delta_ == 0.0 || !base_->drift.depends.x) return fn(x, v);
    Vec acc = Vec::Zero(x.size());
    Vec shifted(x.size());
    for (std::size_t i = 0; i < state_rule_.size(); ++i) {
        const auto node = state_rule_.point(i);
        for (Eigen::Index k = 0; k < x.size(); ++k) shifted(k) = x(k) - delta_ * node[k];
        acc += state_rule_.weight(i) * fn(shifted, v);
    }
    return acc;
}

Mat MollifiedProblem::diffusion(const Vec& x, const ControlPoint& v) const {
    const auto& fn = base_->diffusion.fn;
    if (delta_ == 0.0 || !base_->diffusion.depends.x) return fn(x, v);
    Mat acc = Mat::Zero(x.size(), x.size());
    Vec shifted(x.size());
    for (std::size_t i = 0; i < state_rule_.size(); ++i) {
        const auto node = state_rule_.point(i);
        for (Eigen::Index k = 0; k < x.size(); ++k) shifted(k) = x(k) - delta_ * node[k];
        acc += state_rule_.weight(i) * fn(shifted, v);
    }
    return acc;
}

double MollifiedProblem::terminal(const Vec& x) const {
    const auto& fn = base_->terminal.fn;
    if (delta_ == 0.0 || !base_->terminal.depends.x) return fn(x);
    double acc = 0.0;
    Vec shifted(x.size());
    for (std::size_t i = 0; i < state_rule_.size(); ++i) {
        const auto node = state_rule_.point(i);
        for (Eigen::Index k = 0; k < x.size(); ++k) shifted(k) = x(k) - delta_ * node[k];
        acc += state_rule_.weight(i) * fn(shifted);
    }
    return acc;
}

double MollifiedProblem::driver(const Vec& x, double y, const Vec& z, const ControlPoint& v) const {
    const auto& fn = base_->driver.fn;
    if (delta_ == 0.0 || driver_coords_.empty()) return fn(x, y, z, v);
    const int d = static_cast<int>(x.size());
    double acc = 0.0;
    Vec xs = x;
    Vec zs = z;
    for (std::size_t i = 0; i < driver_rule_.size(); ++i) {
        const auto node = driver_rule_.point(i);
        double ys = y;
        for (std::size_t k = 0; k < driver_coords_.size(); ++k) {
            const int c = driver_coords_[k];
            const double shift = delta_ * node[k];
            if (c < d) {
                xs(c) = x(c) - shift;
            } else if (c == d) {
                ys = y - shift;
            } else {
                zs(c - d - 1) = z(c - d - 1) - shift;
            }
        }
        acc += driver_rule_.weight(i) * fn(xs, ys, zs, v);
    }
    return acc;
}

}  // namespace fbctl
