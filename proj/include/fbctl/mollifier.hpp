#pragma once

#include "fbctl/problem.hpp"
#include "fbctl/types.hpp"

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace fbctl {

/// Unnormalized bump exp(-1/(1-|xi|^2)) on the open unit ball, zero outside.
double bump_kernel(std::span<const double> xi);

/// Fixed quadrature for convolution with the normalized bump kernel on the
/// unit ball of R^m.  Tensor midpoint nodes on [-1, 1]^m; each stored weight
/// already contains the kernel value and is divided by the discrete kernel
/// mass, so the weights sum to one and constants are reproduced.
class MollifierSpec {
public:
    static MollifierSpec make(double delta, int dim, int nodes_per_dim = 9);

    double delta() const noexcept { return delta_; }
    int dim() const noexcept { return dim_; }
    int nodes_per_dim() const noexcept { return nodes_per_dim_; }
    static constexpr const char* kernel_id() noexcept { return "bump"; }

    std::size_t size() const noexcept { return weights_.size(); }
    std::span<const double> point(std::size_t i) const {
        return {points_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    double weight(std::size_t i) const { return weights_[i]; }

    MollifierSpec with_delta(double delta) const;

    /// Push the rule forward onto the listed coordinates (marginal weights).
    /// Convolving a function that ignores the other coordinates gives the same
    /// value with far fewer nodes.
    MollifierSpec marginal(std::span<const int> keep) const;

private:
    double delta_ = 0.0;
    int dim_ = 0;
    int nodes_per_dim_ = 0;
    std::vector<double> points_;
    std::vector<double> weights_;
};

/// l_delta(xi) = sum_i w_i l(xi - delta * node_i).  fn may return a scalar or
/// any Eigen vector/matrix type.
template <class Fn>
auto mollify_value(Fn&& fn, const Eigen::VectorXd& xi, const MollifierSpec& spec) {
    using Result = std::decay_t<decltype(fn(xi))>;
    Eigen::VectorXd shifted(xi.size());
    Result acc{};
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const auto node = spec.point(i);
        for (Eigen::Index k = 0; k < xi.size(); ++k) shifted(k) = xi(k) - spec.delta() * node[k];
        if (i == 0) {
            acc = spec.weight(i) * fn(shifted);
        } else {
            acc += spec.weight(i) * fn(shifted);
        }
    }
    return acc;
}

/// Bound C_l * delta on |l_delta - l|.
double mollification_gap(double lipschitz_C, double delta);

/// A problem with mollified coefficients: b, sigma and Phi smoothed in x per
/// control atom, f smoothed jointly in (x, y, z) with v frozen.  delta == 0
/// gives the unmollified view (see unmollified()).
class MollifiedProblem {
public:
    const Problem& base() const noexcept { return *base_; }
    double delta() const noexcept { return delta_; }
    int dim() const noexcept { return base_->dim; }

    Vec drift(const Vec& x, const ControlPoint& v) const;
    Mat diffusion(const Vec& x, const ControlPoint& v) const;
    double driver(const Vec& x, double y, const Vec& z, const ControlPoint& v) const;
    double terminal(const Vec& x) const;

    const MollifierSpec& state_rule() const noexcept { return state_rule_; }
    const MollifierSpec& driver_rule() const noexcept { return driver_rule_; }

private:
    friend MollifiedProblem mollify_problem(const Problem& p, double delta, int nodes_per_dim);
    friend MollifiedProblem unmollified(const Problem& p);

    std::shared_ptr<const Problem> base_;
    double delta_ = 0.0;
    MollifierSpec state_rule_;        // over x in R^d
    MollifierSpec driver_rule_;       // marginal of the (x, y, z) rule on the driver's coordinates
    std::vector<int> driver_coords_;  // which of (x_1..x_d, y, z_1..z_d) the driver rule covers
};

/// Throws Error(domain) unless delta is in (0, 1].
MollifiedProblem mollify_problem(const Problem& p, double delta, int nodes_per_dim = 9);
MollifiedProblem unmollified(const Problem& p);

}  // namespace fbctl
