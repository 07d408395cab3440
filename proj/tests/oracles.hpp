#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// None of these call into the library under test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace fbctl::oracle {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kCatalan = 0.91596559417721901505;

/// E[sin(x + W_{T-t})] for the heat equation with unit diffusion.
inline double heat_sine(double t, double x, double T) { return std::sin(x) * std::exp(-(T - t) / 2.0); }

/// Exhaustive backward DP on a trinomial tree: x_j = x_c + j h with
/// h = sigma sqrt(3 dt), p_up/down = 1/6 +- b dt / (2h), minimizing over the
/// constant drifts in `drifts`.  Returns V(0, .) interpolated at x.
class TrinomialDP {
public:
    TrinomialDP(const std::vector<double>& drifts, double sigma, double T, int steps,
                const std::function<double(double)>& terminal, double x_center, double half_width)
        : h_(sigma * std::sqrt(3.0 * T / steps)), x_lo_(0.0) {
        const double dt = T / steps;
        const int half = static_cast<int>(std::ceil(half_width / h_)) + steps + 2;
        x_lo_ = x_center - half * h_;
        const int n = 2 * half + 1;
        std::vector<double> next(static_cast<std::size_t>(n));
        std::vector<double> cur(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) next[static_cast<std::size_t>(j)] = terminal(x_lo_ + j * h_);
        for (int s = 0; s < steps; ++s) {
            cur = next;
            for (int j = 1; j + 1 < n; ++j) {
                double best = INFINITY;
                for (double b : drifts) {
                    const double pu = 1.0 / 6.0 + b * dt / (2.0 * h_);
                    const double pd = 1.0 / 6.0 - b * dt / (2.0 * h_);
                    const double v = pu * next[static_cast<std::size_t>(j + 1)] +
                                     (1.0 - pu - pd) * next[static_cast<std::size_t>(j)] +
                                     pd * next[static_cast<std::size_t>(j - 1)];
                    best = std::min(best, v);
                }
                cur[static_cast<std::size_t>(j)] = best;
            }
            next.swap(cur);
        }
        v0_ = next;
    }

    double value(double x) const {
        const double u = (x - x_lo_) / h_;
        const int j = std::clamp(static_cast<int>(std::floor(u)), 0, static_cast<int>(v0_.size()) - 2);
        const double w = u - j;
        return (1.0 - w) * v0_[static_cast<std::size_t>(j)] + w * v0_[static_cast<std::size_t>(j + 1)];
    }

    double step() const { return h_; }

private:
    double h_;
    double x_lo_;
    std::vector<double> v0_;
};

/// P(sup_{[0,T]} |B| > a) for standard Brownian motion.
inline double sup_abs_tail(double a, double T) {
    if (a <= 0.0) return 1.0;
    double below = 0.0;
    for (int k = 0; k < 200; ++k) {
        const double m = 2.0 * k + 1.0;
        const double term = std::exp(-m * m * kPi * kPi * T / (8.0 * a * a)) / m;
        below += (k % 2 == 0 ? 1.0 : -1.0) * term;
        if (term < 1e-18) break;
    }
    below *= 4.0 / kPi;
    return std::clamp(1.0 - below, 0.0, 1.0);
}

/// E[(sup_{[0,T]} |B| - c)_+^2] by integrating 2 (a - c) P(S > a) over a > c.
inline double sup_abs_shifted_second_moment(double c, double T) {
    const double upper = c + 12.0 * std::sqrt(T);
    const int n = 200000;
    const double h = (upper - c) / n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double a = c + (i + 0.5) * h;
        acc += 2.0 * (a - c) * sup_abs_tail(a, T) * h;
    }
    return acc;
}

/// E sup_{[0,T]} |B|^2 = 2 G T (G Catalan's constant).
inline double sup_abs_second_moment(double T) { return 2.0 * kCatalan * T; }

/// Discretely monitored version with the continuity correction of
/// Broadie and Glasserman: sup over a dt-grid behaves like sup - 0.5826 sqrt(dt).
inline double sup_abs_second_moment_discrete(double T, double dt) {
    return sup_abs_shifted_second_moment(0.5826 * std::sqrt(dt), T);
}

/// Euclidean distance from q to the convex hull of `points` by Frank-Wolfe
/// with exact line search.
inline double hull_distance(const std::vector<std::vector<double>>& points, const std::vector<double>& q,
                            int iterations = 20000) {
    const std::size_t m = q.size();
    std::vector<double> c = points.front();
    auto sq = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
        return s;
    };
    for (const auto& p : points) {
        if (sq(p, q) < sq(c, q)) c = p;
    }
    for (int it = 0; it < iterations; ++it) {
        // Vertex minimizing the linearized objective <c - q, p>.
        std::size_t best = 0;
        double best_val = INFINITY;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double v = 0.0;
            for (std::size_t k = 0; k < m; ++k) v += (c[k] - q[k]) * points[i][k];
            if (v < best_val) {
                best_val = v;
                best = i;
            }
        }
        double num = 0.0;
        double den = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double dir = points[best][k] - c[k];
            num -= (c[k] - q[k]) * dir;
            den += dir * dir;
        }
        if (den <= 0.0 || num <= 0.0) break;
        const double step = std::min(1.0, num / den);
        for (std::size_t k = 0; k < m; ++k) c[k] += step * (points[best][k] - c[k]);
    }
    return std::sqrt(sq(c, q));
}

/// Distance from q to the nearest of `points`.
inline double set_distance(const std::vector<std::vector<double>>& points, const std::vector<double>& q) {
    double best = INFINITY;
    for (const auto& p : points) {
        double s = 0.0;
        for (std::size_t k = 0; k < q.size(); ++k) s += (p[k] - q[k]) * (p[k] - q[k]);
        best = std::min(best, std::sqrt(s));
    }
    return best;
}

}  // namespace fbctl::oracle
