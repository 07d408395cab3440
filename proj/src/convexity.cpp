#include "fbctl/convexity.hpp"

#include "fbctl/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace fbctl {

namespace {

struct ImagePoint {
    std::vector<double> coords;
    ControlPoint v;
    Vec w;
};

void push_upper(std::vector<double>& out, const Mat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = i; j < m.cols(); ++j) out.push_back(m(i, j));
    }
}

void push_vec(std::vector<double>& out, const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

std::vector<double> h2_image(const Problem& p, const Vec& x, double y, const ControlPoint& v) {
    std::vector<double> out;
    const Mat s = p.diffusion.fn(x, v);
    push_upper(out, s * s.transpose());
    push_vec(out, p.drift.fn(x, v));
    out.push_back(p.driver.fn(x, y, Vec::Zero(p.dim), v));
    return out;
}

std::vector<double> h1_image(const Problem& p, const Vec& x, double y, const ControlPoint& v, const Vec& w) {
    std::vector<double> out;
    const Mat s = p.diffusion.fn(x, v);
    const Mat a = s * s.transpose();
    push_upper(out, a);
    push_vec(out, a * w);
    push_vec(out, p.drift.fn(x, v));
    out.push_back(p.driver.fn(x, y, s.transpose() * w, v));
    return out;
}

// Pairwise combination test shared by both checks.  `blend` maps a blended
// (v, w) to its image, or nothing when the blend leaves the admissible set.
template <class Blend>
void combination_test(const std::vector<ImagePoint>& pts, int n_pairs, double tol, std::mt19937_64& rng,
                      Blend&& blend, ConvexityReport& rep) {
    rep.deficiency = 0.0;
    if (pts.size() < 2) return;
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> mid(pts.front().coords.size());
    for (int pair = 0; pair < n_pairs; ++pair) {
        const std::size_t i = pick(rng);
        std::size_t j = pick(rng);
        while (j == i) j = pick(rng);
        const double lambda = unit(rng);
        const ImagePoint& a = pts[i];
        const ImagePoint& b = pts[j];
        for (std::size_t k = 0; k < mid.size(); ++k) mid[k] = lambda * a.coords[k] + (1.0 - lambda) * b.coords[k];

        double nearest = std::numeric_limits<double>::infinity();
        for (const ImagePoint& q : pts) nearest = std::min(nearest, distance(mid, q.coords));
        if (nearest <= tol) continue;

        const ControlPoint vb = lambda * a.v + (1.0 - lambda) * b.v;
        const Vec wb = lambda * a.w + (1.0 - lambda) * b.w;
        const std::optional<std::vector<double>> image = blend(vb, wb);
        if (image && distance(mid, *image) <= tol) continue;

        if (nearest > rep.deficiency) {
            rep.deficiency = nearest;
            rep.witness = ConvexityWitness{a.coords, b.coords, mid, lambda, nearest};
        }
    }
}

void finish(ConvexityReport& rep) {
    rep.satisfied = rep.deficiency <= rep.tolerance;
    rep.verdict = rep.satisfied ? Verdict::satisfied : Verdict::violated;
}

}  // namespace

const char* to_string(Assumption a) { return a == Assumption::H1 ? "H1" : "H2"; }

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::satisfied: return "satisfied";
        case Verdict::violated: return "violated";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

LiftedPoint lift(const Problem& p, const Vec& x, double y, const ControlTriple& triple) {
    const int d = p.dim;
    const Mat s = p.diffusion.fn(x, triple.v);
    LiftedPoint out;
    out.big_sigma_sq = LiftedMat::Zero(d + 1, d + 1);
    out.big_sigma_sq.topLeftCorner(d, d) = s * s.transpose();
    const Vec sz = s * triple.z;
    out.big_sigma_sq.topRightCorner(d, 1) = sz;
    out.big_sigma_sq.bottomLeftCorner(1, d) = sz.transpose();
    out.big_sigma_sq(d, d) = triple.z.squaredNorm() + triple.theta.squaredNorm();
    out.beta_vec = LiftedVec(d + 1);
    out.beta_vec.head(d) = p.drift.fn(x, triple.v);
    out.beta_vec(d) = -p.driver.fn(x, y, triple.z, triple.v);
    return out;
}

ConvexityReport check_H2(const Problem& p, const Vec& x, double y, double tol, int n_pairs, std::uint64_t seed) {
    if (p.driver.depends.z) {
        throw Error(ErrorKind::domain, "driver depends on z: H2 does not apply, use check_H1");
    }
    if (!(tol >= 0.0) || n_pairs < 0) throw Error(ErrorKind::domain, "check_H2 needs tol >= 0 and n_pairs >= 0");
    ConvexityReport rep;
    rep.assumption_id = Assumption::H2;
    rep.tolerance = tol;
    rep.probe_x = x;
    rep.probe_y = y;

    std::vector<ImagePoint> pts;
    for (const ControlPoint& v : p.control_mesh) pts.push_back({h2_image(p, x, y, v), v, Vec::Zero(p.dim)});
    rep.samples_used = static_cast<int>(pts.size());

    std::mt19937_64 rng(seed);
    combination_test(pts, n_pairs, tol, rng,
                     [&](const ControlPoint& v, const Vec&) -> std::optional<std::vector<double>> {
                         return h2_image(p, x, y, v);
                     },
                     rep);
    finish(rep);
    return rep;
}

ConvexityReport check_H1(const Problem& p, const Vec& x, double y, double radius_K, int n_w_samples, double tol,
                         std::uint64_t seed) {
    if (!(radius_K > 0.0)) throw Error(ErrorKind::domain, "check_H1 needs radius_K > 0");
    if (!(tol >= 0.0) || n_w_samples < 1) throw Error(ErrorKind::domain, "check_H1 needs tol >= 0 and n_w_samples >= 1");
    ConvexityReport rep;
    rep.assumption_id = Assumption::H1;
    rep.tolerance = tol;
    rep.probe_x = x;
    rep.probe_y = y;
    rep.radius_K = radius_K;

    const int d = p.dim;
    const std::size_t K = p.control_mesh.size();
    std::vector<double> radius(K);
    for (std::size_t k = 0; k < K; ++k) {
        const Mat s = p.diffusion.fn(x, p.control_mesh[k]);
        const double smin = Eigen::JacobiSVD<Eigen::MatrixXd>(Eigen::MatrixXd(s)).singularValues().minCoeff();
        radius[k] = radius_K / std::max(smin, 1e-6);
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> atom(0, K - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<ImagePoint> pts;
    for (int n = 0; n < n_w_samples; ++n) {
        const std::size_t k = atom(rng);
        Vec dir(d);
        for (int j = 0; j < d; ++j) dir(j) = normal(rng);
        const double nd = dir.norm();
        const double r = radius[k] * std::pow(unit(rng), 1.0 / d);
        const Vec w = nd > 0.0 ? Vec(dir * (r / nd)) : Vec(Vec::Zero(d));
        const ControlPoint& v = p.control_mesh[k];
        const Mat s = p.diffusion.fn(x, v);
        if ((s.transpose() * w).norm() > radius_K) continue;
        pts.push_back({h1_image(p, x, y, v, w), v, w});
    }
    rep.samples_used = static_cast<int>(pts.size());
    if (static_cast<long>(pts.size()) * 10 < n_w_samples) {
        rep.verdict = Verdict::inconclusive;
        rep.satisfied = false;
        return rep;
    }

    combination_test(pts, n_w_samples, tol, rng,
                     [&](const ControlPoint& v, const Vec& w) -> std::optional<std::vector<double>> {
                         const Mat s = p.diffusion.fn(x, v);
                         if ((s.transpose() * w).norm() > radius_K + tol) return std::nullopt;
                         return h1_image(p, x, y, v, w);
                     },
                     rep);
    finish(rep);
    return rep;
}

LiftedPoint lifted_barycenter(const Problem& p, const MeasureSample& mu) {
    const int d = p.dim;
    LiftedPoint acc;
    acc.big_sigma_sq = LiftedMat::Zero(d + 1, d + 1);
    acc.beta_vec = LiftedVec::Zero(d + 1);
    for (const MeasureAtom& a : mu.atoms) {
        const Mat s = p.diffusion.fn(mu.probe_x, a.v);
        const LiftedPoint l = lift(p, mu.probe_x, mu.probe_y, {s.transpose() * a.w, Vec::Zero(d), a.v});
        acc.big_sigma_sq += a.weight * l.big_sigma_sq;
        acc.beta_vec += a.weight * l.beta_vec;
    }
    return acc;
}

Reduction barycentric_reduction(const Problem& p, const MeasureSample& mu, double tol) {
    if (mu.atoms.empty()) throw Error(ErrorKind::domain, "measure has no atoms");
    if (!(tol >= 0.0)) throw Error(ErrorKind::domain, "tolerance must be non-negative");
    const int d = p.dim;
    const Vec& x = mu.probe_x;
    const double y = mu.probe_y;
    const double K = mu.radius_K;

    double total = 0.0;
    for (const MeasureAtom& a : mu.atoms) {
        if (!(a.weight > 0.0)) throw Error(ErrorKind::domain, "measure weights must be positive");
        const Mat s = p.diffusion.fn(x, a.v);
        if ((s.transpose() * a.w).norm() > K + tol) throw Error(ErrorKind::domain, "measure atom outside Gamma");
        total += a.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::domain, "measure weights must sum to one");

    // Barycenter of Phi(v, w) = (sigma sigma^*, sigma sigma^* w, b, f(x, y, sigma^* w, v)).
    Mat a_bar = Mat::Zero(d, d);
    Vec m_bar = Vec::Zero(d);
    Vec b_bar = Vec::Zero(d);
    double f_bar = 0.0;
    double second_moment = 0.0;  // integral of |sigma^* w|^2
    for (const MeasureAtom& a : mu.atoms) {
        const Mat s = p.diffusion.fn(x, a.v);
        const Mat ss = s * s.transpose();
        const Vec z = s.transpose() * a.w;
        a_bar += a.weight * ss;
        m_bar += a.weight * (ss * a.w);
        b_bar += a.weight * p.drift.fn(x, a.v);
        f_bar += a.weight * p.driver.fn(x, y, z, a.v);
        second_moment += a.weight * z.squaredNorm();
    }

    std::vector<ControlPoint> candidates;
    for (const MeasureAtom& a : mu.atoms) candidates.push_back(a.v);
    candidates.insert(candidates.end(), p.control_mesh.begin(), p.control_mesh.end());

    for (const ControlPoint& v : candidates) {
        const Mat s = p.diffusion.fn(x, v);
        const Mat ss = s * s.transpose();
        if ((ss - a_bar).norm() > tol) continue;
        if ((p.drift.fn(x, v) - b_bar).norm() > tol) continue;

        // Solve ss w = m_bar on the range of ss; a null-space component of the
        // moment rules this candidate out.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(ss), Eigen::ComputeEigenvectors);
        const Eigen::MatrixXd T = eig.eigenvectors();
        const Eigen::VectorXd lambda = eig.eigenvalues();
        const Eigen::VectorXd proj = T.transpose() * Eigen::VectorXd(m_bar);
        const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
        Eigen::VectorXd coef = Eigen::VectorXd::Zero(d);
        bool in_range = true;
        for (int i = 0; i < d; ++i) {
            if (lambda(i) > 1e-12 * scale) {
                coef(i) = proj(i) / lambda(i);
            } else if (std::abs(proj(i)) > tol) {
                in_range = false;
            }
        }
        if (!in_range) continue;
        const Vec w_bar = T * coef;
        const Vec z_bar = s.transpose() * w_bar;
        if (std::abs(p.driver.fn(x, y, z_bar, v) - f_bar) > tol) continue;

        const double alpha = second_moment - w_bar.dot(ss * w_bar);
        if (alpha < -tol) {
            throw Error(ErrorKind::numerical, "internal inconsistency: negative alpha for the matched (v, w)");
        }
        Reduction r;
        r.w_bar = w_bar;
        r.alpha = alpha;
        r.triple.v = v;
        r.triple.z = z_bar;
        r.triple.theta = Vec::Zero(d);
        r.triple.theta(0) = std::sqrt(std::max(alpha, 0.0));
        r.identity_lhs = second_moment;
        r.identity_rhs = z_bar.squaredNorm() + r.triple.theta.squaredNorm();
        if (std::abs(r.identity_lhs - r.identity_rhs) > tol) {
            throw Error(ErrorKind::numerical, "reduction identity fails beyond tolerance");
        }
        if (z_bar.norm() > K + tol || r.triple.theta.norm() > K + tol) {
            throw Error(ErrorKind::numerical, "reduced triple leaves the ball of radius K");
        }
        return r;
    }

    std::ostringstream msg;
    msg << "H1 violated at probe: no (v, w) matches the barycenter (sigma sigma^* =";
    for (Eigen::Index i = 0; i < a_bar.size(); ++i) msg << ' ' << a_bar(i);
    msg << ", moment =";
    for (Eigen::Index i = 0; i < m_bar.size(); ++i) msg << ' ' << m_bar(i);
    msg << ", b =";
    for (Eigen::Index i = 0; i < b_bar.size(); ++i) msg << ' ' << b_bar(i);
    msg << ", f = " << f_bar << ")";
    throw Error(ErrorKind::numerical, msg.str());
}

}  // namespace fbctl
