#pragma once

// Bloch-vector estimators over the closed unit ball.
//
// Both programs take per-axis empirical probabilities p_u. With K axes and
// shots N_u, each term carries the weight w_u = K * N_u / sum(N); for equal
// shots every weight is 1 and the objectives are exactly
//
//   MLE:  max  sum_u w_u [ p_u ln(1 + a.u) + (1 - p_u) ln(1 - a.u) ]
//   LR:   min  sum_u w_u (1 + u.a - 2 p_u)^2
//
// subject to |a| <= 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qvfv/bloch.hpp"
#include "qvfv/errors.hpp"
#include "qvfv/measurement.hpp"

namespace qvfv {

enum class Estimator { MLE, LR };

inline std::string to_string(Estimator e) { return e == Estimator::MLE ? "mle" : "lr"; }

inline Estimator estimator_from_string(const std::string& s) {
    if (s == "mle" || s == "MLE") return Estimator::MLE;
    if (s == "lr" || s == "LR") return Estimator::LR;
    throw InvalidArgument("unknown estimator '" + s + "' (expected mle or lr)");
}

struct ReconstructionResult {
    BlochVector estimate;
    Estimator estimator = Estimator::MLE;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    // Norm of the unit-step projected gradient P(a + g) - a at the estimate.
    double gradient_norm_final = 0.0;
    // Lagrange multiplier of the ball constraint (0 for interior solutions).
    double multiplier = 0.0;

    bool operator==(const ReconstructionResult&) const = default;
};

class MaxIterationsExceeded : public Error {
public:
    explicit MaxIterationsExceeded(ReconstructionResult best)
        : Error("MaxIterationsExceeded", "solver did not converge within the iteration limit"), best_(best) {}

    const ReconstructionResult& best() const noexcept { return best_; }

private:
    ReconstructionResult best_;
};

struct ReconstructionEntry {
    BlochVector axis;
    double probability = 0.0;
    double shots = 1.0;
};

class ReconstructionInput {
public:
    ReconstructionInput() = default;

    explicit ReconstructionInput(std::vector<ReconstructionEntry> entries) : entries_(std::move(entries)) {
        validate();
        double total = 0.0;
        for (const auto& e : entries_) total += e.shots;
        const double k = static_cast<double>(entries_.size());
        weights_.reserve(entries_.size());
        for (const auto& e : entries_) weights_.push_back(k * e.shots / total);
    }

    // Pairs each record with its catalog axis.
    static ReconstructionInput from_records(std::span<const MeasurementRecord> records, const PvmCatalog& catalog) {
        std::vector<ReconstructionEntry> entries;
        entries.reserve(records.size());
        for (const auto& r : records) {
            const PvmBasis* b = catalog.find(r.basis_id);
            if (b == nullptr) throw InvalidArgument("record basis '" + r.basis_id + "' not in catalog");
            if (r.shots < 1 || r.count < 0 || r.count > r.shots) throw InvalidArgument("record count outside [0, shots]");
            entries.push_back({b->axis, r.empirical_probability(), static_cast<double>(r.shots)});
        }
        return ReconstructionInput(std::move(entries));
    }

    // Noise-free input built from exact Born probabilities.
    static ReconstructionInput exact(const BlochVector& a, std::span<const BlochVector> axes) {
        std::vector<ReconstructionEntry> entries;
        entries.reserve(axes.size());
        for (const auto& u : axes) entries.push_back({u, born_probability(a, u), 1.0});
        return ReconstructionInput(std::move(entries));
    }

    std::size_t size() const { return entries_.size(); }
    const ReconstructionEntry& entry(std::size_t i) const { return entries_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }

    // Weighted Gram matrix sum_u w_u u u^T and moment vector sum_u w_u (2 p_u - 1) u.
    Eigen::Matrix3d gram() const {
        Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const Eigen::Vector3d u = to_eigen(entries_[i].axis);
            g += weights_[i] * u * u.transpose();
        }
        return g;
    }

    Eigen::Vector3d moment() const {
        Eigen::Vector3d b = Eigen::Vector3d::Zero();
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            b += weights_[i] * (2.0 * entries_[i].probability - 1.0) * to_eigen(entries_[i].axis);
        }
        return b;
    }

    static Eigen::Vector3d to_eigen(const BlochVector& v) { return {v.x, v.y, v.z}; }
    static BlochVector from_eigen(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

private:
    void validate() const {
        if (entries_.size() < 3) throw NonSpanningBases("at least 3 measurement axes are required");
        Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
        for (const auto& e : entries_) {
            if (!(e.probability >= 0.0 && e.probability <= 1.0)) {
                throw InvalidArgument("empirical probability outside [0, 1]");
            }
            if (!(e.shots > 0.0)) throw InvalidArgument("shot weight must be positive");
            if (std::abs(norm(e.axis) - 1.0) > 1e-9) throw InvalidArgument("measurement axis must be a unit vector");
            const Eigen::Vector3d u = to_eigen(e.axis);
            g += u * u.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(g, Eigen::EigenvaluesOnly);
        if (es.eigenvalues()(0) <= 1e-10 * es.eigenvalues()(2)) {
            throw NonSpanningBases("measurement axes do not span R^3");
        }
    }

    std::vector<ReconstructionEntry> entries_;
    std::vector<double> weights_;
};

// Lower clip on the arguments of ln(1 +- a.u).
inline constexpr double kLogFloor = 1e-14;

inline double mle_objective(const BlochVector& a, const ReconstructionInput& in) {
    double f = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        const auto& e = in.entry(i);
        const double x = dot(a, e.axis);
        double term = 0.0;
        if (e.probability > 0.0) term += e.probability * std::log(std::max(1.0 + x, kLogFloor));
        if (e.probability < 1.0) term += (1.0 - e.probability) * std::log(std::max(1.0 - x, kLogFloor));
        f += in.weight(i) * term;
    }
    return f;
}

inline BlochVector mle_gradient(const BlochVector& a, const ReconstructionInput& in) {
    BlochVector g;
    for (std::size_t i = 0; i < in.size(); ++i) {
        const auto& e = in.entry(i);
        const double x = dot(a, e.axis);
        double c = 0.0;
        if (e.probability > 0.0) c += e.probability / std::max(1.0 + x, kLogFloor);
        if (e.probability < 1.0) c -= (1.0 - e.probability) / std::max(1.0 - x, kLogFloor);
        g += (in.weight(i) * c) * e.axis;
    }
    return g;
}

inline Eigen::Matrix3d mle_hessian(const BlochVector& a, const ReconstructionInput& in) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < in.size(); ++i) {
        const auto& e = in.entry(i);
        const double x = dot(a, e.axis);
        const double plus = std::max(1.0 + x, kLogFloor);
        const double minus = std::max(1.0 - x, kLogFloor);
        const double c = e.probability / (plus * plus) + (1.0 - e.probability) / (minus * minus);
        const Eigen::Vector3d u = ReconstructionInput::to_eigen(e.axis);
        h -= in.weight(i) * c * u * u.transpose();
    }
    return h;
}

// Euclidean projection onto the closed unit ball.
inline BlochVector project_to_ball(const BlochVector& a) {
    const double r = norm(a);
    return r > 1.0 ? a / r : a;
}

inline double projected_gradient_norm(const BlochVector& a, const BlochVector& g) {
    return norm(project_to_ball(a + g) - a);
}

struct SolverOptions {
    double tolerance = 1e-10;
    int max_iter = 10000;
    // Relative objective change regarded as a stall, and how many
    // consecutive stalled iterations end the run.
    double stall_tolerance = 1e-14;
    int stall_window = 5;
    double armijo = 1e-4;
};

namespace detail {

struct Step {
    BlochVector point;
    double value;
};

inline bool on_boundary(const BlochVector& a) { return norm(a) >= 1.0 - 1e-12; }

// Once the predicted rise falls below the resolution of f, the Armijo test
// is decided by rounding; a Newton step is then accepted if it shrinks the
// projected gradient instead.
inline bool accept(double ft, double f, double rise, const BlochVector& a, const BlochVector& g,
                   const BlochVector& trial, const ReconstructionInput& in, const SolverOptions& opt) {
    if (ft >= f + opt.armijo * rise) return true;
    if (rise > 1e-12 * std::max(1.0, std::abs(f))) return false;
    return projected_gradient_norm(trial, mle_gradient(trial, in)) < projected_gradient_norm(a, g);
}

// Newton direction -H^{-1} g projected back onto the ball, with backtracking.
inline std::optional<Step> newton_step(const BlochVector& a, double f, const BlochVector& g,
                                       const ReconstructionInput& in, const SolverOptions& opt) {
    const Eigen::Matrix3d neg_h = -mle_hessian(a, in);
    const Eigen::LDLT<Eigen::Matrix3d> ldlt(neg_h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
    const BlochVector d = ReconstructionInput::from_eigen(ldlt.solve(ReconstructionInput::to_eigen(g)));
    if (!std::isfinite(norm(d))) return std::nullopt;
    double t = 1.0;
    for (int k = 0; k < 40; ++k, t *= 0.5) {
        const BlochVector trial = project_to_ball(a + t * d);
        const double rise = dot(g, trial - a);
        if (rise <= 0.0) continue;
        const double ft = mle_objective(trial, in);
        if (accept(ft, f, rise, a, g, trial, in, opt)) return Step{trial, ft};
    }
    return std::nullopt;
}

// Riemannian Newton step on the unit sphere, retracted by normalization.
inline std::optional<Step> sphere_newton_step(const BlochVector& a, double f, const BlochVector& g,
                                              const ReconstructionInput& in, const SolverOptions& opt) {
    const Eigen::Vector3d n = ReconstructionInput::to_eigen(a / norm(a));
    // Orthonormal tangent frame at n.
    const Eigen::Vector3d seed = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d e1 = (seed - seed.dot(n) * n).normalized();
    const Eigen::Vector3d e2 = n.cross(e1);
    Eigen::Matrix<double, 3, 2> frame;
    frame << e1, e2;

    const Eigen::Vector3d ge = ReconstructionInput::to_eigen(g);
    const double normal_slope = ge.dot(n);
    const Eigen::Matrix2d hr = frame.transpose() * mle_hessian(a, in) * frame - normal_slope * Eigen::Matrix2d::Identity();
    const Eigen::Vector2d gr = frame.transpose() * ge;
    const Eigen::LDLT<Eigen::Matrix2d> ldlt(-hr);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
    const Eigen::Vector3d dir = frame * ldlt.solve(gr);
    const double slope = ge.dot(dir);
    if (!(slope > 0.0) || !std::isfinite(slope)) return std::nullopt;

    double t = 1.0;
    for (int k = 0; k < 40; ++k, t *= 0.5) {
        const Eigen::Vector3d moved = (n + t * dir).normalized();
        const BlochVector trial = ReconstructionInput::from_eigen(moved);
        const double ft = mle_objective(trial, in);
        if (accept(ft, f, t * slope, a, g, trial, in, opt)) return Step{trial, ft};
    }
    return std::nullopt;
}

// Plain projected gradient ascent step with Armijo backtracking.
inline std::optional<Step> gradient_step(const BlochVector& a, double f, const BlochVector& g,
                                         const ReconstructionInput& in, const SolverOptions& opt, double& step) {
    double t = std::min(2.0 * step, 1e6);
    for (int k = 0; k < 80; ++k, t *= 0.5) {
        const BlochVector trial = project_to_ball(a + t * g);
        const double rise = dot(g, trial - a);
        if (rise <= 0.0) continue;
        const double ft = mle_objective(trial, in);
        if (ft >= f + opt.armijo * rise) {
            step = t;
            return Step{trial, ft};
        }
    }
    return std::nullopt;
}

} // namespace detail

// Maximum-likelihood estimate. Projected ascent from the maximally mixed
// state; each iteration tries a (projected) Newton step, or a tangent Newton
// step when the iterate sits on the sphere with an outward gradient, and
// falls back to a projected gradient step. Every accepted step satisfies an
// Armijo condition, so the objective increases monotonically.
inline ReconstructionResult mle_reconstruct(const ReconstructionInput& in, const SolverOptions& opt = {}) {
    BlochVector a{};
    double f = mle_objective(a, in);
    double gd_step = 1.0;
    int stalled = 0;

    ReconstructionResult res;
    res.estimator = Estimator::MLE;

    for (int it = 0;; ++it) {
        const BlochVector g = mle_gradient(a, in);
        const double pgn = projected_gradient_norm(a, g);
        res.estimate = a;
        res.objective = f;
        res.iterations = it;
        res.gradient_norm_final = pgn;
        res.multiplier = detail::on_boundary(a) ? std::max(0.0, dot(g, a)) : 0.0;
        if (pgn <= opt.tolerance || stalled >= opt.stall_window) {
            res.converged = true;
            return res;
        }
        if (it >= opt.max_iter) throw MaxIterationsExceeded(res);

        std::optional<detail::Step> step;
        if (detail::on_boundary(a) && dot(g, a) > 0.0) {
            step = detail::sphere_newton_step(a, f, g, in, opt);
        } else {
            step = detail::newton_step(a, f, g, in, opt);
        }
        if (!step) step = detail::gradient_step(a, f, g, in, opt, gd_step);

        if (!step) {
            // No ascent step is representable: the iterate is optimal to rounding.
            ++stalled;
            continue;
        }
        const double change = std::abs(step->value - f) / std::max(1.0, std::abs(f));
        stalled = change <= opt.stall_tolerance ? stalled + 1 : 0;
        a = step->point;
        f = step->value;
    }
}

inline double lr_objective(const BlochVector& a, const ReconstructionInput& in) {
    double f = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        const auto& e = in.entry(i);
        const double r = 1.0 + dot(e.axis, a) - 2.0 * e.probability;
        f += in.weight(i) * r * r;
    }
    return f;
}

// Least-squares estimate. Interior solutions come from the 3x3 normal
// equations G a = b; otherwise the multiplier lambda > 0 of
// (G + lambda I) a = b with |a| = 1 is found by a safeguarded Newton
// iteration on the secular function 1/|a(lambda)| - 1.
inline ReconstructionResult lr_reconstruct(const ReconstructionInput& in, const SolverOptions& opt = {}) {
    const Eigen::Matrix3d gram = in.gram();
    const Eigen::Vector3d b = in.moment();

    ReconstructionResult res;
    res.estimator = Estimator::LR;
    res.converged = true;

    auto finish = [&](const Eigen::Vector3d& sol, double lambda, int iterations) {
        res.estimate = ReconstructionInput::from_eigen(sol);
        res.multiplier = lambda;
        res.iterations = iterations;
        res.objective = lr_objective(res.estimate, in);
        // Ascent direction of -f is -(G a - b), up to the factor 2.
        const Eigen::Vector3d descent = -2.0 * (gram * sol - b);
        res.gradient_norm_final = projected_gradient_norm(res.estimate, ReconstructionInput::from_eigen(descent));
        return res;
    };

    const Eigen::Vector3d interior = gram.ldlt().solve(b);
    if (interior.norm() <= 1.0) return finish(interior, 0.0, 0);

    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(gram);
    const Eigen::Vector3d d = es.eigenvalues();
    const Eigen::Vector3d c = es.eigenvectors().transpose() * b;

    auto solution = [&](double lambda) -> Eigen::Vector3d {
        return es.eigenvectors() * c.cwiseQuotient((d.array() + lambda).matrix());
    };
    // |a(lambda)| and its derivative with respect to lambda.
    auto radius = [&](double lambda, double& dradius) {
        double s2 = 0.0;
        double s3 = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double den = d(i) + lambda;
            s2 += c(i) * c(i) / (den * den);
            s3 += c(i) * c(i) / (den * den * den);
        }
        const double r = std::sqrt(s2);
        dradius = -s3 / r;
        return r;
    };

    // |a(lambda)| is decreasing; |a(0)| > 1 and |a(lambda)| <= |b|/(d_min + lambda).
    double lo = 0.0;
    double hi = std::max(b.norm() - d(0), 0.0) + 1e-300;
    double lambda = 0.5 * (lo + hi);
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        double dr = 0.0;
        const double r = radius(lambda, dr);
        if (std::abs(r - 1.0) <= 1e-14) break;
        if (r > 1.0) lo = lambda; else hi = lambda;
        // Newton on phi(lambda) = 1/r - 1, which is nearly linear in lambda.
        const double phi = 1.0 / r - 1.0;
        const double dphi = -dr / (r * r);
        double next = lambda - phi / dphi;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == lambda || hi - lo <= 1e-17 * std::max(1.0, hi)) break;
        lambda = next;
    }
    if (it >= opt.max_iter) {
        finish(solution(lambda), lambda, it);
        res.converged = false;
        throw MaxIterationsExceeded(res);
    }
    return finish(solution(lambda), lambda, it + 1);
}

inline ReconstructionResult reconstruct(Estimator e, const ReconstructionInput& in, const SolverOptions& opt = {}) {
    return e == Estimator::MLE ? mle_reconstruct(in, opt) : lr_reconstruct(in, opt);
}

} // namespace qvfv
