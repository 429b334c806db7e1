#pragma once

// Primal log-barrier interior-point method for the small SDPs that appear in
// the planning routines:
//
//   minimise   sign * s
//   over       X (n x n symmetric), s (scalar)
//   s.t.       X > 0,  tr X = trace
//              G_k . v + c_k <= 0          (linear rows on v = [svec X; s])
//              phi_t(diag X) - s >= 0      (concave rows)
//
// svec stacks the upper triangle row by row with off-diagonals scaled by
// sqrt 2, so <A, X> = svec(A) . svec(X).

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "loko/types.hpp"

namespace loko::sdp {

inline Index svec_size(Index n) noexcept { return n * (n + 1) / 2; }

/// Position of entry (i, j), i <= j, inside svec.
inline Index svec_index(Index n, Index i, Index j) noexcept { return i * n - i * (i - 1) / 2 + (j - i); }

inline Eigen::VectorXd svec(const Eigen::Ref<const Eigen::MatrixXd>& A) {
    const Index n = A.rows();
    Eigen::VectorXd v(svec_size(n));
    Index p = 0;
    for (Index i = 0; i < n; ++i) {
        v(p++) = A(i, i);
        for (Index j = i + 1; j < n; ++j) v(p++) = std::numbers::sqrt2 * 0.5 * (A(i, j) + A(j, i));
    }
    return v;
}

inline Eigen::MatrixXd smat(const Eigen::Ref<const Eigen::VectorXd>& v, Index n) {
    Eigen::MatrixXd A(n, n);
    Index p = 0;
    for (Index i = 0; i < n; ++i) {
        A(i, i) = v(p++);
        for (Index j = i + 1; j < n; ++j) A(i, j) = A(j, i) = v(p++) / std::numbers::sqrt2;
    }
    return A;
}

/// phi(d) = (2 y sqrt(g + a.d + noise) - y^2 (a.d + noise) - 1) / scale; concave in d.
struct ConcaveRow {
    Eigen::VectorXd a;
    double g = 0.0;
    double noise = 0.0;
    double y = 0.0;
    double scale = 1.0;

    double value(const Eigen::Ref<const Eigen::VectorXd>& d) const {
        const double v = a.dot(d) + noise;
        return (2.0 * y * std::sqrt(g + v) - y * y * v - 1.0) / scale;
    }
};

struct Problem {
    Index n = 0;
    double trace = 1.0;
    double sign = 1.0;  // +1 minimises s, -1 maximises it
    Eigen::MatrixXd G;  // rows x (svec_size(n) + 1)
    Eigen::VectorXd c;
    std::vector<ConcaveRow> concave;
};

struct Options {
    double gap_tol = 1e-7;           // on m / t, in units of s
    double t0 = 1.0;
    double t_factor = 12.0;
    int max_newton = 400;
    double newton_tol = 1e-9;        // on the squared Newton decrement / 2
    /// Minimisation only: stop as soon as s drops below this value.
    double stop_below = -std::numeric_limits<double>::infinity();
    /// Minimisation only: stop once the duality bound proves s* above this value.
    double stop_bound_above = std::numeric_limits<double>::infinity();
};

struct Result {
    Eigen::MatrixXd X;
    double s = 0.0;
    double lower_bound = -std::numeric_limits<double>::infinity();  // valid for minimisation
    int newton_steps = 0;
    bool converged = false;
    std::string stop;  // "gap" | "stop_below" | "bound" | "max_newton" | "stalled"
};

namespace detail {

struct Workspace {
    const Problem& prob;
    Index n;
    Index N;  // svec_size(n) + 1
    std::vector<Index> diag_pos;

    explicit Workspace(const Problem& p) : prob(p), n(p.n), N(svec_size(p.n) + 1) {
        diag_pos.resize(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) diag_pos[static_cast<std::size_t>(i)] = svec_index(n, i, i);
    }

    Eigen::VectorXd diag_of(const Eigen::VectorXd& v) const {
        Eigen::VectorXd d(n);
        for (Index i = 0; i < n; ++i) d(i) = v(diag_pos[static_cast<std::size_t>(i)]);
        return d;
    }

    /// Barrier value f = t * sign * s - log det X - sum log(slacks); +inf outside the domain.
    double barrier(const Eigen::VectorXd& v, double t) const {
        const Eigen::MatrixXd X = smat(v.head(N - 1), n);
        Eigen::LLT<Eigen::MatrixXd> llt(X);
        if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
        double logdet = 0.0;
        const auto& L = llt.matrixLLT();
        for (Index i = 0; i < n; ++i) {
            const double li = L(i, i);
            if (!(li > 0.0)) return std::numeric_limits<double>::infinity();
            logdet += 2.0 * std::log(li);
        }
        double f = t * prob.sign * v(N - 1) - logdet;
        if (prob.G.rows() > 0) {
            const Eigen::VectorXd slack = -(prob.G * v + prob.c);
            for (Index k = 0; k < slack.size(); ++k) {
                if (!(slack(k) > 0.0)) return std::numeric_limits<double>::infinity();
                f -= std::log(slack(k));
            }
        }
        if (!prob.concave.empty()) {
            const Eigen::VectorXd d = diag_of(v);
            for (const auto& row : prob.concave) {
                const double u = row.g + row.a.dot(d) + row.noise;
                if (!(u > 0.0)) return std::numeric_limits<double>::infinity();
                const double psi = row.value(d) - v(N - 1);
                if (!(psi > 0.0)) return std::numeric_limits<double>::infinity();
                f -= std::log(psi);
            }
        }
        return f;
    }

    /// Gradient and Hessian of the barrier at a strictly feasible v.
    void derivatives(const Eigen::VectorXd& v, double t, Eigen::VectorXd& grad, Eigen::MatrixXd& H) const {
        const Eigen::MatrixXd X = smat(v.head(N - 1), n);
        const Eigen::MatrixXd W = X.llt().solve(Eigen::MatrixXd::Identity(n, n));
        grad.setZero(N);
        H.setZero(N, N);
        grad(N - 1) = t * prob.sign;
        grad.head(N - 1) = -svec(W);

        // Hessian of -log det X in svec coordinates.
        std::vector<Index> pi;
        std::vector<Index> pj;
        pi.reserve(static_cast<std::size_t>(N - 1));
        pj.reserve(static_cast<std::size_t>(N - 1));
        for (Index i = 0; i < n; ++i)
            for (Index j = i; j < n; ++j) {
                pi.push_back(i);
                pj.push_back(j);
            }
        constexpr double inv_sqrt2 = 0.70710678118654752440;
        for (Index p = 0; p < N - 1; ++p) {
            const Index a = pi[static_cast<std::size_t>(p)];
            const Index b = pj[static_cast<std::size_t>(p)];
            const double sp = a == b ? inv_sqrt2 : 1.0;
            for (Index q = p; q < N - 1; ++q) {
                const Index c = pi[static_cast<std::size_t>(q)];
                const Index d = pj[static_cast<std::size_t>(q)];
                const double sq = c == d ? inv_sqrt2 : 1.0;
                H(q, p) = (W(a, c) * W(b, d) + W(a, d) * W(b, c)) * sp * sq;
            }
        }

        if (prob.G.rows() > 0) {
            const Eigen::VectorXd slack = -(prob.G * v + prob.c);
            const Eigen::VectorXd inv = slack.cwiseInverse();
            grad.noalias() += prob.G.transpose() * inv;
            const Eigen::MatrixXd Gs = inv.asDiagonal() * prob.G;
            H.selfadjointView<Eigen::Lower>().rankUpdate(Gs.transpose());
        }
        if (!prob.concave.empty()) {
            const Eigen::VectorXd d = diag_of(v);
            Eigen::VectorXd w(N);
            for (const auto& row : prob.concave) {
                const double u = row.g + row.a.dot(d) + row.noise;
                const double su = std::sqrt(u);
                const double psi = row.value(d) - v(N - 1);
                const double dphi = (row.y / su - row.y * row.y) / row.scale;  // d phi / d (a.d)
                const double d2phi = -row.y / (2.0 * u * su) / row.scale;
                w.setZero();
                for (Index i = 0; i < n; ++i) w(diag_pos[static_cast<std::size_t>(i)]) = dphi * row.a(i);
                w(N - 1) = -1.0;
                grad.noalias() -= w / psi;
                H.selfadjointView<Eigen::Lower>().rankUpdate(w, 1.0 / (psi * psi));
                // -phi'' / psi is a positive multiple of a a^T on the diagonal block.
                const double curv = -d2phi / psi;
                if (curv > 0.0) {
                    for (Index i = 0; i < n; ++i) {
                        const Index pi_ = diag_pos[static_cast<std::size_t>(i)];
                        for (Index k = 0; k <= i; ++k) {
                            const Index pk = diag_pos[static_cast<std::size_t>(k)];
                            H(pi_, pk) += curv * row.a(i) * row.a(k);
                        }
                    }
                }
            }
        }
        H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
    }

    /// Number of barrier terms, the m in the m / t duality bound.
    double barrier_weight() const { return static_cast<double>(n + prob.G.rows() + static_cast<Index>(prob.concave.size())); }
};

}  // namespace detail

/// Runs the barrier method from a strictly feasible (X0, s0) with tr X0 = trace.
inline Result solve(const Problem& prob, const Eigen::MatrixXd& X0, double s0, const Options& opt = {}) {
    detail::Workspace ws(prob);
    const Index N = ws.N;
    Eigen::VectorXd v(N);
    v.head(N - 1) = svec(X0);
    v(N - 1) = s0;

    Result res;
    double t = opt.t0;
    if (!std::isfinite(ws.barrier(v, t))) throw NumericalError("sdp::solve: start point is not strictly feasible");

    // Equality direction a = svec(I) (trace), extended with 0 for s.
    Eigen::VectorXd a = Eigen::VectorXd::Zero(N);
    for (Index i = 0; i < prob.n; ++i) a(ws.diag_pos[static_cast<std::size_t>(i)]) = 1.0;

    const double m = ws.barrier_weight();
    Eigen::VectorXd grad;
    Eigen::MatrixXd H;
    int steps = 0;
    bool stalled = false;
    res.stop = "max_newton";
    while (steps < opt.max_newton) {
        // Centering.
        for (;;) {
            if (steps >= opt.max_newton) break;
            ws.derivatives(v, t, grad, H);
            Eigen::LLT<Eigen::MatrixXd> llt(H);
            if (llt.info() != Eigen::Success) {
                H.diagonal().array() += 1e-12 * (1.0 + H.diagonal().array().abs());
                llt.compute(H);
                if (llt.info() != Eigen::Success) throw NumericalError("sdp::solve: Hessian is not positive definite");
            }
            const Eigen::VectorXd Hg = llt.solve(grad);
            const Eigen::VectorXd Ha = llt.solve(a);
            const double nu = -a.dot(Hg) / a.dot(Ha);
            const Eigen::VectorXd dv = -(Hg + nu * Ha);
            const double decrement = -grad.dot(dv);
            ++steps;
            if (decrement / 2.0 <= opt.newton_tol) break;

            // Trial points are re-projected onto the trace plane against round-off
            // drift before the barrier sees them, so every accepted iterate is interior.
            auto trial = [&](double alpha) {
                Eigen::VectorXd w = v + alpha * dv;
                w -= (a.dot(w) - prob.trace) / a.dot(a) * a;
                return w;
            };
            const double f0 = ws.barrier(v, t);
            double alpha = 1.0;
            Eigen::VectorXd next = trial(alpha);
            double f1 = ws.barrier(next, t);
            while (!(std::isfinite(f1) && f1 <= f0 - 0.25 * alpha * decrement) && alpha > 1e-14) {
                alpha *= 0.5;
                next = trial(alpha);
                f1 = ws.barrier(next, t);
            }
            if (alpha <= 1e-14) {
                stalled = true;
                break;
            }
            v = std::move(next);

            if (prob.sign > 0.0 && v(N - 1) < opt.stop_below) break;
        }
        const double s = v(N - 1);
        if (prob.sign > 0.0) res.lower_bound = s - m / t;
        if (prob.sign > 0.0 && s < opt.stop_below) {
            res.stop = "stop_below";
            res.converged = true;
            break;
        }
        if (prob.sign > 0.0 && res.lower_bound > opt.stop_bound_above) {
            res.stop = "bound";
            res.converged = true;
            break;
        }
        if (stalled) {
            res.stop = "stalled";
            res.converged = m / t <= 1e3 * opt.gap_tol;
            break;
        }
        if (m / t <= opt.gap_tol) {
            res.stop = "gap";
            res.converged = true;
            break;
        }
        t *= opt.t_factor;
    }
    res.X = smat(v.head(N - 1), prob.n);
    res.s = v(N - 1);
    res.newton_steps = steps;
    return res;
}

}  // namespace loko::sdp
