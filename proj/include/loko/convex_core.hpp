#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <map>
#include <string>
#include <vector>

#include "loko/rng.hpp"
#include "loko/sdp.hpp"
#include "loko/types.hpp"

namespace loko {

struct SolverConfig {
    /// Bisection tolerance as a fraction of the initial bracket width; the
    /// bracket itself comes from the incumbent deployment.
    double eps_bisect = 1.0 / 1024.0;
    int n_rand = 200;           // L
    double delta = 0.1;         // association pruning factor of the quantisation
    double tol_inner = 1e-4;
    int max_inner = 4;
    int max_outer = 8;
    /// Relaxed association weight used for the "association needs deployment"
    /// rows of the x-stage, as a fraction of the uniform level G / S.
    double assoc_floor = 0.5;
    std::uint64_t seed = 0;
};

inline void validate(const SolverConfig& c) {
    if (!(c.eps_bisect > 0.0 && c.eps_bisect < 1.0)) throw DomainError("solver.eps_bisect must lie in (0, 1)");
    if (c.n_rand < 1) throw DomainError("solver.n_rand must be >= 1");
    if (!(c.delta > 0.0 && c.delta < 1.0)) throw DomainError("solver.delta must lie in (0, 1)");
    if (!(c.tol_inner > 0.0)) throw DomainError("solver.tol_inner must be > 0");
    if (c.max_inner < 1 || c.max_outer < 1) throw DomainError("solver iteration caps must be >= 1");
    if (!(c.assoc_floor >= 0.0 && c.assoc_floor < 1.0)) throw DomainError("solver.assoc_floor must lie in [0, 1)");
}

struct RelaxedState {
    Eigen::MatrixXd X;
    Eigen::VectorXd x_bar;    // diag(X)
    Eigen::MatrixXd A_relax;  // T x S
    Eigen::MatrixXd y_aux;    // T x S
};

/// Maximiser of 2 y sqrt(g + g' + N') - y^2 (g' + N').
inline double optimal_y(double g, double g_int, double n_prime) {
    const double den = g_int + n_prime;
    if (!(den > 0.0)) throw DomainError("optimal_y: interference plus noise must be > 0");
    return std::sqrt(g + den) / den;
}

inline double quadratic_transform(double y, double g, double g_int, double n_prime) {
    return 2.0 * y * std::sqrt(g + g_int + n_prime) - y * y * (g_int + n_prime);
}

// -- relaxed subproblems --------------------------------------------------------

/// (weight) nu . diag X <= rhs <F, X>, the lifted squared-PEB row of one test point.
struct PebRow {
    Eigen::VectorXd nu;
    Eigen::MatrixXd F;  // strictly upper triangular
    double weight = 1.0;
    double rhs = 0.0;
};

/// kappa (a . diag X + noise) <= g, the lifted rate threshold of one gNB-served test point.
struct RateRow {
    Eigen::VectorXd a;
    double g = 0.0;
    double noise = 0.0;
    double kappa = 0.0;
};

/// One quadratic-transform objective term with its auxiliary y fixed.
struct ObjectiveRow {
    Eigen::VectorXd a;  // interferer gains, zero at the serving site
    double g = 0.0;
    double noise = 0.0;
    double y = 0.0;
};

struct SdrSpec {
    Index num_sites = 0;
    Index budget = 1;
    Eigen::VectorXd diag_lower;  // empty means no lower bounds
    std::vector<PebRow> peb_rows;
    std::vector<RateRow> rate_rows;
    std::vector<ObjectiveRow> objective_rows;
};

struct SdrOutcome {
    RelaxedState state;
    bool feasible = true;    // constraint rows satisfiable (phase I verdict)
    bool converged = true;
    double violation = 0.0;  // optimal normalised phase-I violation, <= 0 when feasible
    double objective = 0.0;  // min_t of the transformed objective terms, minus one
    int newton_steps = 0;
};

namespace detail {

inline constexpr double kFeasTol = 1e-6;

struct LinearRows {
    Eigen::MatrixXd G;  // rows over [svec X; s]
    Eigen::VectorXd c;
};

/// Normalised constraint rows; the last column (elastic s coefficient) is 0.
inline LinearRows constraint_rows(const SdrSpec& spec) {
    const Index n = spec.num_sites;
    const Index N = sdp::svec_size(n) + 1;
    const Index K = static_cast<Index>(spec.peb_rows.size() + spec.rate_rows.size());
    LinearRows r{Eigen::MatrixXd::Zero(K, N), Eigen::VectorXd::Zero(K)};
    Index k = 0;
    for (const auto& row : spec.peb_rows) {
        Eigen::MatrixXd M = -row.rhs * 0.5 * (row.F + row.F.transpose());
        M.diagonal() += row.weight * row.nu;
        Eigen::VectorXd g = sdp::svec(M);
        const double norm = g.norm();
        if (norm > 0.0) g /= norm;
        r.G.row(k).head(N - 1) = g.transpose();
        ++k;
    }
    for (const auto& row : spec.rate_rows) {
        const double norm = row.g > 0.0 ? row.g : 1.0;
        for (Index i = 0; i < n; ++i) r.G(k, sdp::svec_index(n, i, i)) = row.kappa * row.a(i) / norm;
        r.c(k) = (row.kappa * row.noise - row.g) / norm;
        ++k;
    }
    return r;
}

inline LinearRows box_rows(const SdrSpec& spec) {
    const Index n = spec.num_sites;
    const Index N = sdp::svec_size(n) + 1;
    std::vector<std::pair<Index, double>> lower;
    for (Index i = 0; i < spec.diag_lower.size(); ++i)
        if (spec.diag_lower(i) > 0.0) lower.emplace_back(i, spec.diag_lower(i));
    LinearRows r{Eigen::MatrixXd::Zero(n + static_cast<Index>(lower.size()), N),
                 Eigen::VectorXd::Zero(n + static_cast<Index>(lower.size()))};
    for (Index i = 0; i < n; ++i) {
        r.G(i, sdp::svec_index(n, i, i)) = 1.0;
        r.c(i) = -1.0;
    }
    Index k = n;
    for (const auto& [i, lb] : lower) {
        r.G(k, sdp::svec_index(n, i, i)) = -1.0;
        r.c(k) = lb;
        ++k;
    }
    return r;
}

inline LinearRows stack(const LinearRows& a, const LinearRows& b) {
    LinearRows r{Eigen::MatrixXd(a.G.rows() + b.G.rows(), a.G.cols()), Eigen::VectorXd(a.c.size() + b.c.size())};
    r.G << a.G, b.G;
    r.c << a.c, b.c;
    return r;
}

/// Strictly interior diagonal start with the requested trace.
inline Eigen::MatrixXd interior_start(const SdrSpec& spec) {
    const Index n = spec.num_sites;
    const double G = static_cast<double>(spec.budget);
    Eigen::VectorXd lb = Eigen::VectorXd::Zero(n);
    if (spec.diag_lower.size() == n) lb = spec.diag_lower.cwiseMax(0.0);
    const double room = static_cast<double>(n) - lb.sum();
    const double need = G - lb.sum();
    if (!(need > 0.0 && need < room))
        throw InfeasibleError("relaxed subproblem has no interior: diagonal lower bounds leave no room for the budget");
    const Eigen::VectorXd d = lb + (need / room) * (Eigen::VectorXd::Ones(n) - lb);
    return Eigen::MatrixXd(d.asDiagonal());
}

inline RelaxedState state_from(const Eigen::MatrixXd& X) {
    RelaxedState st;
    st.X = 0.5 * (X + X.transpose());
    st.x_bar = st.X.diagonal();
    return st;
}

inline Eigen::VectorXd row_values(const LinearRows& rows, const Eigen::MatrixXd& X) {
    Eigen::VectorXd v(rows.G.cols());
    v.head(v.size() - 1) = sdp::svec(X);
    v(v.size() - 1) = 0.0;
    return rows.G * v + rows.c;
}

struct PhaseOne {
    Eigen::MatrixXd X;
    double violation = 0.0;
    bool feasible = true;
    bool converged = true;
    int steps = 0;
};

/// min s over the normalised constraint rows relaxed by s. The search stops
/// once feasibility is certain, and with `stop_infeasible` also once
/// infeasibility is.
inline PhaseOne phase_one(const SdrSpec& spec, const LinearRows& cons, const Eigen::MatrixXd& X0,
                          bool stop_infeasible) {
    PhaseOne out;
    out.X = X0;
    if (cons.G.rows() == 0) {
        out.violation = -kInf;
        return out;
    }
    const Eigen::VectorXd start = row_values(cons, X0);
    const double worst = start.maxCoeff();
    if (worst < -1e-4) {
        out.violation = worst;
        return out;
    }
    LinearRows elastic = cons;
    elastic.G.col(elastic.G.cols() - 1).setConstant(-1.0);
    const LinearRows all = stack(elastic, box_rows(spec));
    sdp::Problem prob;
    prob.n = spec.num_sites;
    prob.trace = static_cast<double>(spec.budget);
    prob.sign = 1.0;
    prob.G = all.G;
    prob.c = all.c;
    sdp::Options opt;
    opt.gap_tol = 1e-8;
    opt.stop_below = -1e-4;
    if (stop_infeasible) opt.stop_bound_above = kFeasTol;
    const auto res = sdp::solve(prob, X0, std::max(worst, 0.0) + 1.0, opt);
    out.X = res.X;
    out.violation = row_values(cons, res.X).maxCoeff();
    out.feasible = out.violation <= kFeasTol;
    out.converged = res.converged;
    out.steps = res.newton_steps;
    return out;
}

}  // namespace detail

/// Relaxed x-stage: maximise the smallest transformed rate term
/// over the lifted variable. When the constraint rows are infeasible the rows
/// are relaxed by the smallest achievable violation and `feasible` is false.
inline SdrOutcome solve_maximin_sdr(const SdrSpec& spec) {
    const Index n = spec.num_sites;
    SdrOutcome out;
    if (spec.budget == n) {
        // Only diag = 1 is admissible; the rank-one point is the natural representative.
        out.state = detail::state_from(Eigen::MatrixXd::Ones(n, n));
        const auto cons = detail::constraint_rows(spec);
        out.violation = cons.G.rows() ? detail::row_values(cons, out.state.X).maxCoeff() : -kInf;
        out.feasible = out.violation <= detail::kFeasTol;
    } else {
        const auto cons = detail::constraint_rows(spec);
        const Eigen::MatrixXd X0 = detail::interior_start(spec);
        const auto p1 = detail::phase_one(spec, cons, X0, /*stop_infeasible=*/false);
        out.feasible = p1.feasible;
        out.converged = p1.converged;
        out.violation = p1.violation;
        out.newton_steps = p1.steps;
        Eigen::MatrixXd X = p1.X;

        if (!spec.objective_rows.empty()) {
            const double allowance = p1.feasible ? 0.0 : p1.violation + 1e-6 + 1e-3 * std::abs(p1.violation);
            detail::LinearRows hard = cons;
            hard.c.array() -= allowance;
            const auto all = detail::stack(hard, detail::box_rows(spec));

            sdp::Problem prob;
            prob.n = n;
            prob.trace = static_cast<double>(spec.budget);
            prob.sign = -1.0;
            prob.G = all.G;
            prob.c = all.c;
            const Eigen::VectorXd d = X.diagonal();
            double scale = kInf;
            for (const auto& r : spec.objective_rows) scale = std::min(scale, r.g / (r.a.dot(d) + r.noise));
            scale = std::max(scale, 1e-300);
            double s0 = kInf;
            for (const auto& r : spec.objective_rows) {
                prob.concave.push_back({r.a, r.g, r.noise, r.y, scale});
                s0 = std::min(s0, prob.concave.back().value(d));
            }
            sdp::Options opt;
            opt.gap_tol = 1e-7;
            const auto res = sdp::solve(prob, X, s0 - 1.0, opt);
            X = res.X;
            out.converged = out.converged && res.converged;
            out.newton_steps += res.newton_steps;
        }
        out.state = detail::state_from(X);
    }
    if (!spec.objective_rows.empty()) {
        double best = kInf;
        for (const auto& r : spec.objective_rows)
            best = std::min(best, quadratic_transform(r.y, r.g, r.a.dot(out.state.x_bar), r.noise) - 1.0);
        out.objective = best;
    }
    return out;
}

/// Relaxed feasibility check; nullopt when the lifted rows cannot be met.
inline std::optional<RelaxedState> solve_feasibility_sdr(const SdrSpec& spec, SdrOutcome* info = nullptr) {
    const Index n = spec.num_sites;
    const auto cons = detail::constraint_rows(spec);
    SdrOutcome local;
    if (spec.budget == n) {
        local.state = detail::state_from(Eigen::MatrixXd::Ones(n, n));
        local.violation = cons.G.rows() ? detail::row_values(cons, local.state.X).maxCoeff() : -kInf;
        local.feasible = local.violation <= detail::kFeasTol;
    } else {
        const auto p1 = detail::phase_one(spec, cons, detail::interior_start(spec), /*stop_infeasible=*/true);
        local.state = detail::state_from(p1.X);
        local.violation = p1.violation;
        local.feasible = p1.feasible;
        local.converged = p1.converged;
        local.newton_steps = p1.steps;
    }
    if (info) *info = local;
    if (!local.feasible) return std::nullopt;
    return local.state;
}

// -- bisection ------------------------------------------------------------------

template <class State>
struct BisectionResult {
    double eta = 0.0;   // smallest feasible threshold found (upper end of the final bracket)
    double lo = 0.0;
    double hi = 0.0;
    int iterations = 0;
    State state{};
};

/// Exactly ceil(log2((hi - lo) / eps)) halvings. `feasible(eta)` returns an
/// optional State; `known_at_hi` skips the verification call at hi.
template <class State, class Oracle>
BisectionResult<State> bisection(double lo, double hi, double eps, Oracle&& feasible,
                                 std::optional<State> known_at_hi = std::nullopt) {
    if (!(hi > lo) || !(eps > 0.0)) throw DomainError("bisection: need lo < hi and eps > 0");
    BisectionResult<State> out;
    if (known_at_hi) {
        out.state = std::move(*known_at_hi);
    } else {
        auto s = feasible(hi);
        if (!s) throw InfeasibleError("bisection: no feasible point at the upper end of the bracket", hi);
        out.state = std::move(*s);
    }
    const int count = static_cast<int>(std::ceil(std::log2((hi - lo) / eps) - 1e-12));
    for (int i = 0; i < std::max(count, 0); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (auto s = feasible(mid)) {
            hi = mid;
            out.state = std::move(*s);
        } else {
            lo = mid;
        }
        ++out.iterations;
    }
    out.lo = lo;
    out.hi = hi;
    out.eta = hi;
    return out;
}

// -- randomisation ----------------------------------------------------------------

/// Lower-triangular L with L L^T = X + jitter I, escalating jitter from 1e-12.
inline Eigen::MatrixXd stable_factorize(const Eigen::Ref<const Eigen::MatrixXd>& X, double* jitter_used = nullptr) {
    const Index n = X.rows();
    const Eigen::MatrixXd Xs = 0.5 * (X + X.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Xs, Eigen::EigenvaluesOnly);
    if (n > 0 && eig.eigenvalues()(0) < -1e-8)
        throw DomainError("stable_factorize: matrix is not positive semidefinite (eigenvalue " +
                          std::to_string(eig.eigenvalues()(0)) + ")");
    for (double jitter = 1e-12; jitter <= 1.0; jitter *= 10.0) {
        Eigen::LLT<Eigen::MatrixXd> llt(Xs + jitter * Eigen::MatrixXd::Identity(n, n));
        if (llt.info() == Eigen::Success) {
            if (jitter_used) *jitter_used = jitter;
            return llt.matrixL();
        }
    }
    throw NumericalError("stable_factorize: factorisation failed for every jitter level");
}

/// Binary vector with ones at the G largest entries, lower index first on ties.
inline Eigen::VectorXd top_g(const Eigen::Ref<const Eigen::VectorXd>& v, Index G) {
    std::vector<Index> idx(static_cast<std::size_t>(v.size()));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return v(a) > v(b); });
    Eigen::VectorXd x = Eigen::VectorXd::Zero(v.size());
    for (Index k = 0; k < std::min<Index>(G, v.size()); ++k) x(idx[static_cast<std::size_t>(k)]) = 1.0;
    return x;
}

struct RandomizeResult {
    Eigen::VectorXd x;
    double score = -kInf;
    int feasible_samples = 0;  // L'
    int unique_candidates = 0;
    bool sampled = true;       // false when the rank-one shortcut applied
};

/// Gaussian randomisation around the relaxed solution: draw xi ~ N(x_bar, X),
/// keep the G largest entries, filter with `feasible`, return the best by
/// `objective`. The plain top-G rounding of x_bar always competes as well.
template <class Pred, class Score>
RandomizeResult gaussian_randomize(const Eigen::Ref<const Eigen::VectorXd>& x_bar,
                                   const Eigen::Ref<const Eigen::MatrixXd>& X, Index G, Pred&& feasible,
                                   Score&& objective, int L, std::uint64_t seed) {
    if (L < 1) throw DomainError("gaussian_randomize: L must be >= 1");
    RandomizeResult out;
    const Index n = x_bar.size();
    const Eigen::VectorXd rounded = top_g(x_bar, G);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (X + X.transpose()), Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    const bool rank_one = n <= 1 || ev(n - 2) <= 1e-6 * std::max(ev(n - 1), 1e-300);
    if (rank_one && feasible(rounded)) {
        out.x = rounded;
        out.score = objective(rounded);
        out.feasible_samples = 1;
        out.unique_candidates = 1;
        out.sampled = false;
        return out;
    }

    const Eigen::MatrixXd Lf = stable_factorize(X);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::map<std::vector<bool>, bool> seen;  // support -> passes the predicate
    auto consider = [&](const Eigen::VectorXd& cand) {
        std::vector<bool> key(static_cast<std::size_t>(n));
        for (Index j = 0; j < n; ++j) key[static_cast<std::size_t>(j)] = cand(j) > 0.5;
        if (auto it = seen.find(key); it != seen.end()) {
            out.feasible_samples += it->second ? 1 : 0;
            return;
        }
        const bool ok = feasible(cand);
        seen.emplace(std::move(key), ok);
        ++out.unique_candidates;
        if (!ok) return;
        ++out.feasible_samples;
        const double sc = objective(cand);
        if (sc > out.score || out.x.size() == 0) {
            out.score = sc;
            out.x = cand;
        }
    };
    consider(rounded);
    Eigen::VectorXd z(n);
    for (int l = 0; l < L; ++l) {
        for (Index j = 0; j < n; ++j) z(j) = normal(rng);
        consider(top_g(x_bar + Lf * z, G));
    }
    if (out.x.size() == 0) throw RandomizationFailure("gaussian randomisation: no sample satisfies the constraints");
    return out;
}

}  // namespace loko
