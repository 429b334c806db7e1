#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "loko/association.hpp"
#include "loko/routines.hpp"

namespace loko {

struct PlanConfig {
    double mu = 0.0;                  // Mbit/s per m^2 of squared PEB
    std::optional<double> eps_outer;  // default: 0.05 mu, or 0.5 when mu = 0
    SolverConfig solver{};
    int max_tau = 5;

    double eps() const { return eps_outer ? *eps_outer : (mu > 0.0 ? 0.05 * mu : 0.5); }
};

inline void validate(const PlanConfig& c) {
    if (!(c.mu >= 0.0) || !std::isfinite(c.mu)) throw DomainError("plan.mu must be finite and >= 0");
    if (!(c.eps() > 0.0)) throw DomainError("plan.eps_outer must be > 0");
    if (c.max_tau < 1) throw DomainError("plan.max_tau must be >= 1");
    validate(c.solver);
}

/// Threshold-tuning state. r values are min rates in Mbit/s, b values are
/// largest squared PEBs in m^2, and zeta_b is kept on the squared scale too.
struct PlanState {
    int tau = 0;
    double zeta_r = 0.0;     // Mbit/s
    double zeta_b_sq = kInf; // m^2
    double omega_r = 1.0;
    double omega_b = 1.0;
    double r0 = 0.0;
    double b0 = 0.0;
    double r_prev = 0.0;
    double b_prev = 0.0;
    double mu = 0.0;
    double zeta_b_floor = 0.0;  // smallest max-PEB^2 already achieved by a plan
    double zeta_b_cap = kInf;   // (10 max_t u_t)^2
    double r_star = 0.0;
    double b_star = 0.0;
    Eigen::VectorXd x_star;
    Serving serving_star;
};

enum class Threshold { rate, peb };

/// Literal threshold update with clamps: zeta_r in [0, r0], zeta_b^2 in
/// [floor, cap]. Returns the new threshold and stores it in `s`.
inline double update_thresholds(PlanState& s, Threshold which) {
    if (which == Threshold::rate) {
        s.omega_r = s.r_prev > 0.0 ? (s.r_prev - s.mu) / s.r_prev : 0.0;
        s.zeta_r = std::clamp(s.omega_r * s.r0, 0.0, std::max(s.r0, 0.0));
        return s.zeta_r;
    }
    s.omega_b = s.b_prev > 0.0 ? (s.b_prev - 1.0) / s.b_prev : 0.0;
    double z = s.omega_b * s.b0;
    if (!(z >= s.zeta_b_floor)) z = s.zeta_b_floor;
    if (z > s.zeta_b_cap) z = s.zeta_b_cap;
    s.zeta_b_sq = z;
    return z;
}

/// Rounds a relaxed (x, A) pair: top-G sites, prune weak association entries
/// column-wise by delta, then each row takes its best-SINR surviving site.
/// Rows left empty fall back to LTE.
inline std::pair<Eigen::VectorXd, Serving> quantize(const Eigen::Ref<const Eigen::VectorXd>& x_hat,
                                                    const Eigen::Ref<const Eigen::MatrixXd>& A_hat, double delta,
                                                    const Geometry& geom, Index budget) {
    const Index S = geom.num_sites;
    const Index T = geom.num_test_points;
    if (x_hat.size() != S || A_hat.rows() != T || A_hat.cols() != S)
        throw ConstraintViolation("shape", "quantize: relaxed state does not match the geometry");
    const Eigen::VectorXd x = top_g(x_hat, budget);
    Eigen::MatrixXd A = A_hat;
    for (Index j = 0; j < S; ++j) {
        if (x(j) < 0.5) {
            A.col(j).setZero();
            continue;
        }
        const double cut = delta * A.col(j).maxCoeff();
        for (Index t = 0; t < T; ++t)
            if (A(t, j) <= cut) A(t, j) = 0.0;
    }
    Serving serving(static_cast<std::size_t>(T), kLte);
    for (Index t = 0; t < T; ++t) {
        double best = -1.0;
        for (Index j = 0; j < S; ++j) {
            if (A(t, j) == 0.0) continue;
            const double s = served_sinr(geom, x, t, j);
            if (s > best) {
                best = s;
                serving[static_cast<std::size_t>(t)] = j;
            }
        }
    }
    return {x, serving};
}

struct TauRecord {
    int tau = 0;
    double zeta_b_sq = 0.0;  // m^2
    double zeta_r = 0.0;     // Mbit/s
    double r = 0.0;          // throughput routine min rate, Mbit/s
    double b = 0.0;          // positioning routine max squared PEB, m^2
    double r_star = 0.0;
    double b_star = 0.0;
    double ratio = 0.0;
    bool throughput_feasible = true;
    bool positioning_feasible = true;
    int throughput_outer = 0;
    int positioning_outer = 0;
    double best_joint = 0.0;
};

struct PlanResult {
    Eigen::VectorXd x;
    Serving serving;
    Evaluation eval;
    double joint = 0.0;   // min_t (r_t - mu b_t)
    bool converged = false;
    std::string stop_reason;  // ratio | stalled | max_tau | infeasible
    std::vector<TauRecord> trace;
    std::vector<std::pair<std::string, RoutineTrace>> routine_traces;
    PlanConfig config;
    Index budget = 0;
};

namespace detail {

inline double tpr_ratio(double r0, double r, double b0, double b) {
    const double dr = r0 - r;
    const double db = b0 - b;
    if (std::abs(db) <= 1e-12 * std::max(1.0, std::abs(b0))) return std::abs(dr) <= 1e-12 * std::max(1.0, std::abs(r0)) ? 0.0 : kInf;
    return dr / db;
}

struct BestPlan {
    Eigen::VectorXd x;
    Serving serving;
    double joint = -kInf;
    bool has = false;

    void offer(const Geometry& geom, const Eigen::VectorXd& x_new, const Serving& s_new, Index budget, double mu) {
        const double v = joint_value(geom, x_new, s_new, budget, mu).min;
        if (!has || v > joint) {
            x = x_new;
            serving = s_new;
            joint = v;
            has = true;
        }
    }
    void offer(const Geometry& geom, const Eigen::VectorXd& x_new, Index budget, double mu) {
        offer(geom, x_new, best_association_given_x(geom, x_new, mu), budget, mu);
    }
};

}  // namespace detail

/// Adaptive threshold tuning around the two routines. Returns the best plan
/// seen by joint value; `converged` reports the ratio test.
inline PlanResult plan(const Topology& topo, const Geometry& geom, const PlanConfig& cfg) {
    validate(cfg);
    validate(topo);
    const Index S = geom.num_sites;
    const Index G = topo.budget;
    PlanResult out;
    out.config = cfg;
    out.budget = G;

    detail::BestPlan best;
    const Eigen::VectorXd full = Eigen::VectorXd::Ones(S);
    const Serving init = hybrid_max_sinr(geom, full);

    double max_u = 0.0;
    for (Index t = 0; t < geom.num_test_points; ++t)
        if (std::isfinite(geom.lte_peb(t))) max_u = std::max(max_u, geom.lte_peb(t));

    PlanState st;
    st.mu = cfg.mu;
    st.zeta_b_cap = max_u > 0.0 ? (10.0 * max_u) * (10.0 * max_u) : kInf;
    st.zeta_b_sq = st.zeta_b_cap;

    auto solver_for = [&](int tau) {
        SolverConfig c = cfg.solver;
        c.seed = stream_seed(cfg.solver.seed, "tau/" + std::to_string(tau));
        return c;
    };

    // Bootstrap: throughput only, PEB threshold far above every LTE fix.
    RoutineResult thr;
    try {
        thr = throughput_routine(geom, G, st.zeta_b_sq, init, solver_for(0));
    } catch (const InfeasibleError&) {
        // Only reachable without any LTE fix; hand back the strongest sites.
        Eigen::VectorXd strength = geom.gain.colwise().sum().transpose();
        best.offer(geom, top_g(strength, G), G, cfg.mu);
        out.x = best.x;
        out.serving = best.serving;
        out.eval = evaluate(geom, best.x, best.serving);
        out.joint = best.joint;
        out.stop_reason = "infeasible";
        return out;
    }
    out.routine_traces.emplace_back("tau0/throughput", thr.trace);
    best.offer(geom, thr.x, G, cfg.mu);
    best.offer(geom, thr.x, thr.serving, G, cfg.mu);
    st.r0 = thr.min_rate * 1e-6;
    st.b0 = std::isfinite(thr.max_peb_sq) ? thr.max_peb_sq : st.zeta_b_cap;
    st.r_prev = st.r_star = st.r0;
    st.b_prev = st.b_star = st.b0;
    {
        TauRecord rec;
        rec.zeta_b_sq = st.zeta_b_sq;
        rec.r = st.r0;
        rec.b = st.b0;
        rec.r_star = st.r0;
        rec.b_star = st.b0;
        rec.throughput_outer = thr.trace.outer_iterations();
        rec.best_joint = best.joint;
        out.trace.push_back(rec);
    }

    Eigen::VectorXd x_thr = thr.x;
    Serving s_thr = thr.serving;
    Eigen::VectorXd x_pos = thr.x;
    int stalled = 0;
    for (int tau = 1; tau <= cfg.max_tau; ++tau) {
        TauRecord rec;
        rec.tau = tau;
        st.tau = tau;
        const SolverConfig sc = solver_for(tau);

        rec.zeta_b_sq = update_thresholds(st, Threshold::peb);
        double r_tau = st.r_prev;
        try {
            // Start from the latest positioning plan when it already meets the threshold.
            const Eigen::VectorXd* start = &x_pos;
            auto t = throughput_routine(geom, G, st.zeta_b_sq, s_thr, sc, start);
            r_tau = t.min_rate * 1e-6;
            x_thr = t.x;
            s_thr = t.serving;
            best.offer(geom, t.x, G, cfg.mu);
            best.offer(geom, t.x, t.serving, G, cfg.mu);
            rec.throughput_outer = t.trace.outer_iterations();
            out.routine_traces.emplace_back("tau" + std::to_string(tau) + "/throughput", std::move(t.trace));
        } catch (const InfeasibleError&) {
            rec.throughput_feasible = false;
        }
        rec.r = r_tau;

        rec.zeta_r = update_thresholds(st, Threshold::rate);
        std::optional<RoutineResult> pos;
        try {
            pos = positioning_routine(geom, G, st.zeta_r * 1e6, s_thr, sc, &x_thr);
            rec.positioning_outer = pos->trace.outer_iterations();
            out.routine_traces.emplace_back("tau" + std::to_string(tau) + "/positioning", pos->trace);
        } catch (const InfeasibleError&) {
            rec.positioning_feasible = false;
        }
        if (!rec.throughput_feasible && !rec.positioning_feasible) {
            rec.best_joint = best.joint;
            out.trace.push_back(rec);
            out.stop_reason = "infeasible";
            break;
        }
        if (pos) {
            rec.b = pos->max_peb_sq;
            x_pos = pos->x;
            const auto [xq, sq] = quantize(pos->x, pos->relaxed.A_relax, cfg.solver.delta, geom, G);
            const auto ev = evaluate(geom, xq, sq);
            rec.r_star = ev.min_rate * 1e-6;
            rec.b_star = ev.max_peb_sq;
            best.offer(geom, xq, sq, G, cfg.mu);
            best.offer(geom, xq, G, cfg.mu);
            st.zeta_b_floor = st.zeta_b_floor > 0.0 ? std::min(st.zeta_b_floor, pos->max_peb_sq) : pos->max_peb_sq;
            st.b_prev = pos->max_peb_sq;
            st.r_star = rec.r_star;
            st.b_star = rec.b_star;
            st.x_star = xq;
            st.serving_star = sq;
        } else {
            rec.b = st.b_prev;
            rec.r_star = st.r_star;
            rec.b_star = st.b_star;
        }
        st.r_prev = r_tau;
        rec.ratio = detail::tpr_ratio(st.r0, rec.r_star, st.b0, rec.b_star);
        rec.best_joint = best.joint;
        const TauRecord& last = out.trace.back();
        stalled = (rec.r_star == last.r_star && rec.b_star == last.b_star && rec.best_joint == last.best_joint)
                      ? stalled + 1
                      : 0;
        out.trace.push_back(rec);
        if (pos && std::abs(rec.ratio - cfg.mu) <= cfg.eps()) {
            out.converged = true;
            out.stop_reason = "ratio";
            break;
        }
        // Quantised plan and incumbent frozen for two rounds: the ratio test will not move.
        if (stalled >= 2) {
            out.stop_reason = "stalled";
            break;
        }
    }
    if (out.stop_reason.empty()) out.stop_reason = "max_tau";

    out.x = best.x;
    out.serving = best.serving;
    out.eval = evaluate(geom, best.x, best.serving);
    out.joint = best.joint;
    return out;
}

inline PlanResult plan(const Topology& topo, const PlanConfig& cfg) { return plan(topo, precompute_geometry(topo), cfg); }

}  // namespace loko
