#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "loko/association.hpp"
#include "loko/convex_core.hpp"
#include "loko/model.hpp"

namespace loko {

struct OuterRecord {
    int k = 0;
    double objective = 0.0;      // min rate (Mbit/s) or max squared PEB (m^2) of the incumbent
    double candidate = 0.0;      // same quantity for this pass's candidate, NaN when none
    int inner_iterations = 0;    // x-stage passes, or bisection halvings
    int feasible_samples = 0;    // L' summed over the pass
    bool sdr_feasible = true;    // every relaxed subproblem met its rows
    bool randomization_retried = false;
    bool accepted = false;       // candidate replaced the incumbent
};

struct RoutineTrace {
    std::string routine;
    std::vector<OuterRecord> outer;
    bool converged = false;
    std::string stop_reason;  // "tolerance" | "max_outer"

    int outer_iterations() const { return static_cast<int>(outer.size()); }
};

struct RoutineResult {
    Eigen::VectorXd x;
    Serving serving;
    Eigen::VectorXd rate;    // bit/s
    Eigen::VectorXd peb_sq;  // m^2
    double min_rate = 0.0;   // bit/s
    double max_peb_sq = 0.0;
    RelaxedState relaxed;    // last relaxed solution, A_relax filled from the association
    RoutineTrace trace;
};

namespace detail {

struct Candidate {
    Eigen::VectorXd x;
    Serving serving;
    double min_rate = 0.0;
    double max_peb_sq = kInf;
};

inline Candidate assess(const Geometry& geom, const Eigen::VectorXd& x, Serving serving) {
    Candidate c{x, std::move(serving)};
    const auto ev = evaluate(geom, x, c.serving);
    c.min_rate = ev.min_rate;
    c.max_peb_sq = ev.max_peb_sq;
    return c;
}

inline std::optional<Candidate> try_associate(const Geometry& geom, const Eigen::VectorXd& x, AssocMode mode,
                                              const AssocThresholds& th) {
    try {
        return assess(geom, x, association_step(geom, x, mode, th));
    } catch (const RowInfeasibleError&) {
        return std::nullopt;
    }
}

/// Sites serving at least one row get the relaxed association floor as a
/// lower bound on their diagonal entry.
inline Eigen::VectorXd serving_floor(const Serving& serving, Index S, double rho) {
    Eigen::VectorXd lb = Eigen::VectorXd::Zero(S);
    for (Index j : serving)
        if (j != kLte) lb(j) = rho;
    return lb;
}

inline Eigen::VectorXd interferers(const Geometry& geom, Index t, Index j) {
    Eigen::VectorXd a = geom.gain.row(t).transpose();
    a(j) = 0.0;
    return a;
}

inline PebRow peb_row(const Geometry& geom, Index t, double rhs) {
    return {geom.nu.row(t).transpose(), geom.F[static_cast<std::size_t>(t)], 1.0, rhs};
}

/// Randomisation with one 4L retry; nullopt when both attempts fail.
template <class Pred, class Score>
std::optional<RandomizeResult> randomize_with_retry(const RelaxedState& st, Index G, Pred&& pred, Score&& score,
                                                    int L, std::uint64_t seed, bool* retried) {
    try {
        return gaussian_randomize(st.x_bar, st.X, G, pred, score, L, seed);
    } catch (const RandomizationFailure&) {
    }
    if (retried) *retried = true;
    try {
        return gaussian_randomize(st.x_bar, st.X, G, pred, score, 4 * L, stream_seed(seed, "retry"));
    } catch (const RandomizationFailure&) {
        return std::nullopt;
    }
}

inline Eigen::MatrixXd relaxed_association(const Serving& serving, Index S, double rho) {
    Eigen::MatrixXd A = association_matrix(serving, S);
    return rho > 0.0 ? Eigen::MatrixXd(A * rho) : A;
}

/// Relative-change rule: two consecutive passes below tol.
inline bool settled(const std::vector<OuterRecord>& outer, double tol) {
    if (outer.size() < 3) return false;
    auto small = [&](std::size_t k) {
        const double a = outer[k - 1].objective;
        const double b = outer[k].objective;
        if (a == b) return true;
        return std::abs(b - a) <= tol * std::max(std::abs(a), 1e-300);
    };
    const std::size_t n = outer.size() - 1;
    return small(n) && small(n - 1);
}

}  // namespace detail

/// Throughput routine: maximise the smallest rate subject to b_t <= zeta_b_sq.
/// `x_start` (optional) is the linearisation point of the first pass and, when
/// it admits a feasible association, the starting incumbent.
inline RoutineResult throughput_routine(const Geometry& geom, Index budget, double zeta_b_sq, const Serving& init,
                                        const SolverConfig& cfg, const Eigen::VectorXd* x_start = nullptr) {
    validate(cfg);
    const Index S = geom.num_sites;
    const Index G = budget;
    if (G < 1 || G > S) throw DomainError("throughput_routine: budget must lie in [1, S]");
    const double rho = cfg.assoc_floor * static_cast<double>(G) / static_cast<double>(S);
    AssocThresholds th;
    th.peb_sq = zeta_b_sq;

    RoutineResult res;
    res.trace.routine = "throughput";
    std::optional<detail::Candidate> incumbent;
    Eigen::VectorXd lin = Eigen::VectorXd::Constant(S, static_cast<double>(G) / static_cast<double>(S));
    if (x_start) {
        lin = *x_start;
        if (x_start->sum() == static_cast<double>(G)) incumbent = detail::try_associate(geom, *x_start, AssocMode::throughput, th);
    }
    Serving A = incumbent ? incumbent->serving : init;

    // Memo of the last association so predicate and score share one evaluation.
    Eigen::VectorXd memo_x;
    std::optional<detail::Candidate> memo;
    auto lookup = [&](const Eigen::VectorXd& x) -> const std::optional<detail::Candidate>& {
        if (memo_x.size() != x.size() || memo_x != x) {
            memo_x = x;
            memo = detail::try_associate(geom, x, AssocMode::throughput, th);
        }
        return memo;
    };
    auto pred = [&](const Eigen::VectorXd& x) { return lookup(x).has_value(); };
    auto score = [&](const Eigen::VectorXd& x) { return lookup(x)->min_rate; };

    for (int k = 0; k < cfg.max_outer; ++k) {
        OuterRecord rec;
        rec.k = k;
        std::optional<detail::Candidate> best;
        double prev_obj = std::numeric_limits<double>::quiet_NaN();
        for (int i = 0; i < cfg.max_inner; ++i) {
            SdrSpec spec;
            spec.num_sites = S;
            spec.budget = G;
            spec.diag_lower = detail::serving_floor(A, S, rho);
            for (Index t = 0; t < geom.num_test_points; ++t) {
                const Index j = A[static_cast<std::size_t>(t)];
                if (j == kLte) continue;
                if (std::isfinite(zeta_b_sq)) spec.peb_rows.push_back(detail::peb_row(geom, t, zeta_b_sq));
                ObjectiveRow row;
                row.a = detail::interferers(geom, t, j);
                row.g = geom.gain(t, j);
                row.noise = geom.nr_noise;
                row.y = optimal_y(row.g, row.a.dot(lin), row.noise);
                spec.objective_rows.push_back(std::move(row));
            }
            const auto out = solve_maximin_sdr(spec);
            rec.sdr_feasible = rec.sdr_feasible && out.feasible;
            res.relaxed = out.state;
            ++rec.inner_iterations;

            const auto rnd = detail::randomize_with_retry(
                out.state, G, pred, score, cfg.n_rand,
                stream_seed(cfg.seed, "throughput/" + std::to_string(k) + "/" + std::to_string(i)),
                &rec.randomization_retried);
            if (!rnd) break;
            rec.feasible_samples += rnd->feasible_samples;
            auto cand = *lookup(rnd->x);
            lin = cand.x;
            const double obj = cand.min_rate;
            if (!best || obj > best->min_rate) best = std::move(cand);
            if (std::isfinite(prev_obj) && std::abs(obj - prev_obj) <= cfg.tol_inner * std::max(std::abs(prev_obj), 1e-300))
                break;
            prev_obj = obj;
        }

        rec.candidate = best ? best->min_rate * 1e-6 : std::numeric_limits<double>::quiet_NaN();
        if (best && (!incumbent || best->min_rate > incumbent->min_rate)) {
            incumbent = std::move(best);
            rec.accepted = true;
        }
        if (!incumbent) {
            // Tightest threshold the rounded relaxed point could meet.
            const Eigen::VectorXd xr = top_g(res.relaxed.x_bar, G);
            const auto active = active_sites(xr);
            double need = 0.0;
            for (Index t = 0; t < geom.num_test_points; ++t) {
                const auto o = row_options(geom, xr, active, t);
                need = std::max(need, std::min(o.lte_peb_sq, o.nr_peb_sq));
            }
            throw InfeasibleError("throughput routine: no deployment meets the PEB threshold", std::sqrt(need));
        }
        A = incumbent->serving;  // A-step on the incumbent deployment
        rec.objective = incumbent->min_rate * 1e-6;
        res.trace.outer.push_back(rec);
        if (detail::settled(res.trace.outer, cfg.tol_inner)) {
            res.trace.converged = true;
            res.trace.stop_reason = "tolerance";
            break;
        }
    }
    if (!res.trace.converged) res.trace.stop_reason = "max_outer";

    const auto ev = evaluate(geom, incumbent->x, incumbent->serving);
    res.x = incumbent->x;
    res.serving = incumbent->serving;
    res.rate = ev.rate;
    res.peb_sq = ev.peb_sq;
    res.min_rate = ev.min_rate;
    res.max_peb_sq = ev.max_peb_sq;
    res.relaxed.A_relax = detail::relaxed_association(res.serving, S, 1.0);
    return res;
}

/// Positioning routine: minimise the largest squared PEB subject to
/// r_t >= zeta_r_bps, by bisection over the PEB threshold.
inline RoutineResult positioning_routine(const Geometry& geom, Index budget, double zeta_r_bps, const Serving& init,
                                         const SolverConfig& cfg, const Eigen::VectorXd* x_start = nullptr) {
    validate(cfg);
    const Index S = geom.num_sites;
    const Index G = budget;
    if (G < 1 || G > S) throw DomainError("positioning_routine: budget must lie in [1, S]");
    const double rho = cfg.assoc_floor * static_cast<double>(G) / static_cast<double>(S);
    const double kappa = zeta_r_bps > 0.0 ? std::exp2(zeta_r_bps / geom.nr_bandwidth) - 1.0 : 0.0;
    AssocThresholds th;
    th.rate_bps = zeta_r_bps;

    RoutineResult res;
    res.trace.routine = "positioning";
    auto usable = [](const std::optional<detail::Candidate>& c) { return c && std::isfinite(c->max_peb_sq); };
    std::optional<detail::Candidate> incumbent;
    if (x_start && x_start->sum() == static_cast<double>(G)) {
        incumbent = detail::try_associate(geom, *x_start, AssocMode::positioning, th);
        if (!usable(incumbent)) incumbent.reset();
    }
    Serving A = incumbent ? incumbent->serving : init;

    Eigen::VectorXd memo_x;
    std::optional<detail::Candidate> memo;
    auto lookup = [&](const Eigen::VectorXd& x) -> const std::optional<detail::Candidate>& {
        if (memo_x.size() != x.size() || memo_x != x) {
            memo_x = x;
            memo = detail::try_associate(geom, x, AssocMode::positioning, th);
        }
        return memo;
    };

    for (int k = 0; k < cfg.max_outer; ++k) {
        OuterRecord rec;
        rec.k = k;
        std::optional<detail::Candidate> best;
        int call = 0;
        auto oracle = [&](double eta) -> std::optional<detail::Candidate> {
            SdrSpec spec;
            spec.num_sites = S;
            spec.budget = G;
            spec.diag_lower = detail::serving_floor(A, S, rho);
            for (Index t = 0; t < geom.num_test_points; ++t) {
                const Index j = A[static_cast<std::size_t>(t)];
                if (j == kLte) continue;  // x-independent row, left to the predicate
                spec.peb_rows.push_back(detail::peb_row(geom, t, eta));
                if (kappa > 0.0)
                    spec.rate_rows.push_back({detail::interferers(geom, t, j), geom.gain(t, j), geom.nr_noise, kappa});
            }
            SdrOutcome info;
            const auto st = solve_feasibility_sdr(spec, &info);
            const int id = call++;
            if (!st) {
                rec.sdr_feasible = false;
                return std::nullopt;
            }
            res.relaxed = *st;
            auto pred = [&](const Eigen::VectorXd& x) {
                const auto& c = lookup(x);
                return c.has_value() && c->max_peb_sq <= eta;
            };
            auto score = [&](const Eigen::VectorXd& x) { return -lookup(x)->max_peb_sq; };
            const auto rnd = detail::randomize_with_retry(
                *st, G, pred, score, cfg.n_rand,
                stream_seed(cfg.seed, "positioning/" + std::to_string(k) + "/" + std::to_string(id)),
                &rec.randomization_retried);
            if (!rnd) return std::nullopt;
            rec.feasible_samples += rnd->feasible_samples;
            auto cand = *lookup(rnd->x);
            if (!best || cand.max_peb_sq < best->max_peb_sq) best = cand;
            return cand;
        };

        BisectionResult<detail::Candidate> bis;
        if (incumbent) {
            const double hi = incumbent->max_peb_sq;
            bis = bisection<detail::Candidate>(0.0, hi, cfg.eps_bisect * hi, oracle, *incumbent);
        } else {
            double hi = 0.0;
            for (Index t = 0; t < geom.num_test_points; ++t)
                if (std::isfinite(geom.lte_peb(t))) hi = std::max(hi, geom.lte_peb(t) * geom.lte_peb(t));
            hi = hi > 0.0 ? 100.0 * hi : 1e6;
            try {
                bis = bisection<detail::Candidate>(0.0, hi, cfg.eps_bisect * hi, oracle);
            } catch (const InfeasibleError&) {
                throw InfeasibleError("positioning routine: no deployment meets the rate threshold", zeta_r_bps);
            }
        }
        rec.inner_iterations = bis.iterations;

        rec.candidate = best ? best->max_peb_sq : std::numeric_limits<double>::quiet_NaN();
        if (usable(best) && (!incumbent || best->max_peb_sq < incumbent->max_peb_sq)) {
            incumbent = std::move(best);
            rec.accepted = true;
        }
        if (!incumbent) throw InfeasibleError("positioning routine: no deployment meets the rate threshold", zeta_r_bps);
        A = incumbent->serving;
        rec.objective = incumbent->max_peb_sq;
        res.trace.outer.push_back(rec);
        if (detail::settled(res.trace.outer, cfg.tol_inner)) {
            res.trace.converged = true;
            res.trace.stop_reason = "tolerance";
            break;
        }
    }
    if (!res.trace.converged) res.trace.stop_reason = "max_outer";

    const auto ev = evaluate(geom, incumbent->x, incumbent->serving);
    res.x = incumbent->x;
    res.serving = incumbent->serving;
    res.rate = ev.rate;
    res.peb_sq = ev.peb_sq;
    res.min_rate = ev.min_rate;
    res.max_peb_sq = ev.max_peb_sq;
    res.relaxed.A_relax = detail::relaxed_association(res.serving, S, 1.0);
    return res;
}

// -- trace output ------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const OuterRecord& r) {
    nlohmann::ordered_json j;
    j["k"] = r.k;
    j["objective"] = r.objective;
    j["candidate"] = std::isfinite(r.candidate) ? nlohmann::ordered_json(r.candidate) : nlohmann::ordered_json();
    j["inner_iterations"] = r.inner_iterations;
    j["feasible_samples"] = r.feasible_samples;
    j["sdr_feasible"] = r.sdr_feasible;
    j["randomization_retried"] = r.randomization_retried;
    j["accepted"] = r.accepted;
    return j;
}

/// One JSON object per outer iteration; `tag` distinguishes routine runs.
inline void write_trace_jsonl(std::ostream& os, const RoutineTrace& tr, const std::string& tag = {}) {
    for (std::size_t i = 0; i < tr.outer.size(); ++i) {
        nlohmann::ordered_json j;
        if (!tag.empty()) j["run"] = tag;
        j["routine"] = tr.routine;
        j.update(to_json(tr.outer[i]));
        j["unit"] = tr.routine == "throughput" ? "Mbit/s" : "m^2";
        if (i + 1 == tr.outer.size()) {
            j["converged"] = tr.converged;
            j["stop_reason"] = tr.stop_reason;
        }
        os << j.dump() << '\n';
    }
}

}  // namespace loko
