#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "loko/association.hpp"
#include "loko/kpi.hpp"
#include "loko/routines.hpp"

namespace loko {

struct BaselineResult {
    std::string name;
    Eigen::VectorXd x;
    Serving serving;
    Evaluation eval;
    double joint = 0.0;
    double mu = 0.0;
    double runtime_s = 0.0;  // wall clock, never written to result files
    long long evaluations = 0;
};

namespace detail {

inline BaselineResult finish(std::string name, const Geometry& geom, Eigen::VectorXd x, Serving serving, Index budget,
                             double mu, std::chrono::steady_clock::time_point start) {
    BaselineResult r;
    r.name = std::move(name);
    r.joint = joint_value(geom, x, serving, budget, mu).min;
    r.eval = evaluate(geom, x, serving);
    r.x = std::move(x);
    r.serving = std::move(serving);
    r.mu = mu;
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

/// Sum over test points of the SINR each one gets under hybrid association.
inline double total_hybrid_sinr(const Geometry& geom, const Eigen::VectorXd& x) {
    const auto s = hybrid_max_sinr(geom, x);
    double total = 0.0;
    for (Index t = 0; t < geom.num_test_points; ++t) total += served_sinr(geom, x, t, s[static_cast<std::size_t>(t)]);
    return total;
}

inline double hybrid_min_rate(const Geometry& geom, const Eigen::VectorXd& x) {
    return evaluate(geom, x, hybrid_max_sinr(geom, x)).min_rate;
}

}  // namespace detail

struct BseOptions {
    /// Keep eliminating below G while the hybrid min rate stays at or above
    /// this floor (bit/s). Unset: stop at exactly G sites.
    std::optional<double> min_rate_floor;
};

/// Greedy elimination from full deployment: each round drops the site whose
/// removal leaves the highest total SINR; lower index on ties.
inline BaselineResult modified_bse(const Geometry& geom, Index budget, double mu = 0.0, const BseOptions& opt = {}) {
    const auto start = std::chrono::steady_clock::now();
    const Index S = geom.num_sites;
    if (budget < 1 || budget > S) throw DomainError("modified_bse: budget must lie in [1, S]");
    Eigen::VectorXd x = Eigen::VectorXd::Ones(S);
    long long rounds = 0;
    auto eliminate_once = [&]() {
        Index drop = -1;
        double best = -kInf;
        for (Index j = 0; j < S; ++j) {
            if (x(j) < 0.5) continue;
            x(j) = 0.0;
            const double v = detail::total_hybrid_sinr(geom, x);
            x(j) = 1.0;
            if (drop < 0 || v > best) {
                drop = j;
                best = v;
            }
        }
        return drop;
    };
    while (x.sum() > static_cast<double>(budget)) {
        x(eliminate_once()) = 0.0;
        ++rounds;
    }
    if (opt.min_rate_floor) {
        while (x.sum() > 1.0) {
            const Index j = eliminate_once();
            x(j) = 0.0;
            if (detail::hybrid_min_rate(geom, x) < *opt.min_rate_floor) {
                x(j) = 1.0;
                break;
            }
            ++rounds;
        }
    }
    auto r = detail::finish("bse", geom, x, hybrid_max_sinr(geom, x), budget, mu, start);
    r.evaluations = rounds;
    return r;
}

/// Same topology with distance-invariant ranging noise on the 5G tier.
inline Topology fixed_variance_topology(Topology topo) {
    topo.nr.noise_model.alpha_meas = 0.0;
    return topo;
}

struct SdrToaOptions {
    bool rate_constraint = false;  // apply zeta_r inside the selection
    double zeta_r_bps = 0.0;
};

/// Positioning machinery run on the fixed-variance model; the chosen sites are
/// then scored under the true distance-dependent geometry.
inline BaselineResult modified_sdr_toa(const Topology& topo, const Geometry& true_geom, Index budget,
                                       const SolverConfig& cfg, double mu = 0.0, const SdrToaOptions& opt = {}) {
    const auto start = std::chrono::steady_clock::now();
    const Geometry fixed = precompute_geometry(fixed_variance_topology(topo));
    const double zeta = opt.rate_constraint ? opt.zeta_r_bps : 0.0;
    const Eigen::VectorXd full = Eigen::VectorXd::Ones(fixed.num_sites);
    const auto res = positioning_routine(fixed, budget, zeta, hybrid_max_sinr(fixed, full), cfg);
    AssocThresholds th;
    th.rate_bps = zeta;
    Serving serving;
    try {
        serving = association_step(true_geom, res.x, AssocMode::positioning, th);
    } catch (const RowInfeasibleError&) {
        serving = hybrid_max_sinr(true_geom, res.x);
    }
    return detail::finish("sdr-toa", true_geom, res.x, serving, budget, mu, start);
}

inline double binomial(Index n, Index k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (Index i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(r);
}

struct OracleOptions {
    double max_evaluations = 1e7;  // subsets x test points
    /// Visit subsets in a seeded random order; the optimum must not change.
    std::optional<std::uint64_t> shuffle_seed;
};

/// Exhaustive search over all deployments of at most G sites with the exact
/// row-wise association; returns the max-min joint optimum. Ties keep the
/// subset visited first in canonical (size, lexicographic) order.
inline BaselineResult exhaustive_oracle(const Geometry& geom, Index budget, double mu, const OracleOptions& opt = {}) {
    const auto start = std::chrono::steady_clock::now();
    const Index S = geom.num_sites;
    const Index T = geom.num_test_points;
    if (budget < 0 || budget > S) throw DomainError("exhaustive_oracle: budget must lie in [0, S]");
    double subsets = 0.0;
    for (Index k = 0; k <= budget; ++k) subsets += binomial(S, k);
    const double required = subsets * static_cast<double>(T);
    if (required > opt.max_evaluations)
        throw BudgetExceeded("exhaustive_oracle: " + std::to_string(static_cast<long long>(required)) +
                                 " row evaluations exceed the budget",
                             required);

    std::vector<std::vector<Index>> order;
    order.reserve(static_cast<std::size_t>(subsets));
    for (Index k = 0; k <= budget; ++k) {
        std::vector<bool> pick(static_cast<std::size_t>(S), false);
        std::fill(pick.begin(), pick.begin() + k, true);
        do {
            std::vector<Index> s;
            for (Index j = 0; j < S; ++j)
                if (pick[static_cast<std::size_t>(j)]) s.push_back(j);
            order.push_back(std::move(s));
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    std::vector<std::size_t> visit(order.size());
    std::iota(visit.begin(), visit.end(), std::size_t{0});
    if (opt.shuffle_seed) {
        auto rng = make_stream(*opt.shuffle_seed, "oracle-order");
        std::shuffle(visit.begin(), visit.end(), rng);
    }

    AssocThresholds th;
    th.mu = mu;
    double best = -kInf;
    std::size_t best_id = 0;
    bool found = false;
    Eigen::VectorXd x(S);
    for (std::size_t id : visit) {
        x.setZero();
        for (Index j : order[id]) x(j) = 1.0;
        double worst = kInf;
        for (Index t = 0; t < T; ++t) {
            const auto o = row_options(geom, x, order[id], t);
            const Index j = associate_row(o, AssocMode::joint, th);
            worst = std::min(worst, j == kLte ? joint_term(o.lte_rate, o.lte_peb_sq, mu)
                                              : joint_term(o.best_rate, o.nr_peb_sq, mu));
            if (found && worst < best) break;  // cannot win any more
        }
        if (!found || worst > best || (worst == best && id < best_id)) {
            best = worst;
            best_id = id;
            found = true;
        }
    }
    x.setZero();
    for (Index j : order[best_id]) x(j) = 1.0;
    auto r = detail::finish("oracle", geom, x, best_association_given_x(geom, x, mu), budget, mu, start);
    r.evaluations = static_cast<long long>(required);
    return r;
}

/// Uniformly random G sites from the "random-placement" stream.
inline BaselineResult random_placement(const Geometry& geom, Index budget, double mu, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    const Index S = geom.num_sites;
    if (budget < 1 || budget > S) throw DomainError("random_placement: budget must lie in [1, S]");
    std::vector<Index> ids(static_cast<std::size_t>(S));
    std::iota(ids.begin(), ids.end(), Index{0});
    auto rng = make_stream(seed, "random-placement");
    std::shuffle(ids.begin(), ids.end(), rng);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(S);
    for (Index k = 0; k < budget; ++k) x(ids[static_cast<std::size_t>(k)]) = 1.0;
    return detail::finish("random", geom, x, best_association_given_x(geom, x, mu), budget, mu, start);
}

/// LOKO wrapped as a baseline row for side-by-side comparisons.
inline BaselineResult loko_as_baseline(const Topology& topo, const Geometry& geom, const PlanConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const auto p = plan(topo, geom, cfg);
    return detail::finish("loko", geom, p.x, p.serving, topo.budget, cfg.mu, start);
}

}  // namespace loko
