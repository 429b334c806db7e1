#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "loko/model.hpp"

namespace loko {

// Row-separable association. With x fixed every row of the max-min (or
// min-max) program is independent, so per-row enumeration over
// {LTE} u {active sites} is exact. Among active sites only the strongest one
// can win: all of them share the row's 5G PEB.

enum class AssocMode { throughput, positioning, joint };

struct AssocThresholds {
    double peb_sq = kInf;   // throughput mode: b_t <= peb_sq (m^2)
    double rate_bps = 0.0;  // positioning mode: r_t >= rate_bps
    double mu = 0.0;        // joint mode
};

namespace detail {

/// Better-of for rows where the gNB wins ties.
inline Index pick(bool lte_ok, double lte_key, bool nr_ok, double nr_key, Index site) {
    if (nr_ok && (!lte_ok || nr_key >= lte_key)) return site;
    if (lte_ok) return kLte;
    return kLte - 1;  // nothing admissible
}

}  // namespace detail

inline Index associate_row(const RowOptions& o, AssocMode mode, const AssocThresholds& th) {
    const bool has_nr = o.best_site != kLte;
    switch (mode) {
    case AssocMode::throughput:
        return detail::pick(o.lte_peb_sq <= th.peb_sq, o.lte_rate, has_nr && o.nr_peb_sq <= th.peb_sq, o.best_rate,
                            o.best_site);
    case AssocMode::positioning: {
        const bool lte_ok = o.lte_rate >= th.rate_bps;
        const bool nr_ok = has_nr && o.best_rate >= th.rate_bps;
        if (nr_ok && lte_ok && o.nr_peb_sq == o.lte_peb_sq)  // then more rate
            return o.best_rate >= o.lte_rate ? o.best_site : kLte;
        return detail::pick(lte_ok, -o.lte_peb_sq, nr_ok, -o.nr_peb_sq, o.best_site);
    }
    case AssocMode::joint:
        return detail::pick(true, joint_term(o.lte_rate, o.lte_peb_sq, th.mu), has_nr,
                            joint_term(o.best_rate, o.nr_peb_sq, th.mu), o.best_site);
    }
    return kLte;
}

/// Exact association for binary x; throws RowInfeasibleError naming the first
/// row that has no admissible option.
inline Serving association_step(const Geometry& geom, const Eigen::Ref<const Eigen::VectorXd>& x, AssocMode mode,
                                const AssocThresholds& th) {
    const auto active = active_sites(x);
    Serving out(static_cast<std::size_t>(geom.num_test_points));
    for (Index t = 0; t < geom.num_test_points; ++t) {
        const Index j = associate_row(row_options(geom, x, active, t), mode, th);
        if (j < kLte)
            throw RowInfeasibleError(t, "test point " + std::to_string(t) + " has no option meeting the threshold");
        out[static_cast<std::size_t>(t)] = j;
    }
    return out;
}

/// Row-wise maximiser of r_t - mu b_t.
inline Serving best_association_given_x(const Geometry& geom, const Eigen::Ref<const Eigen::VectorXd>& x, double mu) {
    AssocThresholds th;
    th.mu = mu;
    return association_step(geom, x, AssocMode::joint, th);
}

/// Each test point takes the highest-SINR station across both tiers.
inline Serving hybrid_max_sinr(const Geometry& geom, const Eigen::Ref<const Eigen::VectorXd>& x) {
    const auto active = active_sites(x);
    Serving out(static_cast<std::size_t>(geom.num_test_points));
    for (Index t = 0; t < geom.num_test_points; ++t) {
        const auto o = row_options(geom, x, active, t);
        const Index j = detail::pick(o.lte_available, o.lte_sinr, o.best_site != kLte, o.best_sinr, o.best_site);
        out[static_cast<std::size_t>(t)] = j < kLte ? kLte : j;
    }
    return out;
}

/// SINR of the option each row is served by.
inline double served_sinr(const Geometry& geom, const Eigen::Ref<const Eigen::VectorXd>& x, Index t, Index j) {
    if (j == kLte) return geom.lte_sinr(t);
    return geom.gain(t, j) / (geom.gain.row(t).dot(x) - geom.gain(t, j) * x(j) + geom.nr_noise);
}

}  // namespace loko
