#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "loko/peb.hpp"
#include "loko/radio.hpp"
#include "loko/types.hpp"

namespace loko {

/// Serving choice of a test point that falls back to the LTE tier.
inline constexpr Index kLte = -1;

/// Per test point, the serving candidate site or kLte.
using Serving = std::vector<Index>;

inline std::vector<Index> active_sites(const Eigen::Ref<const Eigen::VectorXd>& x) {
    std::vector<Index> out;
    for (Index j = 0; j < x.size(); ++j)
        if (x(j) > 0.5) out.push_back(j);
    return out;
}

inline Eigen::MatrixXd association_matrix(std::span<const Index> serving, Index num_sites) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Index>(serving.size()), num_sites);
    for (std::size_t t = 0; t < serving.size(); ++t)
        if (serving[t] != kLte) A(static_cast<Index>(t), serving[t]) = 1.0;
    return A;
}

/// Inverse of association_matrix for rows with at most one unit entry.
inline Serving serving_from_matrix(const Eigen::Ref<const Eigen::MatrixXd>& A) {
    Serving out(static_cast<std::size_t>(A.rows()), kLte);
    for (Index t = 0; t < A.rows(); ++t) {
        Index best = kLte;
        for (Index j = 0; j < A.cols(); ++j)
            if (A(t, j) > 0.5 && (best == kLte || A(t, j) > A(t, best))) best = j;
        out[static_cast<std::size_t>(t)] = best;
    }
    return out;
}

// -- constraint checking ------------------------------------------------------

struct Violation {
    std::string constraint;  // budget | binary | association-requires-deployment | single-association | shape
    std::string detail;
};

inline std::vector<Violation> check_constraints(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                const Eigen::Ref<const Eigen::MatrixXd>& A, Index budget,
                                                double tol = 1e-9) {
    std::vector<Violation> out;
    if (A.cols() != x.size()) {
        out.push_back({"shape", "association has " + std::to_string(A.cols()) + " columns for " +
                                    std::to_string(x.size()) + " sites"});
        return out;
    }
    auto is_binary = [&](double v) { return std::abs(v) <= tol || std::abs(v - 1.0) <= tol; };
    for (Index j = 0; j < x.size(); ++j)
        if (!is_binary(x(j))) out.push_back({"binary", "x[" + std::to_string(j) + "] = " + std::to_string(x(j))});
    for (Index t = 0; t < A.rows(); ++t) {
        double row = 0.0;
        for (Index j = 0; j < A.cols(); ++j) {
            if (!is_binary(A(t, j)))
                out.push_back({"binary", "A[" + std::to_string(t) + "," + std::to_string(j) + "] not binary"});
            if (A(t, j) > x(j) + tol)
                out.push_back({"association-requires-deployment",
                               "test point " + std::to_string(t) + " served by undeployed site " + std::to_string(j)});
            row += A(t, j);
        }
        if (row > 1.0 + tol)
            out.push_back({"single-association", "test point " + std::to_string(t) + " has " + std::to_string(row) +
                                                     " serving sites"});
    }
    if (x.sum() > static_cast<double>(budget) + tol)
        out.push_back({"budget", std::to_string(x.sum()) + " sites deployed, budget " + std::to_string(budget)});
    return out;
}

inline void require_feasible(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& A,
                             Index budget) {
    const auto v = check_constraints(x, A, budget);
    if (!v.empty()) throw ConstraintViolation(v.front().constraint, v.front().constraint + ": " + v.front().detail);
}

// -- evaluation on cached geometry -----------------------------------------------

/// Options open to one test point under a fixed binary deployment. Every gNB
/// option shares the same 5G PEB, so only the strongest gNB matters for rate.
struct RowOptions {
    double lte_rate = 0.0;   // bit/s
    double lte_peb_sq = kInf;
    double lte_sinr = 0.0;
    bool lte_available = false;
    Index best_site = kLte;  // max-SINR active site, lowest index on ties
    double best_rate = 0.0;  // bit/s
    double best_sinr = 0.0;
    double nr_peb_sq = kInf;
};

/// Rate of test point t served by site j (bit/s) with interference from x.
inline double nr_rate(const Geometry& geom, const Eigen::Ref<const Eigen::VectorXd>& x, Index t, Index j) {
    const double interference = geom.gain.row(t).dot(x) - geom.gain(t, j) * x(j);
    return shannon_rate(geom.nr_bandwidth, geom.gain(t, j) / (interference + geom.nr_noise));
}

inline RowOptions row_options(const Geometry& geom, const Eigen::Ref<const Eigen::VectorXd>& x,
                              std::span<const Index> active, Index t) {
    RowOptions o;
    o.lte_available = geom.lte_available;
    o.lte_rate = geom.lte_rate(t);
    o.lte_sinr = geom.lte_sinr(t);
    o.lte_peb_sq = geom.lte_peb(t) * geom.lte_peb(t);
    if (active.empty()) return o;
    double received = 0.0;
    for (Index j : active) received += geom.gain(t, j) * x(j);
    for (Index j : active) {
        const double g = geom.gain(t, j);
        const double s = g / (received - g * x(j) + geom.nr_noise);
        if (o.best_site == kLte || s > o.best_sinr) {
            o.best_site = j;
            o.best_sinr = s;
        }
    }
    o.best_rate = shannon_rate(geom.nr_bandwidth, o.best_sinr);
    o.nr_peb_sq = nr_peb_squared(geom, t, active);
    return o;
}

struct Evaluation {
    Eigen::VectorXd rate;    // bit/s
    Eigen::VectorXd peb_sq;  // m^2, +inf when unbounded
    double min_rate = 0.0;   // bit/s
    double max_peb_sq = 0.0;
    double avg_peb = 0.0;    // m, mean of sqrt(peb_sq)
};

inline Evaluation evaluate(const Geometry& geom, const Eigen::Ref<const Eigen::VectorXd>& x,
                           std::span<const Index> serving) {
    const Index T = geom.num_test_points;
    if (static_cast<Index>(serving.size()) != T) throw DomainError("evaluate: serving vector has wrong length");
    Evaluation ev;
    ev.rate.resize(T);
    ev.peb_sq.resize(T);
    const auto active = active_sites(x);
    for (Index t = 0; t < T; ++t) {
        const Index j = serving[static_cast<std::size_t>(t)];
        if (j == kLte) {
            ev.rate(t) = geom.lte_rate(t);
            ev.peb_sq(t) = geom.lte_peb(t) * geom.lte_peb(t);
        } else {
            if (x(j) < 0.5) throw ConstraintViolation("association-requires-deployment",
                                                      "test point " + std::to_string(t) + " served by undeployed site");
            ev.rate(t) = nr_rate(geom, x, t, j);
            ev.peb_sq(t) = nr_peb_squared(geom, t, active);
        }
    }
    ev.min_rate = ev.rate.minCoeff();
    ev.max_peb_sq = ev.peb_sq.maxCoeff();
    ev.avg_peb = ev.peb_sq.array().sqrt().mean();
    return ev;
}

/// r_t - mu b_t with r in Mbit/s and b in m^2; mu = 0 ignores b entirely
/// so unbounded PEBs do not poison the throughput-only objective.
inline double joint_term(double rate_bps, double peb_sq, double mu) {
    if (mu == 0.0) return rate_bps * 1e-6;
    return rate_bps * 1e-6 - mu * peb_sq;
}

struct JointValue {
    Eigen::VectorXd per_test_point;
    double min = 0.0;
};

inline JointValue joint_value(const Geometry& geom, const Eigen::Ref<const Eigen::VectorXd>& x,
                              std::span<const Index> serving, Index budget, double mu) {
    require_feasible(x, association_matrix(serving, x.size()), budget);
    const auto ev = evaluate(geom, x, serving);
    JointValue out;
    out.per_test_point.resize(ev.rate.size());
    for (Index t = 0; t < ev.rate.size(); ++t) out.per_test_point(t) = joint_term(ev.rate(t), ev.peb_sq(t), mu);
    out.min = out.per_test_point.minCoeff();
    return out;
}

inline JointValue joint_value(const Topology& topo, const Eigen::Ref<const Eigen::VectorXd>& x,
                              const Eigen::Ref<const Eigen::MatrixXd>& A, double mu) {
    require_feasible(x, A, topo.budget);
    return joint_value(precompute_geometry(topo), x, serving_from_matrix(A), topo.budget, mu);
}

}  // namespace loko
