#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "loko/detail/normal.hpp"
#include "loko/detail/quadrature.hpp"
#include "loko/radio.hpp"
#include "loko/types.hpp"

namespace loko {

/// sigma(d) = sigma0 (d / d0)^(alpha / 2)
inline double noise_sigma(const NoiseModel& nm, double d) {
    if (!(d > 0.0)) throw DomainError("noise_sigma: distance must be > 0, got " + std::to_string(d));
    if (nm.alpha_meas == 0.0) return nm.sigma0;
    return nm.sigma0 * std::pow(d / nm.d0, 0.5 * nm.alpha_meas);
}

/// Integrand of the nu weight for a ToA range with Gaussian noise and a
/// uniform NLoS bias on [0, lambda]. The lambda of `nm` is ignored in favour
/// of the explicit argument.
inline double h_integrand(double y, double lambda, double d, const NoiseModel& nm) {
    if (!(lambda > 0.0)) throw DomainError("h_integrand: lambda must be > 0");
    const double sigma = noise_sigma(nm, d);
    constexpr double sqrt2 = std::numbers::sqrt2;
    const double k = nm.alpha_meas * sigma / (d * sqrt2);
    const double c = lambda / (sigma * sqrt2);
    const double e1 = -(y + c) * (y + c);
    const double e2 = -y * y;
    const double p1 = 1.0 + nm.alpha_meas * lambda / (2.0 * d) + k * y;
    const double p2 = 1.0 + k * y;
    const double m = std::max(e1, e2);
    const double diff = std::exp(e1 - m) * p1 - std::exp(e2 - m) * p2;
    if (diff == 0.0 || m == -kInf) return 0.0;
    const double log_num = 2.0 * (m + std::log(std::abs(diff)));
    const double log_den = detail::log_q_diff(sqrt2 * y, sqrt2 * y + lambda / sigma);
    if (log_den == -kInf || log_num == -kInf) return 0.0;
    return std::exp(log_num - log_den);
}

struct NuOptions {
    double rel_tol = 1e-10;
    double edge_ratio = 1e-14;  // truncate where h drops below this fraction of its peak
    int max_panels = 4000;
};

/// Information weight nu = (1 / (lambda sigma pi sqrt 2)) * integral of h over y.
inline double nu_weight(double d, double lambda, const NoiseModel& nm, const NuOptions& opt = {}) {
    const double sigma = noise_sigma(nm, d);
    if (!(lambda > 0.0)) throw DomainError("nu_weight: lambda must be > 0");
    const double c = lambda / (sigma * std::numbers::sqrt2);
    auto h = [&](double y) { return h_integrand(y, lambda, d, nm); };

    // Mass sits in two bumps, around y = -c and y = 0.
    double peak = std::max({h(0.0), h(-c), h(-0.5 * c), h(0.5), h(-c - 0.5)});
    if (!(peak > 0.0)) throw NumericalError("nu_weight: integrand vanishes everywhere", kInf);
    const double floor = opt.edge_ratio * peak;
    double w = 6.0;
    for (int grow = 0; grow < 12; ++grow) {
        bool wide = h(-c - w) <= floor && h(w) <= floor;
        if (c > 2.0 * w) wide = wide && h(-c + w) <= floor && h(-w) <= floor;
        if (wide) break;
        w *= 2.0;
    }
    std::vector<double> cuts;
    if (c > 2.0 * w) {
        cuts = {-c - w, -c, -c + w, -w, 0.0, w};
    } else {
        cuts = {-c - w, -c, 0.0, w};
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    const auto q = detail::integrate_adaptive(h, cuts, opt.rel_tol, 0.0, opt.max_panels);
    if (!q.converged) {
        throw NumericalError("nu_weight: quadrature did not converge (d=" + std::to_string(d) +
                                 ", lambda=" + std::to_string(lambda) + ")",
                             q.error / std::abs(q.value));
    }
    return q.value / (lambda * sigma * std::numbers::pi * std::numbers::sqrt2);
}

struct Anchor {
    Position position;
    double nu = 0.0;  // 1/m^2
};

namespace detail {

inline double peb_squared_from_bearings(std::span<const double> nu, std::span<const double> theta) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < nu.size(); ++i) {
        num += nu[i];
        for (std::size_t j = i + 1; j < nu.size(); ++j) {
            const double s = std::sin(theta[j] - theta[i]);
            den += nu[i] * nu[j] * s * s;
        }
    }
    if (nu.size() < 2 || !(den > 1e-13 * num * num))
        throw UnboundedPebError("PEB is unbounded: fewer than two non-collinear anchors");
    return num / den;
}

}  // namespace detail

/// Position error bound at p: sqrt(sum nu / sum_{i<j} nu_i nu_j sin^2(theta_j - theta_i)).
inline double peb(std::span<const Anchor> anchors, Position p) {
    std::vector<double> nu;
    std::vector<double> theta;
    for (const auto& a : anchors) {
        if (!(a.nu > 0.0) || !std::isfinite(a.nu)) throw DomainError("peb: anchor weights must be finite and > 0");
        nu.push_back(a.nu);
        theta.push_back(bearing(p, a.position));
    }
    return std::sqrt(detail::peb_squared_from_bearings(nu, theta));
}

/// Deployment-independent quantities, cached once per topology.
struct Geometry {
    Index num_sites = 0;
    Index num_test_points = 0;
    Eigen::MatrixXd distance;  // T x S, m
    Eigen::MatrixXd theta;     // T x S, rad, bearing of site j seen from test point t
    Eigen::MatrixXd gain;      // T x S, 5G tier
    Eigen::MatrixXd nu;        // T x S, 1/m^2
    std::vector<Eigen::MatrixXd> F;  // per test point, S x S strictly upper triangular
    Eigen::VectorXd lte_peb;   // u_t, m (+inf without a bounded LTE fix)
    Eigen::VectorXd lte_rate;  // c_t, bit/s
    Eigen::VectorXd lte_sinr;
    bool lte_available = false;
    double nr_noise = 0.0;      // N'
    double nr_bandwidth = 0.0;  // W_g, Hz
    double lte_bandwidth = 0.0;

    Eigen::MatrixXd V(Index t) const { return nu.row(t).transpose().asDiagonal(); }
};

inline double peb_quadratic_form(const Eigen::Ref<const Eigen::VectorXd>& nu_t, const Eigen::Ref<const Eigen::MatrixXd>& F_t,
                                 const Eigen::Ref<const Eigen::VectorXd>& x) {
    const double num = nu_t.dot(x);
    const double den = x.dot(F_t.transpose() * x);
    if (!(den > 1e-13 * num * num)) throw UnboundedPebError("PEB quadratic form is zero for this deployment");
    return num / den;
}

/// Squared 5G PEB at test point t for binary x, +inf when unbounded. Only
/// touches active sites, so it is cheap inside enumeration loops.
inline double nr_peb_squared(const Geometry& geom, Index t, std::span<const Index> active) {
    double num = 0.0;
    double den = 0.0;
    const auto& F = geom.F[static_cast<std::size_t>(t)];
    for (std::size_t a = 0; a < active.size(); ++a) {
        const Index i = active[a];
        num += geom.nu(t, i);
        for (std::size_t b = a + 1; b < active.size(); ++b) {
            const Index j = active[b];
            den += i < j ? F(i, j) : F(j, i);
        }
    }
    if (!(den > 1e-13 * num * num)) return kInf;
    return num / den;
}

inline Geometry precompute_geometry(const Topology& topo, const NuOptions& opt = {}) {
    validate(topo);
    const Index S = topo.num_sites();
    const Index T = topo.num_test_points();
    const Index E = topo.num_enbs();
    Geometry g;
    g.num_sites = S;
    g.num_test_points = T;
    g.distance.resize(T, S);
    g.theta.resize(T, S);
    g.gain.resize(T, S);
    g.nu.resize(T, S);
    g.F.assign(static_cast<std::size_t>(T), Eigen::MatrixXd::Zero(S, S));
    g.lte_peb.resize(T);
    g.lte_rate.resize(T);
    g.lte_sinr.resize(T);
    g.lte_available = E > 0;
    g.nr_noise = normalized_noise(topo.nr, topo.constants);
    g.nr_bandwidth = topo.nr.bandwidth;
    g.lte_bandwidth = topo.lte.bandwidth;

    const auto& nr_nm = topo.nr.noise_model;
    const auto& lte_nm = topo.lte.noise_model;
    std::vector<double> enb_nu(static_cast<std::size_t>(E));
    std::vector<double> enb_theta(static_cast<std::size_t>(E));
    for (Index t = 0; t < T; ++t) {
        const Position p = topo.test_points[static_cast<std::size_t>(t)];
        for (Index j = 0; j < S; ++j) {
            const Position s = topo.candidate_sites[static_cast<std::size_t>(j)];
            const double d = link_distance(p, s);
            g.distance(t, j) = d;
            g.theta(t, j) = bearing(p, s);
            g.gain(t, j) = channel_gain(topo.nr, topo.constants, d);
            g.nu(t, j) = nu_weight(d, nr_nm.lambda_max, nr_nm, opt);
        }
        auto& F = g.F[static_cast<std::size_t>(t)];
        for (Index i = 0; i < S; ++i) {
            for (Index j = i + 1; j < S; ++j) {
                const double sn = std::sin(g.theta(t, j) - g.theta(t, i));
                F(i, j) = g.nu(t, i) * g.nu(t, j) * sn * sn;
            }
        }

        const LteLink link = lte_best_rate(topo, t);
        g.lte_rate(t) = link.rate;
        g.lte_sinr(t) = link.sinr;
        for (Index m = 0; m < E; ++m) {
            const Position e = topo.enbs[static_cast<std::size_t>(m)];
            const double d = link_distance(p, e);
            enb_nu[static_cast<std::size_t>(m)] = nu_weight(d, lte_nm.lambda_max, lte_nm, opt);
            enb_theta[static_cast<std::size_t>(m)] = bearing(p, e);
        }
        try {
            g.lte_peb(t) = std::sqrt(detail::peb_squared_from_bearings(enb_nu, enb_theta));
        } catch (const UnboundedPebError&) {
            g.lte_peb(t) = kInf;
        }
    }
    return g;
}

}  // namespace loko
