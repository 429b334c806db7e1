#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "loko/types.hpp"

namespace loko {

/// Links shorter than this are evaluated at this distance; coincident points
/// would otherwise have no defined gain, noise or bearing.
inline constexpr double kMinLinkDistance = 1.0;  // m

inline double link_distance(Position a, Position b) noexcept { return std::max(distance(a, b), kMinLinkDistance); }

/// Average attenuation g = (4 pi f d / v)^-alpha * exp(-sigma_s^2 / (2 xi^2)).
inline double channel_gain(const TierParams& tier, const RadioConstants& consts, double d) {
    if (!(d > 0.0)) throw DomainError("channel_gain: distance must be > 0, got " + std::to_string(d));
    const double shadow = tier.shadowing_std / RadioConstants::xi;
    const double base = 4.0 * std::numbers::pi * tier.carrier_freq * d / RadioConstants::light_speed;
    return std::pow(base, -tier.pathloss_exp) * std::exp(-0.5 * shadow * shadow);
}

/// N' = N0 W / P, the noise power normalised by the transmit power.
inline double normalized_noise(const TierParams& tier, const RadioConstants& consts) noexcept {
    return consts.noise_psd * tier.bandwidth / tier.tx_power;
}

inline double shannon_rate(double bandwidth, double sinr) noexcept { return bandwidth * std::log2(1.0 + sinr); }

/// SINR of test point t served by site j; interference from every other
/// site with x_n > 0, weighted by x_n (so relaxed x works as well).
inline double sinr(const Topology& topo, std::span<const double> x, Index t, Index j) {
    const Position p = topo.test_points.at(static_cast<std::size_t>(t));
    const auto& sites = topo.candidate_sites;
    if (x.size() != sites.size()) throw DomainError("sinr: deployment vector has wrong length");
    const double g = channel_gain(topo.nr, topo.constants, link_distance(p, sites.at(static_cast<std::size_t>(j))));
    double interference = 0.0;
    for (std::size_t n = 0; n < sites.size(); ++n) {
        if (static_cast<Index>(n) == j || x[n] == 0.0) continue;
        interference += x[n] * channel_gain(topo.nr, topo.constants, link_distance(p, sites[n]));
    }
    return g / (interference + normalized_noise(topo.nr, topo.constants));
}

inline double gnb_rate(const Topology& topo, std::span<const double> x, Index t, Index j) {
    return shannon_rate(topo.nr.bandwidth, sinr(topo, x, t, j));
}

struct LteLink {
    double rate = 0.0;  // bit/s
    double sinr = 0.0;
    Index enb = -1;     // -1 when there is no LTE tier
    bool available = false;
};

/// Best eNB for test point t with all other eNBs interfering.
inline LteLink lte_best_rate(const Topology& topo, Index t) {
    LteLink out;
    const Position p = topo.test_points.at(static_cast<std::size_t>(t));
    const double noise = normalized_noise(topo.lte, topo.constants);
    double total = 0.0;
    std::vector<double> g(topo.enbs.size());
    for (std::size_t m = 0; m < g.size(); ++m) {
        g[m] = channel_gain(topo.lte, topo.constants, link_distance(p, topo.enbs[m]));
        total += g[m];
    }
    for (std::size_t m = 0; m < g.size(); ++m) {
        const double s = g[m] / (total - g[m] + noise);
        if (s > out.sinr || !out.available) {
            out.sinr = s;
            out.enb = static_cast<Index>(m);
            out.available = true;
        }
    }
    if (out.available) out.rate = shannon_rate(topo.lte.bandwidth, out.sinr);
    return out;
}

}  // namespace loko
