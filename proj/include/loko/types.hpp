#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace loko {

using Index = std::ptrdiff_t;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function (d <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// The Fisher information is singular: fewer than two anchors, or all anchors
/// on one line through the evaluation point.
class UnboundedPebError : public Error {
public:
    using Error::Error;
};

/// Quadrature or factorisation failed to reach the requested accuracy.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double achieved = kInf)
        : Error(what), achieved_(achieved) {}
    double achieved_tolerance() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// A deployment/association pair breaks one of the planning constraints.
class ConstraintViolation : public Error {
public:
    ConstraintViolation(std::string constraint, const std::string& what)
        : Error(what), constraint_(std::move(constraint)) {}
    const std::string& constraint() const noexcept { return constraint_; }

private:
    std::string constraint_;
};

/// No point satisfies the requested thresholds.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, double tightest = std::numeric_limits<double>::quiet_NaN())
        : Error(what), tightest_(tightest) {}
    /// Tightest satisfiable threshold estimate, NaN when unknown.
    double tightest_threshold() const noexcept { return tightest_; }

private:
    double tightest_;
};

/// Row-level infeasibility raised by the association step.
class RowInfeasibleError : public InfeasibleError {
public:
    RowInfeasibleError(Index row, const std::string& what) : InfeasibleError(what), row_(row) {}
    Index row() const noexcept { return row_; }

private:
    Index row_;
};

class RandomizationFailure : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string field = {}, std::size_t line = 0)
        : Error(what), field_(std::move(field)), line_(line) {}
    const std::string& field() const noexcept { return field_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string field_;
    std::size_t line_;
};

class BudgetExceeded : public Error {
public:
    BudgetExceeded(const std::string& what, double required) : Error(what), required_(required) {}
    double required_evaluations() const noexcept { return required_; }

private:
    double required_;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct Position {
    double x = 0.0;  // m
    double y = 0.0;  // m

    friend bool operator==(const Position&, const Position&) = default;
};

inline double distance(Position a, Position b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

/// Angle of `to` seen from `from`, measured from the horizontal axis.
inline double bearing(Position from, Position to) noexcept { return std::atan2(to.y - from.y, to.x - from.x); }

/// ToA ranging error statistics of one tier.
struct NoiseModel {
    double sigma0 = 1e-4;     // m, ranging std at the reference distance
    double d0 = 1.0;          // m
    double alpha_meas = 0.0;  // variance exponent
    double lambda_max = 1.0;  // m, maximum NLoS bias

    friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

struct TierParams {
    double tx_power = 1.0;         // W
    double carrier_freq = 1e9;     // Hz
    double bandwidth = 1e6;        // Hz
    double pathloss_exp = 2.0;     // channel propagation factor
    double shadowing_std = 0.0;    // dB
    NoiseModel noise_model{};

    friend bool operator==(const TierParams&, const TierParams&) = default;
};

struct RadioConstants {
    static constexpr double light_speed = 299'792'458.0;        // m/s
    static constexpr double xi = 10.0 / std::numbers::ln10;     // dB <-> neper scale
    /// -174 dBm/Hz
    static constexpr double thermal_noise_psd = 3.981071705534972e-21;

    double noise_psd = thermal_noise_psd;  // W/Hz

    friend bool operator==(const RadioConstants&, const RadioConstants&) = default;
};

struct Area {
    double width = 0.0;   // m
    double height = 0.0;  // m

    bool contains(Position p) const noexcept {
        return p.x >= 0.0 && p.y >= 0.0 && p.x <= width && p.y <= height;
    }
    friend bool operator==(const Area&, const Area&) = default;
};

struct Topology {
    std::vector<Position> enbs;
    std::vector<Position> candidate_sites;
    std::vector<Position> test_points;
    TierParams lte{};
    TierParams nr{};
    Index budget = 1;
    RadioConstants constants{};
    std::optional<Area> area;

    Index num_enbs() const noexcept { return static_cast<Index>(enbs.size()); }
    Index num_sites() const noexcept { return static_cast<Index>(candidate_sites.size()); }
    Index num_test_points() const noexcept { return static_cast<Index>(test_points.size()); }

    friend bool operator==(const Topology&, const Topology&) = default;
};

namespace detail {

inline void require_finite_positive(double v, const char* what) {
    if (!(std::isfinite(v) && v > 0.0)) throw DomainError(std::string(what) + " must be finite and > 0");
}

inline void validate_positions(const std::vector<Position>& ps, const std::optional<Area>& area, const char* what) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& p = ps[i];
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw DomainError(std::string(what) + "[" + std::to_string(i) + "] has non-finite coordinates");
        if (area && !area->contains(p))
            throw DomainError(std::string(what) + "[" + std::to_string(i) + "] lies outside the deployment area");
        for (std::size_t k = 0; k < i; ++k) {
            if (ps[k] == p)
                throw DomainError(std::string(what) + "[" + std::to_string(i) + "] duplicates entry " +
                                  std::to_string(k));
        }
    }
}

}  // namespace detail

inline void validate(const NoiseModel& nm) {
    detail::require_finite_positive(nm.sigma0, "noise_model.sigma0");
    detail::require_finite_positive(nm.d0, "noise_model.d0");
    detail::require_finite_positive(nm.lambda_max, "noise_model.lambda_max");
    if (!(std::isfinite(nm.alpha_meas) && nm.alpha_meas >= 0.0))
        throw DomainError("noise_model.alpha_meas must be finite and >= 0");
}

inline void validate(const TierParams& tp) {
    detail::require_finite_positive(tp.tx_power, "tier.tx_power");
    detail::require_finite_positive(tp.carrier_freq, "tier.carrier_freq");
    detail::require_finite_positive(tp.bandwidth, "tier.bandwidth");
    if (!(std::isfinite(tp.pathloss_exp) && tp.pathloss_exp >= 2.0))
        throw DomainError("tier.pathloss_exp must be >= 2");
    if (!(std::isfinite(tp.shadowing_std) && tp.shadowing_std >= 0.0))
        throw DomainError("tier.shadowing_std must be >= 0");
    validate(tp.noise_model);
}

/// Throws DomainError describing the first broken invariant.
inline void validate(const Topology& topo) {
    if (topo.candidate_sites.empty()) throw DomainError("topology needs at least one candidate site");
    if (topo.test_points.empty()) throw DomainError("topology needs at least one test point");
    if (topo.budget < 1 || topo.budget > topo.num_sites())
        throw DomainError("budget G=" + std::to_string(topo.budget) + " must satisfy 1 <= G <= S=" +
                          std::to_string(topo.num_sites()));
    detail::require_finite_positive(topo.constants.noise_psd, "constants.noise_psd");
    if (topo.area) {
        detail::require_finite_positive(topo.area->width, "area.width");
        detail::require_finite_positive(topo.area->height, "area.height");
    }
    validate(topo.lte);
    validate(topo.nr);
    detail::validate_positions(topo.enbs, topo.area, "enbs");
    detail::validate_positions(topo.candidate_sites, topo.area, "candidate_sites");
    detail::validate_positions(topo.test_points, topo.area, "test_points");
}

}  // namespace loko
