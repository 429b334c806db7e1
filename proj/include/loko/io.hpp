#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "loko/baselines.hpp"
#include "loko/kpi.hpp"
#include "loko/scenarios.hpp"

namespace loko {

inline constexpr const char* kPlanSchema = "loko-plan";
inline constexpr const char* kGeometrySchema = "loko-geometry";
inline constexpr int kResultVersion = 1;

/// Fixed-decimal text for CSV cells; "inf" for unbounded values.
inline std::string fixed(double v, int digits = 6) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

namespace detail {

inline nlohmann::ordered_json finite_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json();
}

inline double number_or_inf(const nlohmann::json& j) { return j.is_null() ? kInf : j.get<double>(); }

inline nlohmann::ordered_json per_test_point(const Topology& topo, const Serving& serving, const Evaluation& ev) {
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t < serving.size(); ++t) {
        nlohmann::ordered_json r;
        r["index"] = t;
        r["x_m"] = topo.test_points[t].x;
        r["y_m"] = topo.test_points[t].y;
        r["tier"] = serving[t] == kLte ? "lte" : "nr";
        r["site"] = serving[t] == kLte ? nlohmann::ordered_json() : nlohmann::ordered_json(serving[t]);
        r["rate_mbps"] = ev.rate(static_cast<Index>(t)) * 1e-6;
        r["peb_m"] = finite_or_null(std::sqrt(ev.peb_sq(static_cast<Index>(t))));
        arr.push_back(std::move(r));
    }
    return arr;
}

inline nlohmann::ordered_json summary(const Evaluation& ev, double joint) {
    nlohmann::ordered_json s;
    s["min_rate_mbps"] = ev.min_rate * 1e-6;
    s["max_peb_m"] = finite_or_null(std::sqrt(ev.max_peb_sq));
    s["avg_peb_m"] = finite_or_null(ev.avg_peb);
    s["joint_value"] = finite_or_null(joint);
    return s;
}

inline nlohmann::ordered_json selected(const Eigen::VectorXd& x) {
    auto arr = nlohmann::ordered_json::array();
    for (Index j = 0; j < x.size(); ++j)
        if (x(j) > 0.5) arr.push_back(j);
    return arr;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const SolverConfig& c) {
    nlohmann::ordered_json j;
    j["eps_bisect"] = c.eps_bisect;
    j["n_rand"] = c.n_rand;
    j["delta"] = c.delta;
    j["tol_inner"] = c.tol_inner;
    j["max_inner"] = c.max_inner;
    j["max_outer"] = c.max_outer;
    j["assoc_floor"] = c.assoc_floor;
    j["seed"] = c.seed;
    return j;
}

inline nlohmann::ordered_json to_json(const PlanConfig& c) {
    nlohmann::ordered_json j;
    j["mu"] = c.mu;
    j["eps_outer"] = c.eps();
    j["max_tau"] = c.max_tau;
    j["solver"] = to_json(c.solver);
    return j;
}

/// Applies the keys present in `j` on top of `c`; unknown keys are errors.
inline void apply_json(const nlohmann::json& j, SolverConfig& c) {
    for (const auto& [k, v] : j.items()) {
        if (k == "eps_bisect") c.eps_bisect = v.get<double>();
        else if (k == "n_rand") c.n_rand = v.get<int>();
        else if (k == "delta") c.delta = v.get<double>();
        else if (k == "tol_inner") c.tol_inner = v.get<double>();
        else if (k == "max_inner") c.max_inner = v.get<int>();
        else if (k == "max_outer") c.max_outer = v.get<int>();
        else if (k == "assoc_floor") c.assoc_floor = v.get<double>();
        else if (k == "seed") c.seed = v.get<std::uint64_t>();
        else throw ParseError("unknown solver setting '" + k + "'", "solver." + k);
    }
}

inline void apply_json(const nlohmann::json& j, PlanConfig& c) {
    for (const auto& [k, v] : j.items()) {
        if (k == "mu") c.mu = v.get<double>();
        else if (k == "eps_outer") c.eps_outer = v.get<double>();
        else if (k == "max_tau") c.max_tau = v.get<int>();
        else if (k == "solver") apply_json(v, c.solver);
        else throw ParseError("unknown plan setting '" + k + "'", "plan." + k);
    }
}

inline nlohmann::ordered_json to_json(const TauRecord& r) {
    nlohmann::ordered_json j;
    j["tau"] = r.tau;
    j["zeta_b_m2"] = detail::finite_or_null(r.zeta_b_sq);
    j["zeta_r_mbps"] = r.zeta_r;
    j["r_mbps"] = r.r;
    j["b_m2"] = detail::finite_or_null(r.b);
    j["r_star_mbps"] = r.r_star;
    j["b_star_m2"] = detail::finite_or_null(r.b_star);
    j["ratio"] = detail::finite_or_null(r.ratio);
    j["throughput_feasible"] = r.throughput_feasible;
    j["positioning_feasible"] = r.positioning_feasible;
    j["throughput_outer"] = r.throughput_outer;
    j["positioning_outer"] = r.positioning_outer;
    j["best_joint"] = detail::finite_or_null(r.best_joint);
    return j;
}

inline nlohmann::ordered_json plan_to_json(const Topology& topo, const PlanResult& p) {
    nlohmann::ordered_json j;
    j["schema"] = kPlanSchema;
    j["version"] = kResultVersion;
    j["planner"] = "loko";
    j["budget"] = p.budget;
    j["config"] = to_json(p.config);
    j["converged"] = p.converged;
    j["stop_reason"] = p.stop_reason;
    j["selected_sites"] = detail::selected(p.x);
    j["summary"] = detail::summary(p.eval, p.joint);
    j["test_points"] = detail::per_test_point(topo, p.serving, p.eval);
    auto tr = nlohmann::ordered_json::array();
    for (const auto& r : p.trace) tr.push_back(to_json(r));
    j["trace"] = std::move(tr);
    return j;
}

inline nlohmann::ordered_json baseline_to_json(const Topology& topo, const BaselineResult& b) {
    nlohmann::ordered_json j;
    j["schema"] = kPlanSchema;
    j["version"] = kResultVersion;
    j["planner"] = b.name;
    j["budget"] = topo.budget;
    j["config"] = nlohmann::ordered_json{{"mu", b.mu}};
    j["selected_sites"] = detail::selected(b.x);
    j["summary"] = detail::summary(b.eval, b.joint);
    j["test_points"] = detail::per_test_point(topo, b.serving, b.eval);
    return j;
}

/// Deployment read back from a plan file: the binary site vector.
inline Eigen::VectorXd deployment_from_json(const nlohmann::json& j, Index num_sites) {
    if (!j.contains("selected_sites") || !j["selected_sites"].is_array())
        throw ParseError("deployment file lacks 'selected_sites'", "selected_sites");
    Eigen::VectorXd x = Eigen::VectorXd::Zero(num_sites);
    for (const auto& v : j["selected_sites"]) {
        const auto s = v.get<Index>();
        if (s < 0 || s >= num_sites) throw ParseError("selected site out of range", "selected_sites");
        x(s) = 1.0;
    }
    return x;
}

inline void write_assignment_csv(std::ostream& os, const Topology& topo, const Serving& serving, const Evaluation& ev) {
    os << "index,x_m,y_m,tier,site,rate_mbps,peb_m\n";
    for (std::size_t t = 0; t < serving.size(); ++t) {
        const auto i = static_cast<Index>(t);
        os << t << ',' << fixed(topo.test_points[t].x, 3) << ',' << fixed(topo.test_points[t].y, 3) << ','
           << (serving[t] == kLte ? "lte" : "nr") << ',' << (serving[t] == kLte ? std::string() : std::to_string(serving[t]))
           << ',' << fixed(ev.rate(i) * 1e-6) << ',' << fixed(std::sqrt(ev.peb_sq(i))) << '\n';
    }
}

// -- geometry cache ----------------------------------------------------------------

inline nlohmann::ordered_json geometry_to_json(const Geometry& g) {
    auto matrix = [](const Eigen::MatrixXd& m) {
        auto rows = nlohmann::ordered_json::array();
        for (Index r = 0; r < m.rows(); ++r) {
            auto row = nlohmann::ordered_json::array();
            for (Index c = 0; c < m.cols(); ++c) row.push_back(detail::finite_or_null(m(r, c)));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    auto vec = [](const Eigen::VectorXd& v) {
        auto a = nlohmann::ordered_json::array();
        for (Index i = 0; i < v.size(); ++i) a.push_back(detail::finite_or_null(v(i)));
        return a;
    };
    nlohmann::ordered_json j;
    j["schema"] = kGeometrySchema;
    j["version"] = kResultVersion;
    j["num_sites"] = g.num_sites;
    j["num_test_points"] = g.num_test_points;
    j["nr_noise"] = g.nr_noise;
    j["nr_bandwidth_hz"] = g.nr_bandwidth;
    j["lte_bandwidth_hz"] = g.lte_bandwidth;
    j["lte_available"] = g.lte_available;
    j["distance_m"] = matrix(g.distance);
    j["theta_rad"] = matrix(g.theta);
    j["gain"] = matrix(g.gain);
    j["nu_per_m2"] = matrix(g.nu);
    j["lte_peb_m"] = vec(g.lte_peb);
    j["lte_rate_bps"] = vec(g.lte_rate);
    j["lte_sinr"] = vec(g.lte_sinr);
    auto F = nlohmann::ordered_json::array();
    for (const auto& f : g.F) F.push_back(matrix(f));
    j["F"] = std::move(F);
    return j;
}

inline Geometry geometry_from_json(const nlohmann::json& j) {
    if (j.value("schema", std::string()) != kGeometrySchema) throw ParseError("not a geometry cache", "schema");
    if (j.value("version", 0) != kResultVersion) throw ParseError("unsupported geometry cache version", "version");
    Geometry g;
    g.num_sites = j.at("num_sites").get<Index>();
    g.num_test_points = j.at("num_test_points").get<Index>();
    const Index S = g.num_sites;
    const Index T = g.num_test_points;
    auto matrix = [](const nlohmann::json& a, Index r, Index c, const char* field) {
        if (!a.is_array() || static_cast<Index>(a.size()) != r) throw ParseError("bad matrix shape", field);
        Eigen::MatrixXd m(r, c);
        for (Index i = 0; i < r; ++i) {
            const auto& row = a[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Index>(row.size()) != c) throw ParseError("bad matrix shape", field);
            for (Index k = 0; k < c; ++k) m(i, k) = detail::number_or_inf(row[static_cast<std::size_t>(k)]);
        }
        return m;
    };
    auto vec = [](const nlohmann::json& a, Index n, const char* field) {
        if (!a.is_array() || static_cast<Index>(a.size()) != n) throw ParseError("bad vector length", field);
        Eigen::VectorXd v(n);
        for (Index i = 0; i < n; ++i) v(i) = detail::number_or_inf(a[static_cast<std::size_t>(i)]);
        return v;
    };
    g.nr_noise = j.at("nr_noise").get<double>();
    g.nr_bandwidth = j.at("nr_bandwidth_hz").get<double>();
    g.lte_bandwidth = j.at("lte_bandwidth_hz").get<double>();
    g.lte_available = j.at("lte_available").get<bool>();
    g.distance = matrix(j.at("distance_m"), T, S, "distance_m");
    g.theta = matrix(j.at("theta_rad"), T, S, "theta_rad");
    g.gain = matrix(j.at("gain"), T, S, "gain");
    g.nu = matrix(j.at("nu_per_m2"), T, S, "nu_per_m2");
    g.lte_peb = vec(j.at("lte_peb_m"), T, "lte_peb_m");
    g.lte_rate = vec(j.at("lte_rate_bps"), T, "lte_rate_bps");
    g.lte_sinr = vec(j.at("lte_sinr"), T, "lte_sinr");
    const auto& F = j.at("F");
    if (!F.is_array() || static_cast<Index>(F.size()) != T) throw ParseError("bad F list", "F");
    for (Index t = 0; t < T; ++t) g.F.push_back(matrix(F[static_cast<std::size_t>(t)], S, S, "F"));
    return g;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw Error("write to '" + path + "' failed");
}

inline std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace loko
