#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "loko/rng.hpp"
#include "loko/types.hpp"

namespace loko {

enum class ScenarioKind { Highway, Suburban, DenseUrban };

inline std::string to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::Highway: return "H";
        case ScenarioKind::Suburban: return "SU";
        case ScenarioKind::DenseUrban: return "DU";
    }
    return "?";
}

inline ScenarioKind parse_kind(const std::string& s) {
    if (s == "H" || s == "highway") return ScenarioKind::Highway;
    if (s == "SU" || s == "suburban") return ScenarioKind::Suburban;
    if (s == "DU" || s == "dense-urban") return ScenarioKind::DenseUrban;
    throw ParseError("unknown scenario kind '" + s + "' (expected H, SU or DU)", "kind");
}

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::DenseUrban;
    Area area{1500.0, 1500.0};
    double enb_density = 4.5;   // per km^2
    double cs_density = 9.0;    // per km^2
    double test_grid_spacing = 150.0;  // m
    Index budget = 8;
    std::uint64_t seed = 0;
    /// When set, lambda_max of each tier becomes kappa * shadowing_std.
    std::optional<double> lambda_kappa;
    std::optional<TierParams> lte_override;
    std::optional<TierParams> nr_override;
};

/// Tier parameters of the synthetic scenarios. Both tiers share the
/// propagation factor, which also serves as the ranging-variance exponent.
inline TierParams default_lte(ScenarioKind kind) {
    const double alpha[] = {2.5, 3.0, 3.5};
    const double shadow[] = {3.0, 5.0, 6.0};
    const auto i = static_cast<int>(kind);
    return TierParams{30.0, 1.8e9, 20e6, alpha[i], shadow[i], NoiseModel{1e-3, 1.0, alpha[i], 10.0}};
}

inline TierParams default_nr(ScenarioKind kind) {
    const double alpha[] = {2.5, 3.0, 3.5};
    const double shadow[] = {5.0, 7.0, 9.0};
    const auto i = static_cast<int>(kind);
    return TierParams{20.0, 3.5e9, 100e6, alpha[i], shadow[i], NoiseModel{1e-4, 1.0, alpha[i], 1.0}};
}

/// Desk-scale defaults. Densities are estimates: DU gives about 20 candidate
/// sites and 10 eNBs over 1.5 km x 1.5 km.
inline ScenarioSpec default_spec(ScenarioKind kind, std::uint64_t seed = 0) {
    ScenarioSpec s;
    s.kind = kind;
    s.seed = seed;
    switch (kind) {
        case ScenarioKind::Highway:
            s.area = {5000.0, 500.0};
            s.enb_density = 2.8;
            s.cs_density = 6.0;
            s.test_grid_spacing = 250.0;
            s.budget = 5;
            break;
        case ScenarioKind::Suburban:
            s.area = {3000.0, 3000.0};
            s.enb_density = 1.0;
            s.cs_density = 2.0;
            s.test_grid_spacing = 300.0;
            s.budget = 6;
            break;
        case ScenarioKind::DenseUrban:
            s.area = {1500.0, 1500.0};
            s.enb_density = 4.5;
            s.cs_density = 9.0;
            s.test_grid_spacing = 150.0;
            s.budget = 8;
            break;
    }
    return s;
}

/// Dense-urban parameters on a patch small enough for exhaustive search:
/// 6 candidate sites, 3 eNBs, 8 test points, budget 3.
inline ScenarioSpec oracle_scale_spec(std::uint64_t seed = 0) {
    ScenarioSpec s = default_spec(ScenarioKind::DenseUrban, seed);
    s.area = {600.0, 300.0};
    s.test_grid_spacing = 150.0;
    s.cs_density = 6.0 / 0.18;
    s.enb_density = 3.0 / 0.18;
    s.budget = 3;
    return s;
}

/// Cell centres of a regular lattice, clipped to the area; ceil(W/sp) * ceil(H/sp) points.
inline std::vector<Position> grid_test_points(const Area& area, double spacing) {
    if (!(spacing > 0.0)) throw DomainError("grid spacing must be > 0");
    const auto nx = static_cast<Index>(std::ceil(area.width / spacing - 1e-9));
    const auto ny = static_cast<Index>(std::ceil(area.height / spacing - 1e-9));
    std::vector<Position> pts;
    pts.reserve(static_cast<std::size_t>(nx * ny));
    for (Index iy = 0; iy < ny; ++iy)
        for (Index ix = 0; ix < nx; ++ix)
            pts.push_back({std::min((static_cast<double>(ix) + 0.5) * spacing, area.width),
                           std::min((static_cast<double>(iy) + 0.5) * spacing, area.height)});
    return pts;
}

inline Topology generate(const ScenarioSpec& spec) {
    if (!(spec.enb_density > 0.0) || !(spec.cs_density > 0.0)) throw DomainError("densities must be > 0");
    if (!(spec.area.width > 0.0) || !(spec.area.height > 0.0)) throw DomainError("area must be positive");
    const double km2 = spec.area.width * spec.area.height * 1e-6;
    const auto n_enb = static_cast<Index>(std::llround(spec.enb_density * km2));
    const auto n_cs = static_cast<Index>(std::llround(spec.cs_density * km2));
    if (n_cs < 1) throw DomainError("candidate-site density yields no sites for this area");

    auto rng = make_stream(spec.seed, "scenario");
    std::uniform_real_distribution<double> ux(0.0, spec.area.width);
    std::uniform_real_distribution<double> uy(0.0, spec.area.height);
    const double jitter = std::min(50.0, 0.5 * spec.area.height);
    std::uniform_real_distribution<double> uj(-jitter, jitter);
    auto draw = [&](Index count) {
        std::vector<Position> out;
        for (Index i = 0; i < count; ++i) {
            const double x = ux(rng);
            // Highway sites hug the road axis.
            const double y = spec.kind == ScenarioKind::Highway ? 0.5 * spec.area.height + uj(rng) : uy(rng);
            out.push_back({x, y});
        }
        return out;
    };

    Topology topo;
    topo.area = spec.area;
    topo.enbs = draw(n_enb);
    topo.candidate_sites = draw(n_cs);
    topo.test_points = grid_test_points(spec.area, spec.test_grid_spacing);
    if (topo.test_points.empty()) throw DomainError("test grid is empty");
    topo.lte = spec.lte_override.value_or(default_lte(spec.kind));
    topo.nr = spec.nr_override.value_or(default_nr(spec.kind));
    if (spec.lambda_kappa) {
        topo.lte.noise_model.lambda_max = *spec.lambda_kappa * topo.lte.shadowing_std;
        topo.nr.noise_model.lambda_max = *spec.lambda_kappa * topo.nr.shadowing_std;
    }
    topo.budget = std::min<Index>(spec.budget, topo.num_sites());
    validate(topo);
    return topo;
}

// -- file format -----------------------------------------------------------------

inline constexpr const char* kTopologySchema = "loko-topology";
inline constexpr int kTopologyVersion = 1;

namespace detail {

inline nlohmann::ordered_json to_json(const NoiseModel& nm) {
    return {{"sigma0_m", nm.sigma0}, {"d0_m", nm.d0}, {"alpha_meas", nm.alpha_meas}, {"lambda_max_m", nm.lambda_max}};
}

inline nlohmann::ordered_json to_json(const TierParams& t) {
    return {{"tx_power_w", t.tx_power},       {"carrier_freq_hz", t.carrier_freq},
            {"bandwidth_hz", t.bandwidth},    {"pathloss_exp", t.pathloss_exp},
            {"shadowing_std_db", t.shadowing_std}, {"noise_model", to_json(t.noise_model)}};
}

inline nlohmann::ordered_json to_json(const std::vector<Position>& ps) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : ps) arr.push_back({{"x_m", p.x}, {"y_m", p.y}});
    return arr;
}

/// Reads a numeric field, reporting the dotted path on failure.
inline double number_at(const nlohmann::json& j, const char* key, const std::string& path) {
    const std::string field = path.empty() ? key : path + "." + key;
    if (!j.is_object() || !j.contains(key)) throw ParseError("missing field '" + field + "'", field);
    const auto& v = j.at(key);
    if (!v.is_number()) throw ParseError("field '" + field + "' must be a number", field);
    return v.get<double>();
}

inline const nlohmann::json& object_at(const nlohmann::json& j, const char* key, const std::string& path) {
    const std::string field = path.empty() ? key : path + "." + key;
    if (!j.is_object() || !j.contains(key)) throw ParseError("missing field '" + field + "'", field);
    const auto& v = j.at(key);
    if (!v.is_object()) throw ParseError("field '" + field + "' must be an object", field);
    return v;
}

inline NoiseModel noise_from_json(const nlohmann::json& j, const std::string& path) {
    return {number_at(j, "sigma0_m", path), number_at(j, "d0_m", path), number_at(j, "alpha_meas", path),
            number_at(j, "lambda_max_m", path)};
}

inline TierParams tier_from_json(const nlohmann::json& j, const std::string& path) {
    TierParams t;
    t.tx_power = number_at(j, "tx_power_w", path);
    t.carrier_freq = number_at(j, "carrier_freq_hz", path);
    t.bandwidth = number_at(j, "bandwidth_hz", path);
    t.pathloss_exp = number_at(j, "pathloss_exp", path);
    t.shadowing_std = number_at(j, "shadowing_std_db", path);
    t.noise_model = noise_from_json(object_at(j, "noise_model", path), path + ".noise_model");
    return t;
}

inline std::vector<Position> positions_from_json(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", key);
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw ParseError(std::string("field '") + key + "' must be an array", key);
    std::vector<Position> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string path = std::string(key) + "[" + std::to_string(i) + "]";
        out.push_back({number_at(arr[i], "x_m", path), number_at(arr[i], "y_m", path)});
    }
    return out;
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace detail

inline nlohmann::ordered_json topology_to_json(const Topology& topo) {
    nlohmann::ordered_json j;
    j["schema"] = kTopologySchema;
    j["version"] = kTopologyVersion;
    j["budget"] = topo.budget;
    if (topo.area) j["area"] = {{"width_m", topo.area->width}, {"height_m", topo.area->height}};
    j["constants"] = {{"light_speed_mps", RadioConstants::light_speed}, {"noise_psd_w_per_hz", topo.constants.noise_psd}};
    j["lte"] = detail::to_json(topo.lte);
    j["nr"] = detail::to_json(topo.nr);
    j["enbs"] = detail::to_json(topo.enbs);
    j["candidate_sites"] = detail::to_json(topo.candidate_sites);
    j["test_points"] = detail::to_json(topo.test_points);
    return j;
}

/// Parses and validates; schema problems raise ParseError naming the field,
/// invariant violations (e.g. G > S) raise DomainError.
inline Topology topology_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("topology document must be a JSON object");
    if (!j.contains("schema") || j["schema"] != kTopologySchema)
        throw ParseError("field 'schema' must be \"loko-topology\"", "schema");
    if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != kTopologyVersion)
        throw ParseError("unsupported topology version", "version");
    Topology topo;
    if (!j.contains("budget") || !j["budget"].is_number_integer()) throw ParseError("field 'budget' must be an integer", "budget");
    topo.budget = j["budget"].get<Index>();
    if (j.contains("area")) {
        const auto& a = detail::object_at(j, "area", "");
        topo.area = Area{detail::number_at(a, "width_m", "area"), detail::number_at(a, "height_m", "area")};
    }
    if (j.contains("constants")) {
        const auto& c = detail::object_at(j, "constants", "");
        if (c.contains("noise_psd_w_per_hz")) topo.constants.noise_psd = detail::number_at(c, "noise_psd_w_per_hz", "constants");
        if (c.contains("light_speed_mps") &&
            detail::number_at(c, "light_speed_mps", "constants") != RadioConstants::light_speed)
            throw ParseError("constants.light_speed_mps must be 299792458", "constants.light_speed_mps");
    }
    topo.lte = detail::tier_from_json(detail::object_at(j, "lte", ""), "lte");
    topo.nr = detail::tier_from_json(detail::object_at(j, "nr", ""), "nr");
    topo.enbs = detail::positions_from_json(j, "enbs");
    topo.candidate_sites = detail::positions_from_json(j, "candidate_sites");
    topo.test_points = detail::positions_from_json(j, "test_points");
    validate(topo);
    return topo;
}

inline Topology parse_topology(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), "", detail::line_of(text, e.byte));
    }
    return topology_from_json(j);
}

inline Topology load_topology(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open topology file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_topology(buf.str());
}

inline std::string dump_topology(const Topology& topo) {
    // 17 significant digits keep the round trip exact.
    return topology_to_json(topo).dump(2) + "\n";
}

inline void save_topology(const Topology& topo, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write topology file '" + path + "'");
    out << dump_topology(topo);
}

}  // namespace loko
