#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "loko/baselines.hpp"
#include "loko/io.hpp"
#include "loko/kpi.hpp"
#include "loko/scenarios.hpp"

namespace loko::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInfeasible = 2 };

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Sibling path with a different suffix: "out/plan.json" + ".csv" -> "out/plan.csv".
inline std::string sibling(const std::string& path, const std::string& suffix) {
    std::filesystem::path p(path);
    if (p.has_extension()) p.replace_extension();
    return p.string() + suffix;
}

struct Manifest {
    std::string command;
    nlohmann::ordered_json config;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    nlohmann::ordered_json flags = nlohmann::ordered_json::object();
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void write(const std::string& path) const {
        nlohmann::ordered_json j;
        j["command"] = command;
        j["config_hash"] = hex(fnv1a(config.dump()));
        j["config"] = config;
        j["seed"] = seed;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["convergence"] = flags;
        j["wall_clock_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_text(path, j.dump(2) + "\n");
    }
};

/// Effective settings: built-in defaults, then the --config file, then flags.
struct Settings {
    PlanConfig plan;
    std::optional<Index> budget;
    std::uint64_t seed = 0;
    nlohmann::json scenario = nlohmann::json::object();
};

inline Settings load_settings(const std::string& config_path) {
    Settings s;
    if (config_path.empty()) return s;
    nlohmann::json j;
    const std::string text = read_text(config_path);
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed config: ") + e.what(), "", detail::line_of(text, e.byte));
    }
    for (const auto& [k, v] : j.items()) {
        if (k == "plan") apply_json(v, s.plan);
        else if (k == "solver") apply_json(v, s.plan.solver);
        else if (k == "seed") s.seed = v.get<std::uint64_t>();
        else if (k == "budget") s.budget = v.get<Index>();
        else if (k == "scenario") s.scenario = v;
        else throw ParseError("unknown config section '" + k + "'", k);
    }
    s.plan.solver.seed = s.seed;
    return s;
}

inline Topology with_budget(Topology topo, std::optional<Index> budget) {
    if (budget) {
        topo.budget = *budget;
        validate(topo);
    }
    return topo;
}

inline ScenarioSpec scenario_from(const std::string& kind, std::uint64_t seed, bool small, const nlohmann::json& over) {
    ScenarioSpec spec = small ? oracle_scale_spec(seed) : default_spec(parse_kind(kind), seed);
    if (small) spec.kind = parse_kind(kind);
    for (const auto& [k, v] : over.items()) {
        if (k == "area_m") spec.area = {v.at(0).get<double>(), v.at(1).get<double>()};
        else if (k == "enb_density_per_km2") spec.enb_density = v.get<double>();
        else if (k == "cs_density_per_km2") spec.cs_density = v.get<double>();
        else if (k == "test_grid_spacing_m") spec.test_grid_spacing = v.get<double>();
        else if (k == "lambda_kappa") spec.lambda_kappa = v.get<double>();
        else throw ParseError("unknown scenario setting '" + k + "'", "scenario." + k);
    }
    return spec;
}

// -- commands --------------------------------------------------------------------

struct GenerateArgs {
    std::string kind = "DU";
    std::uint64_t seed = 0;
    std::string out;
    std::optional<Index> budget;
    bool small = false;
    std::string config;
};

inline int cmd_generate(const GenerateArgs& a) {
    Manifest m;
    m.command = "generate";
    Settings s = load_settings(a.config);
    const auto spec = scenario_from(a.kind, a.seed, a.small, s.scenario);
    Topology topo = with_budget(generate(spec), a.budget ? a.budget : s.budget);
    save_topology(topo, a.out);
    m.seed = a.seed;
    m.config = {{"kind", a.kind}, {"small", a.small}, {"budget", topo.budget}, {"scenario", s.scenario}};
    if (!a.config.empty()) m.inputs.push_back(a.config);
    m.outputs = {a.out};
    m.write(a.out + ".manifest.json");
    return kOk;
}

struct PlanArgs {
    std::string scenario;
    std::optional<double> tpr;
    std::optional<Index> budget;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string trace;
    std::string config;
};

inline int cmd_plan(const PlanArgs& a) {
    Manifest m;
    m.command = "plan";
    Settings s = load_settings(a.config);
    if (a.tpr) s.plan.mu = *a.tpr;
    if (a.seed) s.plan.solver.seed = *a.seed;
    const Topology topo = with_budget(load_topology(a.scenario), a.budget ? a.budget : s.budget);
    const auto geom = precompute_geometry(topo);
    const PlanResult p = plan(topo, geom, s.plan);

    write_text(a.out, plan_to_json(topo, p).dump(2) + "\n");
    std::ostringstream csv;
    write_assignment_csv(csv, topo, p.serving, p.eval);
    const std::string csv_path = sibling(a.out, ".csv");
    write_text(csv_path, csv.str());
    m.outputs = {a.out, csv_path};
    if (!a.trace.empty()) {
        std::ostringstream tr;
        for (const auto& [tag, rt] : p.routine_traces) write_trace_jsonl(tr, rt, tag);
        write_text(a.trace, tr.str());
        m.outputs.push_back(a.trace);
    }
    m.seed = s.plan.solver.seed;
    m.config = {{"plan", to_json(s.plan)}, {"budget", topo.budget}};
    m.inputs = {a.scenario};
    if (!a.config.empty()) m.inputs.push_back(a.config);
    m.flags = {{"converged", p.converged}, {"stop_reason", p.stop_reason}};
    m.write(sibling(a.out, ".manifest.json"));
    return kOk;
}

struct PebMapArgs {
    std::string scenario;
    std::string deployment;
    double grid_spacing = 50.0;
    std::string out;
};

inline int cmd_peb_map(const PebMapArgs& a) {
    Manifest m;
    m.command = "peb-map";
    const Topology topo = load_topology(a.scenario);
    const std::string dep_text = read_text(a.deployment);
    nlohmann::json dep;
    try {
        dep = nlohmann::json::parse(dep_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed deployment: ") + e.what(), "", detail::line_of(dep_text, e.byte));
    }
    const Eigen::VectorXd x = deployment_from_json(dep, topo.num_sites());

    Area area;
    if (topo.area) {
        area = *topo.area;
    } else {
        for (const auto* list : {&topo.enbs, &topo.candidate_sites, &topo.test_points})
            for (const auto& p : *list) {
                area.width = std::max(area.width, p.x);
                area.height = std::max(area.height, p.y);
            }
    }
    const auto cells = grid_test_points(area, a.grid_spacing);
    std::ostringstream csv;
    csv << "x_m,y_m,peb_nr_m,peb_lte_m,peb_best_m\n";
    auto tier_peb = [](const std::vector<Position>& sites, const TierParams& tier, Position p) {
        std::vector<Anchor> anchors;
        for (const auto& s : sites) {
            const auto& nm = tier.noise_model;
            anchors.push_back({s, nu_weight(link_distance(p, s), nm.lambda_max, nm)});
        }
        try {
            return peb(anchors, p);
        } catch (const UnboundedPebError&) {
            return kInf;
        }
    };
    std::vector<Position> deployed;
    for (Index j = 0; j < x.size(); ++j)
        if (x(j) > 0.5) deployed.push_back(topo.candidate_sites[static_cast<std::size_t>(j)]);
    for (const auto& p : cells) {
        const double nr = tier_peb(deployed, topo.nr, p);
        const double lte = tier_peb(topo.enbs, topo.lte, p);
        csv << fixed(p.x, 3) << ',' << fixed(p.y, 3) << ',' << fixed(nr) << ',' << fixed(lte) << ','
            << fixed(std::min(nr, lte)) << '\n';
    }
    write_text(a.out, csv.str());
    m.config = {{"grid_spacing_m", a.grid_spacing}};
    m.inputs = {a.scenario, a.deployment};
    m.outputs = {a.out};
    m.write(a.out + ".manifest.json");
    return kOk;
}

struct CompareArgs {
    std::string scenario;
    std::string planners = "loko,bse,sdr-toa,oracle";
    std::optional<double> tpr;
    std::string budget_range;  // "a..b", empty: the topology budget
    int seeds = 1;
    double max_evals = 1e7;
    std::string out;
    std::string config;
};

inline std::pair<Index, Index> parse_range(const std::string& r) {
    const auto dots = r.find("..");
    try {
        if (dots == std::string::npos) {
            const Index v = std::stol(r);
            return {v, v};
        }
        return {std::stol(r.substr(0, dots)), std::stol(r.substr(dots + 2))};
    } catch (const std::exception&) {
        throw ParseError("budget range must look like 'a..b'", "budget-range");
    }
}

inline int cmd_compare(const CompareArgs& a) {
    Manifest m;
    m.command = "compare";
    Settings s = load_settings(a.config);
    if (a.tpr) s.plan.mu = *a.tpr;
    const Topology base = load_topology(a.scenario);
    auto [lo, hi] = a.budget_range.empty() ? std::pair<Index, Index>{base.budget, base.budget} : parse_range(a.budget_range);
    if (lo < 1 || hi < lo || hi > base.num_sites()) throw DomainError("budget range must lie within [1, S]");
    std::vector<std::string> names;
    {
        std::stringstream ss(a.planners);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) names.push_back(item);
    }
    for (const auto& n : names)
        if (n != "loko" && n != "bse" && n != "sdr-toa" && n != "oracle" && n != "random")
            throw ParseError("unknown planner '" + n + "'", "planners");
    if (a.seeds < 1) throw DomainError("--seeds must be >= 1");

    const auto geom = precompute_geometry(base);
    std::ostringstream csv;
    csv << "planner,budget,seed,min_rate_mbps,max_peb_m,avg_peb_m,joint_value\n";
    bool all_converged = true;
    for (Index G = lo; G <= hi; ++G) {
        const Topology topo = with_budget(base, G);
        std::optional<BaselineResult> oracle;
        for (int seed = 0; seed < a.seeds; ++seed) {
            PlanConfig pc = s.plan;
            pc.solver.seed = stream_seed(s.seed, "compare/" + std::to_string(seed));
            for (const auto& n : names) {
                BaselineResult r;
                if (n == "loko") {
                    const auto p = plan(topo, geom, pc);
                    all_converged = all_converged && p.converged;
                    r.name = "loko";
                    r.x = p.x;
                    r.serving = p.serving;
                    r.eval = p.eval;
                    r.joint = p.joint;
                } else if (n == "bse") {
                    r = modified_bse(geom, G, pc.mu);
                } else if (n == "sdr-toa") {
                    r = modified_sdr_toa(topo, geom, G, pc.solver, pc.mu);
                } else if (n == "oracle") {
                    if (!oracle) {
                        OracleOptions oo;
                        oo.max_evaluations = a.max_evals;
                        oracle = exhaustive_oracle(geom, G, pc.mu, oo);
                    }
                    r = *oracle;
                } else {
                    r = random_placement(geom, G, pc.mu, pc.solver.seed);
                }
                csv << n << ',' << G << ',' << seed << ',' << fixed(r.eval.min_rate * 1e-6) << ','
                    << fixed(std::sqrt(r.eval.max_peb_sq)) << ',' << fixed(r.eval.avg_peb) << ',' << fixed(r.joint)
                    << '\n';
            }
        }
    }
    write_text(a.out, csv.str());
    m.seed = s.seed;
    m.config = {{"plan", to_json(s.plan)},
                {"planners", a.planners},
                {"budget_range", {lo, hi}},
                {"seeds", a.seeds},
                {"max_evals", a.max_evals}};
    m.inputs = {a.scenario};
    if (!a.config.empty()) m.inputs.push_back(a.config);
    m.outputs = {a.out};
    m.flags = {{"loko_all_converged", all_converged}};
    m.write(sibling(a.out, ".manifest.json"));
    return kOk;
}

struct OracleArgs {
    std::string scenario;
    double tpr = 0.0;
    std::optional<Index> budget;
    double max_evals = 1e7;
    std::string out;
};

inline int cmd_oracle(const OracleArgs& a) {
    Manifest m;
    m.command = "oracle";
    const Topology topo = with_budget(load_topology(a.scenario), a.budget);
    const auto geom = precompute_geometry(topo);
    OracleOptions oo;
    oo.max_evaluations = a.max_evals;
    const auto r = exhaustive_oracle(geom, topo.budget, a.tpr, oo);
    write_text(a.out, baseline_to_json(topo, r).dump(2) + "\n");
    m.config = {{"mu", a.tpr}, {"budget", topo.budget}, {"max_evals", a.max_evals}};
    m.inputs = {a.scenario};
    m.outputs = {a.out};
    m.write(sibling(a.out, ".manifest.json"));
    return kOk;
}

// -- entry point -----------------------------------------------------------------

/// Infeasibility maps to 2, everything else (usage, parse, IO) to 1.
inline int exit_code_for(std::exception_ptr ep, std::ostream& err) {
    try {
        std::rethrow_exception(ep);
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << "\n";
        return kInfeasible;
    } catch (const ParseError& e) {
        err << "error: " << e.what();
        if (!e.field().empty()) err << " (field " << e.field() << ")";
        if (e.line()) err << " (line " << e.line() << ")";
        err << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    } catch (...) {
        err << "error: unknown failure\n";
    }
    return kUsage;
}

inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
    CLI::App app{"Joint throughput and positioning planner for 5G base stations"};
    app.require_subcommand(1);

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "write a synthetic topology");
    gen->add_option("--kind", ga.kind, "H | SU | DU")->capture_default_str();
    gen->add_option("--seed", ga.seed)->capture_default_str();
    gen->add_option("--out", ga.out, "topology JSON path")->required();
    gen->add_option("--budget", ga.budget, "override G");
    gen->add_flag("--small", ga.small, "6-site patch small enough for the oracle");
    gen->add_option("--config", ga.config);

    PlanArgs pa;
    auto* pl = app.add_subcommand("plan", "run LOKO on a topology");
    pl->add_option("--scenario", pa.scenario)->required();
    pl->add_option("--tpr", pa.tpr, "mu, Mbit/s per m^2");
    pl->add_option("--budget", pa.budget);
    pl->add_option("--seed", pa.seed);
    pl->add_option("--out", pa.out, "plan JSON path; CSV and manifest are written beside it")->required();
    pl->add_option("--trace", pa.trace, "line-delimited JSON routine trace");
    pl->add_option("--config", pa.config);

    PebMapArgs ma;
    auto* pm = app.add_subcommand("peb-map", "PEB per grid cell for a deployment");
    pm->add_option("--scenario", ma.scenario)->required();
    pm->add_option("--deployment", ma.deployment, "plan JSON with selected_sites")->required();
    pm->add_option("--grid-spacing", ma.grid_spacing)->capture_default_str();
    pm->add_option("--out", ma.out)->required();

    CompareArgs ca;
    auto* cp = app.add_subcommand("compare", "planner sweep to long-format CSV");
    cp->add_option("--scenario", ca.scenario)->required();
    cp->add_option("--planners", ca.planners)->capture_default_str();
    cp->add_option("--tpr", ca.tpr);
    cp->add_option("--budget-range", ca.budget_range, "a..b");
    cp->add_option("--seeds", ca.seeds)->capture_default_str();
    cp->add_option("--max-evals", ca.max_evals)->capture_default_str();
    cp->add_option("--out", ca.out)->required();
    cp->add_option("--config", ca.config);

    OracleArgs oa;
    auto* orc = app.add_subcommand("oracle", "exhaustive search on a small topology");
    orc->add_option("--scenario", oa.scenario)->required();
    orc->add_option("--tpr", oa.tpr)->capture_default_str();
    orc->add_option("--budget", oa.budget);
    orc->add_option("--max-evals", oa.max_evals)->capture_default_str();
    orc->add_option("--out", oa.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            std::cout << app.help();
            return kOk;
        }
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
    try {
        if (*gen) return cmd_generate(ga);
        if (*pl) return cmd_plan(pa);
        if (*pm) return cmd_peb_map(ma);
        if (*cp) return cmd_compare(ca);
        if (*orc) return cmd_oracle(oa);
    } catch (...) {
        return exit_code_for(std::current_exception(), err);
    }
    return kUsage;
}

}  // namespace loko::cli
