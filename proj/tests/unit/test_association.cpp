#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "loko/association.hpp"
#include "loko/scenarios.hpp"

using namespace loko;

namespace {

Geometry small_geometry(std::uint64_t seed) { return precompute_geometry(generate(oracle_scale_spec(seed))); }

Eigen::VectorXd deploy(Index S, std::initializer_list<Index> on) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(S);
    for (Index j : on) x(j) = 1.0;
    return x;
}

/// Every serving vector built from LTE and the deployed sites.
template <class F>
void for_each_serving(const Geometry& g, const Eigen::VectorXd& x, F&& f) {
    std::vector<Index> opts{kLte};
    for (Index j : active_sites(x)) opts.push_back(j);
    const auto T = static_cast<std::size_t>(g.num_test_points);
    std::vector<std::size_t> digit(T, 0);
    Serving s(T);
    for (;;) {
        for (std::size_t t = 0; t < T; ++t) s[t] = opts[digit[t]];
        f(s);
        std::size_t t = 0;
        while (t < T && ++digit[t] == opts.size()) digit[t++] = 0;
        if (t == T) return;
    }
}

}  // namespace

TEST(Association, NothingDeployedMeansLte) {
    const auto g = small_geometry(1);
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(g.num_sites);
    for (auto mode : {AssocMode::throughput, AssocMode::positioning, AssocMode::joint}) {
        const auto s = association_step(g, x, mode, {});
        for (Index j : s) EXPECT_EQ(j, kLte);
    }
    for (Index j : hybrid_max_sinr(g, x)) EXPECT_EQ(j, kLte);
}

TEST(Association, PickRules) {
    EXPECT_EQ(detail::pick(true, 1.0, true, 1.0, 4), 4);  // tie goes to the gNB
    EXPECT_EQ(detail::pick(true, 2.0, true, 1.0, 4), kLte);
    EXPECT_EQ(detail::pick(false, 2.0, true, 1.0, 4), 4);
    EXPECT_EQ(detail::pick(true, 0.0, false, 9.0, 4), kLte);
    EXPECT_LT(detail::pick(false, 0.0, false, 0.0, 4), kLte);
}

TEST(Association, RowRules) {
    RowOptions o;
    o.lte_rate = 5e6;
    o.lte_peb_sq = 100.0;
    o.best_site = 2;
    o.best_rate = 1e6;
    o.nr_peb_sq = 4.0;
    EXPECT_EQ(associate_row(o, AssocMode::throughput, {}), kLte);  // weak gNB loses on rate
    AssocThresholds tight;
    tight.peb_sq = 10.0;
    EXPECT_EQ(associate_row(o, AssocMode::throughput, tight), 2);
    EXPECT_EQ(associate_row(o, AssocMode::positioning, {}), 2);
    AssocThresholds fast;
    fast.rate_bps = 2e6;
    EXPECT_EQ(associate_row(o, AssocMode::positioning, fast), kLte);
    fast.rate_bps = 6e6;
    EXPECT_LT(associate_row(o, AssocMode::positioning, fast), kLte);
    AssocThresholds joint;
    EXPECT_EQ(associate_row(o, AssocMode::joint, joint), kLte);
    joint.mu = 1.0;  // 5 - 100 vs 1 - 4
    EXPECT_EQ(associate_row(o, AssocMode::joint, joint), 2);
    // Equal PEB: more rate wins.
    o.nr_peb_sq = 100.0;
    EXPECT_EQ(associate_row(o, AssocMode::positioning, {}), kLte);
    o.best_rate = 5e6;
    EXPECT_EQ(associate_row(o, AssocMode::positioning, {}), 2);
}

TEST(Association, InfeasibleRowNamed) {
    const auto g = small_geometry(2);
    AssocThresholds th;
    th.peb_sq = 0.0;
    try {
        association_step(g, deploy(g.num_sites, {0}), AssocMode::throughput, th);
        FAIL() << "expected RowInfeasibleError";
    } catch (const RowInfeasibleError& e) {
        EXPECT_EQ(e.row(), 0);
    }
}

class AssociationBrute : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(AssociationBrute, MatchesEnumeration) {
    const auto g = small_geometry(GetParam());
    const Index S = g.num_sites;
    std::mt19937_64 rng(GetParam());
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<Index> ids(static_cast<std::size_t>(S));
        std::iota(ids.begin(), ids.end(), Index{0});
        std::shuffle(ids.begin(), ids.end(), rng);
        Eigen::VectorXd x = Eigen::VectorXd::Zero(S);
        for (int k = 0; k < 3; ++k) x(ids[static_cast<std::size_t>(k)]) = 1.0;

        // A threshold that binds on some rows but not all.
        const auto full = evaluate(g, x, best_association_given_x(g, x, 1.0));
        const auto active = active_sites(x);
        AssocThresholds th;
        th.peb_sq = 0.0;
        for (Index t = 0; t < g.num_test_points; ++t) {
            const auto o = row_options(g, x, active, t);
            th.peb_sq = std::max(th.peb_sq, std::min(o.lte_peb_sq, o.nr_peb_sq));
        }
        th.rate_bps = 0.5 * full.min_rate;
        th.mu = 0.01;

        double best_rate = -kInf, best_peb = kInf, best_joint = -kInf;
        for_each_serving(g, x, [&](const Serving& s) {
            const auto ev = evaluate(g, x, s);
            if (ev.max_peb_sq <= th.peb_sq) best_rate = std::max(best_rate, ev.min_rate);
            if (ev.min_rate >= th.rate_bps) best_peb = std::min(best_peb, ev.max_peb_sq);
            double j = kInf;
            for (Index t = 0; t < g.num_test_points; ++t) j = std::min(j, joint_term(ev.rate(t), ev.peb_sq(t), th.mu));
            best_joint = std::max(best_joint, j);
        });

        const auto st = evaluate(g, x, association_step(g, x, AssocMode::throughput, th));
        EXPECT_EQ(st.min_rate, best_rate);
        EXPECT_LE(st.max_peb_sq, th.peb_sq);
        const auto sp = evaluate(g, x, association_step(g, x, AssocMode::positioning, th));
        EXPECT_EQ(sp.max_peb_sq, best_peb);
        EXPECT_GE(sp.min_rate, th.rate_bps);
        const auto sj = association_step(g, x, AssocMode::joint, th);
        const auto ej = evaluate(g, x, sj);
        double j = kInf;
        for (Index t = 0; t < g.num_test_points; ++t) j = std::min(j, joint_term(ej.rate(t), ej.peb_sq(t), th.mu));
        EXPECT_EQ(j, best_joint);
    }
}

INSTANTIATE_TEST_SUITE_P(Seeds, AssociationBrute, ::testing::Values(0u, 1u, 2u, 3u, 4u));

TEST(Association, LargeTprPrefersGnb) {
    const auto g = small_geometry(3);
    const auto x = deploy(g.num_sites, {0, 1, 2});
    const auto s = best_association_given_x(g, x, 1e6);
    const auto active = active_sites(x);
    for (Index t = 0; t < g.num_test_points; ++t) {
        const auto o = row_options(g, x, active, t);
        if (o.nr_peb_sq < o.lte_peb_sq) EXPECT_NE(s[static_cast<std::size_t>(t)], kLte) << t;
    }
}

TEST(Association, HybridPicksHighestSinr) {
    const auto g = small_geometry(4);
    const auto x = deploy(g.num_sites, {1, 3, 5});
    const auto s = hybrid_max_sinr(g, x);
    for (Index t = 0; t < g.num_test_points; ++t) {
        const double got = served_sinr(g, x, t, s[static_cast<std::size_t>(t)]);
        EXPECT_GE(got, g.lte_sinr(t));
        for (Index j : active_sites(x)) EXPECT_GE(got, served_sinr(g, x, t, j));
    }
}
