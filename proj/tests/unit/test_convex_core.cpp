#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "loko/convex_core.hpp"

using namespace loko;

TEST(OptimalY, AlgebraicCases) {
    EXPECT_DOUBLE_EQ(optimal_y(3, 0, 1), 2.0);
    EXPECT_DOUBLE_EQ(quadratic_transform(2.0, 3, 0, 1), 4.0);
    const double y0 = optimal_y(0, 2, 2);
    EXPECT_DOUBLE_EQ(y0, 0.5);
    EXPECT_NEAR(quadratic_transform(y0, 0, 2, 2), 1.0, 1e-15);
    EXPECT_THROW(optimal_y(1, 0, 0), DomainError);
}

TEST(OptimalY, SubstitutionIdentityOnRandomTriples) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> e(-18, 4);
    for (int k = 0; k < 10000; ++k) {
        const double g = std::pow(10.0, e(rng));
        const double gi = std::pow(10.0, e(rng));
        const double n = std::pow(10.0, e(rng));
        const double y = optimal_y(g, gi, n);
        EXPECT_NEAR(quadratic_transform(y, g, gi, n), 1.0 + g / (gi + n), 1e-12 * (1.0 + g / (gi + n)));
        // y* is the maximiser: nearby y never does better.
        EXPECT_LE(quadratic_transform(y * 1.001, g, gi, n), quadratic_transform(y, g, gi, n) * (1 + 1e-15));
    }
}

TEST(Bisection, StepOracleCountsExactly) {
    int calls = 0;
    auto oracle = [&](double eta) -> std::optional<double> {
        ++calls;
        return eta >= 0.3 ? std::optional<double>(eta) : std::nullopt;
    };
    const auto r = bisection<double>(0.0, 1.0, std::ldexp(1.0, -10), oracle, 1.0);
    EXPECT_EQ(r.iterations, 10);
    EXPECT_EQ(calls, 10);
    EXPECT_GE(r.eta, 0.3);
    EXPECT_LE(r.eta, 0.3 + std::ldexp(1.0, -10));
    EXPECT_LE(r.hi - r.lo, std::ldexp(1.0, -10));
}

TEST(Bisection, AlwaysFeasibleEndsNearLow) {
    auto oracle = [](double eta) { return std::optional<double>(eta); };
    const auto r = bisection<double>(2.0, 3.0, 1.0 / 256.0, oracle);
    EXPECT_EQ(r.iterations, 8);
    EXPECT_LE(r.eta - 2.0, 1.0 / 256.0);
}

TEST(Bisection, NeverFeasibleThrows) {
    auto oracle = [](double) { return std::optional<double>(); };
    EXPECT_THROW(bisection<double>(0.0, 1.0, 0.01, oracle), InfeasibleError);
}

TEST(StableFactorize, IdentityZeroAndWishart) {
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
    double jitter = 0;
    const auto L = stable_factorize(I, &jitter);
    EXPECT_TRUE((L * L.transpose()).isApprox(I + jitter * I, 1e-14));
    EXPECT_NEAR((L - I).norm(), 0.0, 1e-11);

    const auto L0 = stable_factorize(Eigen::MatrixXd::Zero(3, 3), &jitter);
    EXPECT_NEAR((L0 - std::sqrt(jitter) * Eigen::MatrixXd::Identity(3, 3)).norm(), 0.0, 1e-20);

    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd B(6, 3);
        for (Index i = 0; i < B.size(); ++i) B.data()[i] = n01(rng);
        const Eigen::MatrixXd X = B * B.transpose();  // rank 3
        const auto Lw = stable_factorize(X, &jitter);
        EXPECT_LE((Lw * Lw.transpose() - X).norm(), 10.0 * jitter * 6 + 1e-12);
    }
    Eigen::MatrixXd neg = I;
    neg(0, 0) = -1e-3;
    EXPECT_THROW(stable_factorize(neg), DomainError);
}

TEST(TopG, TiesPreferLowerIndex) {
    Eigen::VectorXd v(5);
    v << 0.2, 0.9, 0.5, 0.5, 0.1;
    Eigen::VectorXd x = top_g(v, 3);
    Eigen::VectorXd expect(5);
    expect << 0, 1, 1, 1, 0;
    EXPECT_EQ(x, expect);
    EXPECT_EQ(top_g(v, 2), (Eigen::VectorXd(5) << 0, 1, 1, 0, 0).finished());
}

TEST(GaussianRandomize, RankOneBinaryIsReturned) {
    Eigen::VectorXd x(5);
    x << 1, 0, 1, 1, 0;
    const Eigen::MatrixXd X = x * x.transpose();
    auto r = gaussian_randomize(x, X, 3, [](const Eigen::VectorXd&) { return true; },
                                [](const Eigen::VectorXd&) { return 0.0; }, 50, 1);
    EXPECT_EQ(r.x, x);
    EXPECT_FALSE(r.sampled);
}

TEST(GaussianRandomize, TinyCovarianceGivesTopG) {
    Eigen::VectorXd xb(5);
    xb << 0.9, 0.1, 0.7, 0.8, 0.2;
    const Eigen::MatrixXd X = 1e-12 * Eigen::MatrixXd::Identity(5, 5) + xb * xb.transpose();
    auto r = gaussian_randomize(xb, X, 3, [](const Eigen::VectorXd&) { return true; },
                                [](const Eigen::VectorXd& x) { return -x(1); }, 100, 2);
    EXPECT_EQ(r.x, top_g(xb, 3));
}

TEST(GaussianRandomize, NeverWorseThanPlainRounding) {
    // S = 6, G = 3: the score and predicate come from a toy PEB-like form;
    // enumeration over all 20 subsets is the oracle.
    std::mt19937_64 rng(123);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01(0, 1);
    for (int trial = 0; trial < 30; ++trial) {
        Eigen::MatrixXd B(6, 6);
        for (Index i = 0; i < B.size(); ++i) B.data()[i] = 0.3 * n01(rng);
        Eigen::VectorXd xb(6);
        for (Index i = 0; i < 6; ++i) xb(i) = u01(rng);
        const Eigen::MatrixXd X = B * B.transpose() + xb * xb.transpose();
        Eigen::VectorXd w(6);
        for (Index i = 0; i < 6; ++i) w(i) = n01(rng);
        const double cap = 1.0 + u01(rng);
        auto feasible = [&](const Eigen::VectorXd& x) { return x.dot(w.cwiseAbs()) <= 3.0 * cap; };
        auto score = [&](const Eigen::VectorXd& x) { return x.dot(w); };
        double best = -kInf;
        for (int mask = 0; mask < 64; ++mask) {
            if (__builtin_popcount(mask) != 3) continue;
            Eigen::VectorXd x(6);
            for (int i = 0; i < 6; ++i) x(i) = (mask >> i) & 1;
            if (feasible(x)) best = std::max(best, score(x));
        }
        const Eigen::VectorXd plain = top_g(xb, 3);
        try {
            auto r = gaussian_randomize(xb, X, 3, feasible, score, 200, 77 + trial);
            EXPECT_EQ(r.x.sum(), 3.0);
            EXPECT_TRUE(feasible(r.x));
            EXPECT_LE(r.score, best + 1e-12);
            if (feasible(plain)) EXPECT_GE(r.score, score(plain));
        } catch (const RandomizationFailure&) {
            EXPECT_FALSE(feasible(plain));
        }
    }
}

TEST(GaussianRandomize, DeterministicPerSeed) {
    Eigen::VectorXd xb = Eigen::VectorXd::Constant(8, 0.5);
    const Eigen::MatrixXd X = 0.25 * Eigen::MatrixXd::Identity(8, 8) + xb * xb.transpose();
    auto score = [](const Eigen::VectorXd& x) { return x(0) + 2 * x(5) - x(3); };
    auto f = [](const Eigen::VectorXd& x) { return x(5) < 0.5; };
    auto a = gaussian_randomize(xb, X, 4, f, score, 60, 5);
    auto b = gaussian_randomize(xb, X, 4, f, score, 60, 5);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.feasible_samples, b.feasible_samples);
}

TEST(GaussianRandomize, AllInfeasibleThrows) {
    Eigen::VectorXd xb = Eigen::VectorXd::Constant(4, 0.5);
    const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(4, 4);
    EXPECT_THROW(gaussian_randomize(xb, X, 2, [](const Eigen::VectorXd&) { return false; },
                                    [](const Eigen::VectorXd&) { return 0.0; }, 20, 1),
                 RandomizationFailure);
}

namespace {

/// Three sites around two test points; enough structure for the grid oracles.
struct SmallInstance {
    Eigen::MatrixXd gain;  // T x S
    double noise = 1.0;
    std::vector<Index> serving{0, 2};
};

ObjectiveRow objective_row(const SmallInstance& s, Index t, const Eigen::VectorXd& dbar) {
    ObjectiveRow r;
    const Index j = s.serving[t];
    r.a = s.gain.row(t).transpose();
    r.a(j) = 0;
    r.g = s.gain(t, j);
    r.noise = s.noise;
    r.y = optimal_y(r.g, r.a.dot(dbar), r.noise);
    return r;
}

}  // namespace

TEST(MaximinSdr, SingletonSite) {
    SdrSpec spec;
    spec.num_sites = 1;
    spec.budget = 1;
    spec.objective_rows.push_back({Eigen::VectorXd::Zero(1), 3.0, 1.0, 2.0});
    const auto out = solve_maximin_sdr(spec);
    EXPECT_NEAR(out.state.X(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(out.objective, 3.0, 1e-12);  // 1 + g/N' - 1
}

TEST(MaximinSdr, FullBudgetForcesAllOnes) {
    SdrSpec spec;
    spec.num_sites = 2;
    spec.budget = 2;
    Eigen::VectorXd a(2);
    a << 0.0, 1.0;
    spec.objective_rows.push_back({a, 1.0, 0.5, 1.0});
    const auto out = solve_maximin_sdr(spec);
    EXPECT_TRUE(out.state.X.isApprox(Eigen::MatrixXd::Ones(2, 2)));
}

TEST(MaximinSdr, BeatsDiagonalGridOnThreeSites) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.05, 2.0);
    for (int trial = 0; trial < 5; ++trial) {
        SmallInstance inst;
        inst.gain.resize(2, 3);
        for (Index i = 0; i < inst.gain.size(); ++i) inst.gain.data()[i] = u(rng);
        const Eigen::VectorXd dbar = Eigen::VectorXd::Constant(3, 2.0 / 3.0);
        SdrSpec spec;
        spec.num_sites = 3;
        spec.budget = 2;
        for (Index t = 0; t < 2; ++t) spec.objective_rows.push_back(objective_row(inst, t, dbar));
        const auto out = solve_maximin_sdr(spec);
        ASSERT_TRUE(out.feasible);

        // Grid over diag X on the trace slice; the diagonal matrix is always a PSD completion.
        double grid = -kInf;
        const int n = 200;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j) {
                Eigen::VectorXd d(3);
                d << double(i) / n, double(j) / n, 2.0 - double(i) / n - double(j) / n;
                if (d(2) < 0 || d(2) > 1) continue;
                double v = kInf;
                for (const auto& r : spec.objective_rows)
                    v = std::min(v, quadratic_transform(r.y, r.g, r.a.dot(d), r.noise) - 1.0);
                grid = std::max(grid, v);
            }
        EXPECT_GE(out.objective, grid - 1e-3 * std::max(1.0, std::abs(grid))) << trial;
        EXPECT_LE(out.objective, grid + 2e-2 * std::max(1.0, std::abs(grid))) << trial;
        EXPECT_NEAR(out.state.X.trace(), 2.0, 1e-6);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.state.X);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-8);
        EXPECT_LE(out.state.x_bar.maxCoeff(), 1.0 + 1e-6);
    }
}

namespace {

/// Lifted PEB rows of three sites around one point.
SdrSpec peb_spec(double eta, Index budget = 2) {
    SdrSpec spec;
    spec.num_sites = 3;
    spec.budget = budget;
    PebRow row;
    row.nu = Eigen::Vector3d(1.0, 2.0, 0.5);
    const double th[3] = {0.0, 2.0, 4.0};
    row.F = Eigen::MatrixXd::Zero(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) row.F(i, j) = row.nu(i) * row.nu(j) * std::pow(std::sin(th[j] - th[i]), 2);
    row.rhs = eta;
    spec.peb_rows.push_back(row);
    return spec;
}

bool binary_feasible(const SdrSpec& spec) {
    const auto& row = spec.peb_rows[0];
    for (int mask = 0; mask < 8; ++mask) {
        if (__builtin_popcount(mask) != spec.budget) continue;
        Eigen::Vector3d x;
        for (int i = 0; i < 3; ++i) x(i) = (mask >> i) & 1;
        if (row.nu.dot(x) <= row.rhs * x.dot(row.F.transpose() * x) + 1e-12) return true;
    }
    return false;
}

}  // namespace

TEST(FeasibilitySdr, HugeThresholdIsFeasible) {
    auto st = solve_feasibility_sdr(peb_spec(1e6));
    ASSERT_TRUE(st.has_value());
    EXPECT_NEAR(st->X.trace(), 2.0, 1e-6);
}

TEST(FeasibilitySdr, ZeroThresholdIsInfeasible) { EXPECT_FALSE(solve_feasibility_sdr(peb_spec(0.0)).has_value()); }

TEST(FeasibilitySdr, AgreesWithBinaryEnumeration) {
    for (double eta = 0.05; eta < 20.0; eta *= 1.3) {
        const auto spec = peb_spec(eta);
        const bool sdr = solve_feasibility_sdr(spec).has_value();
        // The relaxation contains every binary point.
        if (binary_feasible(spec)) EXPECT_TRUE(sdr) << eta;
        if (!sdr) EXPECT_FALSE(binary_feasible(spec)) << eta;
    }
}

TEST(FeasibilitySdr, ReturnedStateMeetsRows) {
    const auto spec = peb_spec(3.0);
    auto st = solve_feasibility_sdr(spec);
    ASSERT_TRUE(st.has_value());
    const auto& row = spec.peb_rows[0];
    const double lhs = row.nu.dot(st->x_bar);
    const double rhs = row.rhs * (row.F.transpose() * st->X).trace();
    EXPECT_LE(lhs - rhs, 1e-6 * lhs);
}
