#include <gtest/gtest.h>

#include <random>
#include <set>

#include "chatter/chattering.hpp"
#include "chatter/problems.hpp"
#include "toy_problems.hpp"

using namespace chatter;
using toy::vec;

namespace {

ChatteringMeasure<double> measure_of(std::initializer_list<double> w) { return {vec(w), 0}; }

LevelGrid<double> row_grid(std::initializer_list<double> c) {
    LevelGrid<double> g;
    g.levels = vec(c).transpose();
    return g;
}

ControlProblem<double> separable_box(int m) {
    ControlProblem<double> p;
    p.state_dim = m;
    p.control_dim = m;
    p.initial_state = Vector<double>::Zero(m);
    p.running_cost = [](double, const Vector<double>&, const Vector<double>& u) { return u.squaredNorm(); };
    p.dynamics = [](double, const Vector<double>&, const Vector<double>& u) { return Vector<double>(u); };
    p.control_lower = Vector<double>::Constant(m, -10.0);
    p.control_upper = Vector<double>::Constant(m, 10.0);
    p.state_lower = Vector<double>::Constant(m, -1.0);
    p.state_upper = Vector<double>::Constant(m, 1.0);
    return p;
}

}  // namespace

TEST(Levels, UniformGridWithoutStateBounds) {
    const auto p = toy::integrator(-1, 1);
    const auto g = generate_levels(p, vec({0}), 0.1, GridParams{5, 4096});
    ASSERT_EQ(g.size(), 5);
    const double expected[] = {-1, -0.5, 0, 0.5, 1};
    for (int k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(g.levels(0, k), expected[k]);
}

TEST(Levels, UpperStateBoundForcesZero) {
    auto p = toy::integrator(0, 10);
    p.state_upper = vec({1.0});
    const auto g = generate_levels(p, vec({1.0}), 0.25, GridParams{});
    ASSERT_EQ(g.size(), 1);
    EXPECT_EQ(g.levels(0, 0), 0.0);
}

TEST(Levels, SupplierOrderKeepsRestLevelAndMinQuantity) {
    const auto sc = problems::build_supply_chain(
        problems::synthetic_demand(problems::DemandProfile::Seasonal, 10.0, 1.0), 1.0, 200);
    const auto g = generate_levels(sc, sc.initial_state, 1.0 / 200, GridParams{});
    const int row = problems::order_index(0);
    std::set<double> seen;
    for (int k = 0; k < g.size(); ++k) {
        const double c = g.levels(row, k);
        EXPECT_TRUE(c == 0.0 || (c >= 7.0 && c <= 14.0)) << c;
        seen.insert(c);
    }
    EXPECT_TRUE(seen.count(0.0));
    EXPECT_TRUE(seen.count(7.0));
    EXPECT_TRUE(seen.count(14.0));
}

TEST(Levels, CapLowersPointsPerDimension) {
    const auto p = separable_box(2);
    auto free = p;
    free.state_lower.reset();
    free.state_upper.reset();
    const auto g = generate_levels(free, Vector<double>(Vector<double>::Zero(2)), 0.1, GridParams{101, 4096});
    EXPECT_EQ(g.size(), 64 * 64);
}

TEST(Levels, KroneckerSubsetUnderCapPressure) {
    const auto sc = problems::build_supply_chain(
        problems::synthetic_demand(problems::DemandProfile::Seasonal, 10.0, 1.0), 1.0, 200);
    const auto g = generate_levels(sc, sc.initial_state, 1.0 / 200, GridParams{101, 512});
    EXPECT_LE(g.size(), 512);
    EXPECT_GT(g.size(), 256);
    // all-lower corner is the first sequence point
    EXPECT_TRUE(g.levels.col(0).isApprox(sc.control_lower) || g.levels.col(0).isZero());
    for (int k = 1; k < g.size(); ++k) {
        const auto a = g.levels.col(k - 1), b = g.levels.col(k);
        EXPECT_TRUE(std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()));
    }
    const auto again = generate_levels(sc, sc.initial_state, 1.0 / 200, GridParams{101, 512});
    EXPECT_EQ(again.levels, g.levels);
}

TEST(BoundSearch, NoStateBoundsGivesControlBounds) {
    const auto p = toy::integrator(-3, 4);
    const auto [lo, hi] = level_bound_search(p, vec({100}), 1.0, 0);
    EXPECT_EQ(lo, -3.0);
    EXPECT_EQ(hi, 4.0);
}

TEST(BoundSearch, SymmetricStateBox) {
    auto p = toy::integrator(-10, 10);
    p.state_lower = vec({-1});
    p.state_upper = vec({1});
    const auto [lo, hi] = level_bound_search(p, vec({0}), 0.5, 0);
    EXPECT_NEAR(lo, -2.0, 1e-6);
    EXPECT_NEAR(hi, 2.0, 1e-6);
}

TEST(BoundSearch, AtUpperBound) {
    auto p = toy::integrator(0, 10);
    p.state_upper = vec({1});
    const auto [lo, hi] = level_bound_search(p, vec({1}), 1.0, 0);
    EXPECT_EQ(lo, 0.0);
    EXPECT_EQ(hi, 0.0);
}

TEST(BoundSearch, InfeasibleEverywhereThrows) {
    auto p = toy::integrator(5, 10);
    p.state_upper = vec({1});
    EXPECT_THROW(level_bound_search(p, vec({1}), 1.0, 0), InfeasibleLevels);
    EXPECT_THROW(generate_levels(p, vec({1}), 1.0, GridParams{}), InfeasibleLevels);
}

TEST(MeasureLp, UniqueMinimum) {
    EXPECT_EQ(solve_measure_lp(vec({5, 2, 9})).weights, vec({0, 1, 0}));
}

TEST(MeasureLp, TieSplitsUniformly) {
    EXPECT_EQ(solve_measure_lp(vec({3, 3, 7})).weights, vec({0.5, 0.5, 0}));
}

TEST(MeasureLp, SingleLevel) {
    EXPECT_EQ(solve_measure_lp(vec({4.2})).weights, vec({1}));
}

TEST(MeasureLp, EmptyAndNonFinite) {
    EXPECT_THROW(solve_measure_lp(Vector<double>(0)), EmptyGrid);
    EXPECT_THROW(solve_measure_lp(vec({1, std::numeric_limits<double>::infinity()})), NonFiniteEvaluation);
}

TEST(ControlFromMeasure, Examples) {
    EXPECT_EQ(control_from_measure(row_grid({-1, 0, 1}), measure_of({0, 1, 0}))[0], 0.0);
    EXPECT_EQ(control_from_measure(row_grid({2, 4, 6}), measure_of({0.5, 0.5, 0}))[0], 3.0);
    EXPECT_EQ(control_from_measure(row_grid({-7.25}), measure_of({1}))[0], -7.25);
}

TEST(Signal, PointMass) {
    const auto s = realize_signal(row_grid({0, 1}), measure_of({1, 0}), 0.0, 1.0);
    ASSERT_EQ(s.segments.size(), 1u);
    EXPECT_EQ(s.segments[0].level_index, 0);
    EXPECT_EQ(s.segments[0].start, 0.0);
    EXPECT_EQ(s.segments[0].end, 1.0);
}

TEST(Signal, DutyCycle) {
    const auto s = realize_signal(row_grid({0, 1}), measure_of({0.25, 0.75}), 0.0, 4.0);
    ASSERT_EQ(s.segments.size(), 2u);
    EXPECT_EQ(s.segments[0].start, 0.0);
    EXPECT_EQ(s.segments[0].end, 1.0);
    EXPECT_EQ(s.segments[0].level_index, 0);
    EXPECT_EQ(s.segments[1].start, 1.0);
    EXPECT_EQ(s.segments[1].end, 4.0);
    EXPECT_EQ(s.segments[1].level_index, 1);
}

TEST(Signal, ThirdsGiveUnitSegments) {
    const double third = 1.0 / 3.0;
    const auto s = realize_signal(row_grid({0, 1, 2}), measure_of({third, third, third}), 0.0, 3.0);
    ASSERT_EQ(s.segments.size(), 3u);
    for (int k = 0; k < 3; ++k) {
        EXPECT_NEAR(s.segments[k].end - s.segments[k].start, 1.0, 1e-15);
        EXPECT_EQ(s.segments[k].level_index, k);
    }
    EXPECT_EQ(s.end(), 3.0);
}

// properties

class ChatteringProperties : public ::testing::Test {
protected:
    std::mt19937_64 rng{21};

    Vector<double> random_simplex(int K) {
        std::exponential_distribution<double> e(1.0);
        std::bernoulli_distribution zero(0.3);
        Vector<double> w(K);
        for (auto& v : w) v = zero(rng) ? 0.0 : e(rng);
        if (w.sum() == 0.0) w[0] = 1.0;
        return w / w.sum();
    }
};

TEST_F(ChatteringProperties, LpMatchesVertexEnumeration) {
    std::uniform_int_distribution<int> size(1, 8), small(-2, 2);
    std::uniform_real_distribution<double> real(-100, 100);
    for (int n = 0; n < 2000; ++n) {
        const int K = size(rng);
        Vector<double> h(K);
        for (auto& v : h) v = n % 3 == 0 ? small(rng) : real(rng);
        const auto m = solve_measure_lp(h);
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) best = std::min(best, h[k]);
        ASSERT_EQ(measure_objective(h, m), best);
        ASSERT_NEAR(m.weights.sum(), 1.0, 1e-12);
        ASSERT_TRUE((m.weights.array() >= 0).all() && (m.weights.array() <= 1).all());
    }
}

TEST_F(ChatteringProperties, SignalAverageAndOccupation) {
    std::uniform_int_distribution<int> size(1, 8), dims(1, 3);
    std::uniform_real_distribution<double> real(-5, 5), span(1e-3, 10);
    for (int n = 0; n < 1000; ++n) {
        const int K = size(rng), m = dims(rng);
        LevelGrid<double> g;
        g.levels.resize(m, K);
        for (int k = 0; k < K; ++k)
            for (int d = 0; d < m; ++d) g.levels(d, k) = real(rng);
        const ChatteringMeasure<double> mu{random_simplex(K), 0};
        const double t0 = real(rng), dt = span(rng);
        const auto s = realize_signal(g, mu, t0, dt);

        Vector<double> avg = Vector<double>::Zero(m);
        for (const auto& seg : s.segments) avg += seg.duration * g.levels.col(seg.level_index);
        avg /= dt;
        const auto u = control_from_measure(g, mu);
        for (int d = 0; d < m; ++d) ASSERT_NEAR(avg[d], u[d], 1e-12 * (1 + std::abs(u[d])));
        for (int k = 0; k < K; ++k) ASSERT_NEAR(s.occupation(k), mu.weights[k] * dt, 1e-12 * dt);
        ASSERT_EQ(s.start(), t0);
        ASSERT_EQ(s.end(), t0 + dt);
    }
}

TEST_F(ChatteringProperties, HamiltonianSumEqualsFrozenIntegral) {
    const auto lqr = problems::build_lqr();
    std::uniform_int_distribution<int> size(1, 8);
    std::uniform_real_distribution<double> real(-10, 10), span(1e-3, 1);
    for (int n = 0; n < 500; ++n) {
        const int K = size(rng);
        LevelGrid<double> g;
        g.levels.resize(1, K);
        for (int k = 0; k < K; ++k) g.levels(0, k) = real(rng);
        const ChatteringMeasure<double> mu{random_simplex(K), 0};
        const HamiltonianContext<double> ctx{0.0, vec({real(rng)}), vec({real(rng)})};
        const double dt = span(rng);

        double weighted = 0.0;
        for (int k = 0; k < K; ++k) weighted += eval_hamiltonian(lqr, ctx, vec({g.levels(0, k)})) * mu.weights[k] * dt;
        double integral = 0.0;
        for (const auto& seg : realize_signal(g, mu, 0.0, dt).segments)
            integral += eval_hamiltonian(lqr, ctx, vec({g.levels(0, seg.level_index)})) * seg.duration;
        ASSERT_NEAR(weighted, integral, 1e-12 * (1 + std::abs(weighted)));
    }
}

TEST_F(ChatteringProperties, LevelsRespectControlAndStateBounds) {
    const auto p = separable_box(2);
    std::uniform_real_distribution<double> pos(-1, 1), step(1e-3, 1);
    for (int n = 0; n < 300; ++n) {
        const Vector<double> x = vec({pos(rng), pos(rng)});
        const double dt = step(rng);
        const auto g = generate_levels(p, x, dt, GridParams{11, 4096});
        for (int k = 0; k < g.size(); ++k) {
            const Vector<double> c = g.levels.col(k);
            ASSERT_TRUE((c.array() >= p.control_lower.array()).all());
            ASSERT_TRUE((c.array() <= p.control_upper.array()).all());
            const Vector<double> next = x + dt * p.dynamics(0, x, c);
            ASSERT_TRUE((next.array() >= -1.0 - 1e-9).all() && (next.array() <= 1.0 + 1e-9).all());
        }
    }
}
