#include <gtest/gtest.h>

#include <cmath>

#include "chatter/problems.hpp"
#include "chatter/shooting.hpp"
#include "toy_problems.hpp"

using namespace chatter;
using toy::vec;

namespace {

// exp(A) for the 2x2 state/costate flow by scaling and squaring of a Taylor series
Eigen::Matrix2d expm(const Eigen::Matrix2d& a) {
    const int squarings = 10;
    const Eigen::Matrix2d s = a / std::pow(2.0, squarings);
    Eigen::Matrix2d term = Eigen::Matrix2d::Identity(), sum = Eigen::Matrix2d::Identity();
    for (int k = 1; k < 30; ++k) {
        term = term * s / k;
        sum += term;
    }
    for (int k = 0; k < squarings; ++k) sum = sum * sum;
    return sum;
}

SensitivityEstimate<double> scalar_sens(double px, double pp) {
    return {Matrix<double>::Constant(1, 1, px), Matrix<double>::Constant(1, 1, pp)};
}

}  // namespace

TEST(Sensitivities, FrozenProblemGivesIdentity) {
    const auto p = toy::frozen(3);
    const auto s = finite_diff_sensitivities(p, TimePartition<double>::uniform(1.0, 5), vec({1, -2, 0.5}), 1e-3,
                                             PropagationOptions<double>{});
    EXPECT_TRUE(s.P_x.isZero(0));
    EXPECT_TRUE(s.P_p.isApprox(Matrix<double>::Identity(3, 3), 1e-12));
}

TEST(Sensitivities, StateBlindToCostate) {
    auto p = toy::frozen(2);
    p.initial_state = vec({1, 2});
    p.dynamics = [](double, const Vector<double>& x, const Vector<double>&) { return Vector<double>(-x); };
    const auto s = finite_diff_sensitivities(p, TimePartition<double>::uniform(1.0, 10), vec({0.3, 0.1}), 1e-2,
                                             PropagationOptions<double>{});
    EXPECT_TRUE(s.P_x.isZero(0));
}

TEST(Sensitivities, LqrCostateSensitivityMatchesLinearFlow) {
    const auto lqr = problems::build_lqr();
    Eigen::Matrix2d a;
    a << 1.0, -0.5, -2.0, -1.0;
    const double analytic = expm(a)(1, 1);
    PropagationOptions<double> opt;
    opt.grid.levels_per_dim = 1001;
    const auto s = finite_diff_sensitivities(lqr, TimePartition<double>::uniform(1.0, 100),
                                             vec({problems::lqr_analytic_solution(0).p}), 1.0, opt);
    EXPECT_NEAR(s.P_p(0, 0), analytic, 0.1 * std::abs(analytic));
}

TEST(Update, ScalarSubstitution) {
    const auto p = toy::frozen(1);
    const auto next = update_initial_costate(vec({4.0}), scalar_sens(0.0, 2.0), vec({1.0}), vec({0.0}), p, 1.0, 0.0);
    EXPECT_DOUBLE_EQ(next[0], 3.5);
}

TEST(Update, ZeroResidualIsFixedPoint) {
    const auto p = toy::frozen(1);
    EXPECT_EQ(update_initial_costate(vec({4.0}), scalar_sens(0.0, 2.0), vec({0.0}), vec({9.0}), p, 0.5, 1e-8)[0], 4.0);
}

TEST(Update, FrozenFamilyHalves) {
    const auto p = toy::frozen(1);
    EXPECT_DOUBLE_EQ(update_initial_costate(vec({6.0}), scalar_sens(0.0, 1.0), vec({6.0}), vec({0.0}), p, 0.5, 0.0)[0],
                     3.0);
}

TEST(Update, SingularMatrixThrows) {
    const auto p = toy::frozen(2);
    const SensitivityEstimate<double> sens{Matrix<double>::Zero(2, 2), Matrix<double>::Zero(2, 2)};
    EXPECT_THROW(update_initial_costate(vec({1, 1}), sens, vec({1, 1}), vec({0, 0}), p, 0.5, 0.0),
                 SingularCorrection);
}

TEST(Solve, FrozenProblemConvergesInOneCorrection) {
    const auto p = toy::frozen(1);
    ShootingConfig<double> cfg;
    cfg.gamma = 1.0;
    cfg.ridge = 0.0;
    cfg.p0_initial = vec({3.0});
    const auto r = solve(p, TimePartition<double>::uniform(1.0, 4), cfg, PropagationOptions<double>{});
    EXPECT_TRUE(r.converged);
    ASSERT_EQ(r.residual_history.size(), 2u);
    EXPECT_NEAR(r.p0_final[0], 0.0, 1e-12);
    EXPECT_NEAR(r.final_residual(), 0.0, 1e-12);
}

TEST(Solve, GeometricDecay) {
    const auto p = toy::frozen(2);
    ShootingConfig<double> cfg;
    cfg.ridge = 0.0;
    cfg.epsilon = 1e-9;
    cfg.p0_initial = vec({3.0, -4.0});
    const auto r = solve(p, TimePartition<double>::uniform(1.0, 2), cfg, PropagationOptions<double>{});
    EXPECT_TRUE(r.converged);
    for (std::size_t k = 0; k < r.residual_history.size(); ++k)
        EXPECT_NEAR(r.residual_history[k], std::pow(0.5, static_cast<double>(k)) * 5.0, 1e-10) << k;
}

TEST(Solve, LqrConvergesNearAnalyticSolution) {
    const auto lqr = problems::build_lqr();
    const auto r = solve(lqr, TimePartition<double>::uniform(1.0, 100), ShootingConfig<double>{},
                         PropagationOptions<double>{});
    ASSERT_TRUE(r.converged);
    EXPECT_LT(transversality_residual(lqr, r.trajectory).norm(), 1e-3);
    double err = 0, scale = 0;
    for (const auto& pt : r.trajectory.points) {
        const double x = problems::lqr_analytic_solution(pt.t).x;
        err = std::max(err, std::abs(pt.x[0] - x));
        scale = std::max(scale, std::abs(x));
    }
    EXPECT_LE(err / scale, 0.05);
}

TEST(Solve, BudgetExhaustionKeepsBestIterate) {
    const auto lqr = problems::build_lqr();
    ShootingConfig<double> cfg;
    cfg.max_iterations = 3;
    const auto r = solve(lqr, TimePartition<double>::uniform(1.0, 50), cfg, PropagationOptions<double>{});
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 3);
    EXPECT_EQ(transversality_residual(lqr, r.trajectory).norm(), r.final_residual());
}

TEST(Solve, ReportsProgress) {
    const auto p = toy::frozen(1);
    ShootingConfig<double> cfg;
    cfg.p0_initial = vec({1.0});
    std::vector<int> seen;
    const auto r = solve(p, TimePartition<double>::uniform(1.0, 2), cfg, PropagationOptions<double>{},
                         ProgressSink<double>([&](const ProgressRecord<double>& rec) { seen.push_back(rec.iteration); }));
    ASSERT_EQ(seen.size(), r.residual_history.size());
    for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], static_cast<int>(i) + 1);
}

TEST(Solve, RejectsBadConfig) {
    const auto p = toy::frozen(1);
    const auto part = TimePartition<double>::uniform(1.0, 2);
    ShootingConfig<double> cfg;
    cfg.max_iterations = 0;
    EXPECT_THROW(solve(p, part, cfg, PropagationOptions<double>{}), ConfigError);
    cfg = {};
    cfg.gamma = 1.5;
    EXPECT_THROW(solve(p, part, cfg, PropagationOptions<double>{}), ConfigError);
    cfg = {};
    cfg.p0_initial = vec({1, 2});
    EXPECT_THROW(solve(p, part, cfg, PropagationOptions<double>{}), ConfigError);
}

TEST(Solve, SingularCorrectionFallsBack) {
    // one Euler step of p' = -2p with dt = 0.5 maps every p0 to zero, so P_p = 0
    auto p = toy::frozen(1);
    p.dynamics = [](double, const Vector<double>&, const Vector<double>&) { return vec({0.0}); };
    p.hamiltonian_x_gradient = [](double, const Vector<double>&, const Vector<double>& costate,
                                  const Vector<double>&) { return Vector<double>(costate / 0.5); };
    p.horizon = 0.5;
    p.terminal_gradient = [](const Vector<double>&) { return vec({1.0}); };
    ShootingConfig<double> cfg;
    cfg.ridge = 0.0;
    cfg.max_iterations = 4;
    const auto r = solve(p, TimePartition<double>::uniform(0.5, 1), cfg, PropagationOptions<double>{});
    EXPECT_GT(r.fallback_steps, 0);
    EXPECT_FALSE(r.converged);
}

// properties

TEST(ShootingProperties, Determinism) {
    const auto lqr = problems::build_lqr();
    const auto part = TimePartition<double>::uniform(1.0, 100);
    const auto a = solve(lqr, part, ShootingConfig<double>{}, PropagationOptions<double>{});
    const auto b = solve(lqr, part, ShootingConfig<double>{}, PropagationOptions<double>{});
    EXPECT_EQ(a.residual_history, b.residual_history);
    EXPECT_EQ(a.p0_final, b.p0_final);
    EXPECT_EQ(a.trajectory.accumulated_cost, b.trajectory.accumulated_cost);
}

TEST(ShootingProperties, ConvergedResidualBelowEpsilon) {
    const auto lqr = problems::build_lqr();
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        ShootingConfig<double> cfg;
        cfg.epsilon = eps;
        const auto r = solve(lqr, TimePartition<double>::uniform(1.0, 100), cfg, PropagationOptions<double>{});
        ASSERT_TRUE(r.converged);
        EXPECT_LT(r.final_residual(), eps);
        EXPECT_EQ(r.final_residual(), *std::min_element(r.residual_history.begin(), r.residual_history.end()));
        EXPECT_EQ(transversality_residual(lqr, r.trajectory).norm(), r.final_residual());
    }
}

TEST(ShootingProperties, GeometricDecayForAnyGamma) {
    const auto p = toy::frozen(3);
    for (double gamma : {0.1, 0.25, 0.5, 0.9}) {
        ShootingConfig<double> cfg;
        cfg.gamma = gamma;
        cfg.ridge = 0.0;
        cfg.epsilon = 1e-6;
        cfg.p0_initial = vec({1.0, 2.0, 2.0});
        const auto r = solve(p, TimePartition<double>::uniform(1.0, 2), cfg, PropagationOptions<double>{});
        for (std::size_t k = 0; k < r.residual_history.size(); ++k)
            ASSERT_NEAR(r.residual_history[k], std::pow(1 - gamma, static_cast<double>(k)) * 3.0, 1e-10);
    }
}
