#include "gp_oracles.hpp"
#include "vwn/gp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace vwn::gp;
using vwn::testing::GridBest;
using vwn::testing::grid_oracle;
using vwn::testing::random_posynomial;

namespace {

// Product of powers taken in reverse variable order.
double naive_eval(const Posynomial& f, const std::vector<double>& x) {
    double s = 0.0;
    for (const auto& t : f.terms) {
        double v = 1.0;
        for (auto it = t.exponents.rbegin(); it != t.exponents.rend(); ++it) v *= std::pow(x[it->first], it->second);
        s += t.coefficient * v;
    }
    return s;
}

}  // namespace

TEST(Evaluate, Examples) {
    EXPECT_DOUBLE_EQ(evaluate(Posynomial(Monomial::variable(0)), {5.0}), 5.0);
    Posynomial f(Monomial::variable(0));
    f += Monomial::variable(0, -1.0);
    EXPECT_DOUBLE_EQ(evaluate(f, {1.0}), 2.0);
}

TEST(Evaluate, MatchesNaiveReevaluation) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> xs(0.1, 10.0);
    for (int i = 0; i < 200; ++i) {
        const Posynomial f = random_posynomial(rng, 3, 3);
        const std::vector<double> x{xs(rng), xs(rng), xs(rng)};
        const double a = evaluate(f, x), b = naive_eval(f, x);
        EXPECT_NEAR(a, b, 1e-14 * b);
    }
}

TEST(Evaluate, RejectsNonpositivePoint) {
    Posynomial f(Monomial::variable(0));
    EXPECT_THROW(evaluate(f, {0.0}), std::invalid_argument);
    EXPECT_THROW(evaluate(f, {-1.0}), std::invalid_argument);
}

TEST(Monomial, NormalizeMergesAndDrops) {
    Monomial m(2.0, {{1, 1.0}, {0, 2.0}, {1, -1.0}});
    ASSERT_EQ(m.exponents.size(), 1u);
    EXPECT_EQ(m.exponents[0].first, 0u);
    EXPECT_EQ(m.exponents[0].second, 2.0);
    const Monomial sq = (m * Monomial::variable(2, 0.5, 3.0)).pow(2.0);
    EXPECT_DOUBLE_EQ(sq.coefficient, 36.0);
    EXPECT_DOUBLE_EQ(evaluate(sq, {2.0, 1.0, 4.0}), 36.0 * 16.0 * 4.0);
}

TEST(LogTransform, MonomialIsAffine) {
    GpProblem p;
    p.add_variable("x");
    p.objective = Monomial(3.0, {{0, 2.5}});
    const ConvexProgram cp = log_transform(p);
    ASSERT_TRUE(cp.objective.is_affine());
    const AffineForm a = cp.objective.as_affine();
    EXPECT_DOUBLE_EQ(a.b, std::log(3.0));
    ASSERT_EQ(a.a.size(), 1u);
    EXPECT_EQ(a.a[0].second, 2.5);
}

TEST(LogTransform, SumAtOrigin) {
    GpProblem p;
    p.add_variable("x");
    p.add_variable("y");
    Posynomial f(Monomial::variable(0));
    f += Monomial::variable(1);
    p.objective = f;
    const ConvexProgram cp = log_transform(p);
    EXPECT_DOUBLE_EQ(cp.objective.value(Eigen::VectorXd::Zero(2)), std::log(2.0));
}

TEST(LogTransform, ValueAndGradientMatchOriginal) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> zn(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        GpProblem p;
        for (int j = 0; j < 3; ++j) p.add_variable("v" + std::to_string(j), 1e-3, 1e3);
        PosynomialProduct obj;
        obj.factors.push_back(random_posynomial(rng, 3, 3));
        obj.factors.push_back(random_posynomial(rng, 3, 2));
        p.objective = obj;
        p.add_inequality(random_posynomial(rng, 3, 4));
        p.add_equality(random_posynomial(rng, 3, 1).terms.front());
        const ConvexProgram cp = log_transform(p);
        Eigen::VectorXd z(3);
        for (int j = 0; j < 3; ++j) z[j] = zn(rng);
        std::vector<double> x(3);
        for (int j = 0; j < 3; ++j) x[static_cast<std::size_t>(j)] = std::exp(z[j]);
        EXPECT_NEAR(cp.objective.value(z), std::log(evaluate(p.objective, x)), 1e-12 * std::max(1.0, std::abs(cp.objective.value(z))));
        EXPECT_NEAR(cp.ineq[0].value(z), std::log(evaluate(p.ineq[0].lhs, x)), 1e-12 * std::max(1.0, std::abs(cp.ineq[0].value(z))));
        EXPECT_NEAR(cp.eq[0].value(z), std::log(evaluate(p.eq[0].lhs, x)), 1e-12 * std::max(1.0, std::abs(cp.eq[0].value(z))));
        EXPECT_DOUBLE_EQ(cp.lower[0], std::log(1e-3));

        LogFunction::Local loc;
        cp.objective.evaluate_local(z, true, loc);
        const auto& sup = cp.objective.support();
        for (std::size_t i = 0; i < sup.size(); ++i) {
            const double h = 1e-5;
            Eigen::VectorXd zp = z, zm = z;
            zp[static_cast<Eigen::Index>(sup[i])] += h;
            zm[static_cast<Eigen::Index>(sup[i])] -= h;
            const double fd = (cp.objective.value(zp) - cp.objective.value(zm)) / (2.0 * h);
            const double g = loc.grad[static_cast<Eigen::Index>(i)];
            EXPECT_LT(std::abs(fd - g), 1e-6 * std::max(1.0, std::abs(g)));
        }
        // the Hessian is positive semidefinite
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(loc.hess);
        EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
    }
}

TEST(LogTransform, DeltaMatchesValueDifference) {
    std::mt19937_64 rng(4);
    GpProblem p;
    for (int j = 0; j < 2; ++j) p.add_variable("v" + std::to_string(j));
    p.objective = random_posynomial(rng, 2, 4);
    const ConvexProgram cp = log_transform(p);
    Eigen::VectorXd z(2), dz(2);
    z << 0.3, -0.2;
    dz << 1.5, -0.7;
    for (double s : {1e-6, 0.1, 1.0, 3.0}) {
        const double expect = cp.objective.value(z + s * dz) - cp.objective.value(z);
        EXPECT_NEAR(cp.objective.delta(z, dz, s), expect, 1e-12 * std::max(1.0, std::abs(expect)));
    }
}

TEST(Solve, ConstraintTightness) {
    GpProblem p;
    p.add_variable("x");
    p.objective = Monomial::variable(0);
    p.add_inequality(Monomial(3.0, {{0, -1.0}}));
    const GpSolution s = solve(p);
    ASSERT_EQ(s.status, GpStatus::optimal) << s.diagnostic;
    EXPECT_NEAR(s.objective_value, 3.0, 1e-6);
    EXPECT_NEAR(s.x[0], 3.0, 1e-6);
    EXPECT_LE(s.kkt_residual, 1e-8);
}

TEST(Solve, DegenerateOptimumSet) {
    GpProblem p;
    p.add_variable("x");
    p.add_variable("y");
    p.objective = Monomial(1.0, {{0, 1.0}, {1, 1.0}});
    p.add_inequality(Monomial(1.0, {{0, -1.0}, {1, -1.0}}));
    const GpSolution s = solve(p);
    ASSERT_EQ(s.status, GpStatus::optimal) << s.diagnostic;
    EXPECT_NEAR(s.objective_value, 1.0, 1e-6);
}

TEST(Solve, SumWithProductBound) {
    GpProblem p;
    p.add_variable("x");
    p.add_variable("y");
    Posynomial f(Monomial::variable(0));
    f += Monomial::variable(1);
    p.objective = f;
    p.add_inequality(Monomial(4.0, {{0, -1.0}, {1, -1.0}}));
    const GpSolution s = solve(p);
    ASSERT_EQ(s.status, GpStatus::optimal) << s.diagnostic;
    EXPECT_NEAR(s.objective_value, 4.0, 1e-6);
    EXPECT_NEAR(s.x[0], 2.0, 1e-4);
    EXPECT_NEAR(s.x[1], 2.0, 1e-4);

    GpProblem boxed = p;
    boxed.variables[0] = {"x", 1e-2, 1e2};
    boxed.variables[1] = {"y", 1e-2, 1e2};
    const GridBest g = grid_oracle(boxed, {std::log(1e-2), std::log(1e-2)}, {std::log(1e2), std::log(1e2)}, 81);
    EXPECT_NEAR(g.value, 4.0, 1e-3);
    EXPECT_NEAR(s.objective_value, g.value, 1e-3);
}

TEST(Solve, MonomialEquality) {
    // minimize x + y  s.t.  x / y = 1, 1 / (x y) <= 1
    GpProblem p;
    p.add_variable("x");
    p.add_variable("y");
    Posynomial f(Monomial::variable(0));
    f += Monomial::variable(1);
    p.objective = f;
    p.add_inequality(Monomial(1.0, {{0, -1.0}, {1, -1.0}}));
    p.add_equality(Monomial(1.0, {{0, 1.0}, {1, -1.0}}));
    const GpSolution s = solve(p);
    ASSERT_EQ(s.status, GpStatus::optimal) << s.diagnostic;
    EXPECT_NEAR(s.objective_value, 2.0, 1e-6);
    EXPECT_NEAR(s.x[0] / s.x[1], 1.0, 1e-8);
}

TEST(Solve, ProductObjective) {
    // minimize (x + 1)(1/x + 1) = 2 + x + 1/x, optimum 4 at x = 1
    GpProblem p;
    p.add_variable("x");
    Posynomial a(Monomial::variable(0));
    a += Monomial(1.0);
    Posynomial b(Monomial::variable(0, -1.0));
    b += Monomial(1.0);
    p.objective = PosynomialProduct(std::vector<Posynomial>{a, b});
    const GpSolution s = solve(p);
    ASSERT_EQ(s.status, GpStatus::optimal) << s.diagnostic;
    EXPECT_NEAR(s.objective_value, 4.0, 1e-6);
    EXPECT_NEAR(s.x[0], 1.0, 1e-3);
}

TEST(Solve, DetectsInfeasibility) {
    GpProblem p;
    p.add_variable("x");
    p.objective = Monomial::variable(0);
    p.add_inequality(Monomial::variable(0));                 // x <= 1
    p.add_inequality(Monomial(2.0, {{0, -1.0}}));            // x >= 2
    const GpSolution s = solve(p);
    EXPECT_EQ(s.status, GpStatus::infeasible);
    EXPECT_FALSE(s.diagnostic.empty());
}

TEST(Solve, DetectsInfeasibleBoxAndEquality) {
    GpProblem p;
    p.add_variable("x", 1.0, 2.0);
    p.objective = Monomial::variable(0);
    p.add_equality(Monomial(1.0 / 5.0, {{0, 1.0}}));  // x = 5
    EXPECT_EQ(solve(p).status, GpStatus::infeasible);
}

TEST(Solve, ScaleInvariance) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        GpProblem p;
        for (int j = 0; j < 2; ++j) p.add_variable("v" + std::to_string(j), 1e-2, 1e2);
        p.objective = random_posynomial(rng, 2, 3);
        Posynomial c = random_posynomial(rng, 2, 2);
        const double at1 = evaluate(c, {1.0, 1.0});
        for (auto& t : c.terms) t.coefficient *= 0.5 / at1;
        p.add_inequality(c);
        GpProblem scaled = p;
        for (auto& t : scaled.objective.factors.front().terms) t.coefficient *= 1234.5;
        const GpSolution a = solve(p), b = solve(scaled);
        ASSERT_EQ(a.status, GpStatus::optimal) << a.diagnostic;
        ASSERT_EQ(b.status, GpStatus::optimal) << b.diagnostic;
        EXPECT_NEAR(b.objective_value / a.objective_value, 1234.5, 1234.5 * 1e-6);
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(std::log(a.x[static_cast<std::size_t>(j)]), std::log(b.x[static_cast<std::size_t>(j)]), 1e-4);
    }
}

TEST(Solve, RandomSmallGpsMatchGridOracle) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> nv(2, 3), nc(1, 2);
    int compared = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = static_cast<std::size_t>(nv(rng));
        const GpProblem p = vwn::testing::random_small_gp(rng, n, nc(rng));
        const GpSolution s = solve(p);
        ASSERT_EQ(s.status, GpStatus::optimal) << "trial " << trial << ": " << s.diagnostic;
        for (const auto& c : p.ineq) EXPECT_LE(evaluate(c.lhs, s.x), 1.0 + 1e-6);
        const GridBest g = vwn::testing::small_gp_oracle(p);
        ASSERT_TRUE(std::isfinite(g.value));
        EXPECT_NEAR(s.objective_value, g.value, 0.01 * g.value) << "trial " << trial;
        EXPECT_LE(s.objective_value, g.value * (1.0 + 1e-6)) << "trial " << trial;
        ++compared;
    }
    EXPECT_EQ(compared, 100);
}

TEST(Solve, OptimalStatusImpliesFeasibilityAndSmallResidual) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        GpProblem p;
        for (int j = 0; j < 3; ++j) p.add_variable("v" + std::to_string(j), 1e-3, 1e3);
        p.objective = random_posynomial(rng, 3, 3);
        Posynomial g = random_posynomial(rng, 3, 3);
        const double at = evaluate(g, {1.0, 1.0, 1.0});
        for (auto& t : g.terms) t.coefficient *= 0.5 / at;
        p.add_inequality(g);
        p.add_equality(Monomial(1.0, {{0, 1.0}, {1, -0.5}}));
        const GpSolution s = solve(p);
        ASSERT_EQ(s.status, GpStatus::optimal) << s.diagnostic;
        EXPECT_LE(evaluate(p.ineq[0].lhs, s.x), 1.0 + 1e-8);
        EXPECT_NEAR(evaluate(p.eq[0].lhs, s.x), 1.0, 1e-8);
        EXPECT_LE(s.kkt_residual, 1e-8);
    }
}

TEST(Solve, WarmStartGivesSameOptimum) {
    GpProblem p;
    p.add_variable("x");
    p.add_variable("y");
    Posynomial f(Monomial::variable(0));
    f += Monomial::variable(1, 2.0);
    p.objective = f;
    p.add_inequality(Monomial(4.0, {{0, -1.0}, {1, -1.0}}));
    SolverOptions opt;
    opt.initial_point = std::vector<double>{10.0, 10.0};
    const GpSolution a = solve(p), b = solve(p, opt);
    ASSERT_EQ(b.status, GpStatus::optimal);
    EXPECT_NEAR(a.objective_value, b.objective_value, 1e-7);
}

TEST(GpProblem, ValidateRejectsMalformedInput) {
    GpProblem p;
    p.add_variable("x");
    p.objective = Monomial(1.0, {{3, 1.0}});
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p.objective = Monomial(-1.0, {{0, 1.0}});
    EXPECT_THROW(p.validate(), std::invalid_argument);
    EXPECT_THROW(p.add_variable("bad", 0.0), std::invalid_argument);
    EXPECT_THROW(p.add_variable("empty", 2.0, 1.0), std::invalid_argument);
}

TEST(GpProblem, TextDump) {
    GpProblem p;
    p.add_variable("x", 0.5);
    p.add_variable("y");
    p.objective = Monomial(2.0, {{0, 1.0}, {1, -0.5}});
    p.add_inequality(Posynomial(Monomial::variable(1)), "cap");
    p.add_equality(Monomial(3.0, {{0, 1.0}}), "pin");
    const std::string t = to_text(p);
    EXPECT_EQ(t,
              "variables 2\n  x 0.5 -\n  y - -\nobjective\n  factor\n    2 x:1 y:-0.5\n"
              "le1 cap\n  factor\n    1 y:1\neq1 pin\n  factor\n    3 x:1\n");
}
