#include "test_util.hpp"

#include "vwn/oracle.hpp"
#include "vwn/scenario.hpp"
#include "vwn/user_association.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <random>

using namespace vwn;

namespace {

struct UaFixture {
    NetworkInstance inst;
    RateTable rates;
    Uaf beta_prev;
    double x0_prev = 0.0;
    UaConfig cfg;
};

UaFixture load_ua_fixture() {
    auto d = vwn::testing::read_instance_file("ua_instance.txt");
    UaFixture f;
    const auto M = static_cast<std::size_t>(d["shape"][0]), K = static_cast<std::size_t>(d["shape"][1]),
               N = static_cast<std::size_t>(d["shape"][2]);
    f.inst.num_bs = M;
    f.inst.num_carriers = K;
    for (double v : d["slices"]) f.inst.users_per_slice.push_back(static_cast<std::size_t>(v));
    f.inst.r_rsv = d["r_rsv"];
    f.inst.gains = Tensor3(M, K, N, 1.0);
    f.inst.p_max.assign(M, 1.0);
    f.rates.r = Tensor3(M, K, N);
    f.rates.r.raw() = d["rates"];
    f.beta_prev = {Tensor3(M, K, N), UafMode::relaxed};
    f.beta_prev.beta.raw() = d["beta_prev"];
    f.x0_prev = d["x0_prev"][0];
    f.cfg.xi1 = d["xi1"][0];
    f.cfg.c4_slack = d["c4_slack"][0];
    f.cfg.beta_floor = d["beta_floor"][0];
    return f;
}

UaWeights full_weights(const NetworkInstance& inst, const Uaf& b, double x0, const RateTable& rates, double floor) {
    UaWeights w = prop2_weights(inst, b, x0, rates, {}, floor);
    const UaWeights w1 = prop1_weights(b, floor);
    w.lambda = w1.lambda;
    w.alpha = w1.alpha;
    w.nu = w1.nu;
    w.eta = w1.eta;
    return w;
}

NetworkInstance one_bs_instance(std::size_t K, std::size_t N) {
    NetworkInstance inst;
    inst.num_bs = 1;
    inst.num_carriers = K;
    inst.users_per_slice = {N};
    inst.gains = Tensor3(1, K, N, 1e-8);
    inst.noise_power = 1e-11;
    inst.p_max = {1.0};
    inst.r_rsv = {0.0};
    return inst;
}

RateTable constant_rates(const NetworkInstance& inst, double r) {
    return {Tensor3(inst.num_bs, inst.num_carriers, inst.num_users(), r), std::vector<double>(inst.num_slices(), 0.0), 0.0};
}

double weighted(const Uaf& b, const RateTable& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < b.beta.size(); ++i) s += b.beta.raw()[i] * r.r.raw()[i];
    return s;
}

bool c1_holds_at_fixed_rates(const NetworkInstance& inst, const Uaf& b, const RateTable& r) {
    for (std::size_t g = 0; g < inst.num_slices(); ++g) {
        double s = 0.0;
        for (std::size_t n : inst.users_of(g)) {
            for (std::size_t m = 0; m < inst.num_bs; ++m) {
                for (std::size_t k = 0; k < inst.num_carriers; ++k) s += b.beta(m, k, n) * r.r(m, k, n);
            }
        }
        if (s < inst.r_rsv[g] - 1e-9) return false;
    }
    return true;
}

}  // namespace

TEST(BuildUaGp, MatchesGoldenFixture) {
    const UaFixture f = load_ua_fixture();
    const UaIterate it = make_iterate(f.beta_prev, f.x0_prev, f.cfg.c4_slack, f.cfg.beta_floor);
    const UaWeights w = full_weights(f.inst, f.beta_prev, f.x0_prev, f.rates, f.cfg.beta_floor);
    const UaGp g = build_ua_gp(f.inst, f.rates, it, w, f.cfg);
    vwn::testing::expect_same_gp(gp::to_text(g.problem), vwn::testing::read_file("ua_gp_expected.txt"));
}

TEST(BuildUaGp, SmallestInstanceCounts) {
    NetworkInstance inst = one_bs_instance(1, 1);
    inst.r_rsv = {1.0};
    const RateTable rates = constant_rates(inst, 2.0);
    UaConfig cfg;
    const UaIterate it = make_iterate(Uaf::ones(inst), cfg.xi1 / 2.0, cfg.c4_slack, cfg.beta_floor);
    const UaGp g = build_ua_gp(inst, rates, it, full_weights(inst, it.beta, it.x0, rates, cfg.beta_floor), cfg);
    EXPECT_EQ(g.problem.num_variables(), 5u);  // beta, x, y, s, x0
    const std::size_t M = 1, K = 1, N = 1, G = 1;
    EXPECT_EQ(g.problem.num_constraints(), G + M * K + 4 * M * N + 1);
}

TEST(BuildUaGp, UniformIterateGivesUniformWeights) {
    std::mt19937_64 rng(3);
    NetworkInstance inst = vwn::testing::random_instance(2, 3, {2}, rng);
    const RateTable rates = constant_rates(inst, 1.5);
    UaConfig cfg;
    const UaIterate it = make_iterate(Uaf::ones(inst), cfg.xi1 / 2.0, cfg.c4_slack, cfg.beta_floor);
    const UaGp g = build_ua_gp(inst, rates, it, full_weights(inst, it.beta, it.x0, rates, cfg.beta_floor), cfg);
    for (const auto& e : g.problem.eq) {
        for (const auto& [v, a] : e.lhs.exponents) {
            const std::string& name = g.problem.variables[v].name;
            if (name[0] != 'b') continue;
            if (e.label.rfind("C4.3", 0) == 0) EXPECT_NEAR(a, -1.0 / 3.0, 1e-15) << e.label;
            if (e.label.rfind("C4.4", 0) == 0) EXPECT_NEAR(a, -1.0 / 6.0, 1e-15) << e.label;
        }
    }
}

TEST(BuildUaGp, DimensionMismatchThrows) {
    NetworkInstance inst = one_bs_instance(2, 1);
    UaConfig cfg;
    const RateTable wrong = {Tensor3(1, 3, 1, 1.0), {}, 0.0};
    const UaIterate it = make_iterate(Uaf::ones(inst), 1.0, cfg.c4_slack, cfg.beta_floor);
    EXPECT_THROW(build_ua_gp(inst, wrong, it, UaWeights{}, cfg), std::invalid_argument);
}

TEST(BuildUaGp, SolvedGpSatisfiesEqualitiesAndTightObjectiveBound) {
    std::mt19937_64 rng(11);
    ScenarioConfig sc;
    sc.num_bs = 2;
    sc.num_carriers = 2;
    sc.users_per_slice = {2};
    sc.r_rsv = {0.5};
    const NetworkInstance inst = generate_scenario(sc, 4);
    const RateTable rates = association_rates(inst, uniform_loads(inst));
    UaConfig cfg;
    // near-binary start homed on BS 0 / BS 1
    Uaf start = Uaf::zeros(inst, UafMode::relaxed);
    for (double& v : start.beta.raw()) v = cfg.beta_floor;
    start.beta(0, 0, 0) = start.beta(0, 1, 0) = 0.45;
    start.beta(1, 0, 1) = start.beta(1, 1, 1) = 0.45;
    const UaIterate it = make_iterate(start, cfg.xi1 / 2.0, cfg.c4_slack, cfg.beta_floor);
    const UaGp g = build_ua_gp(inst, rates, it, full_weights(inst, it.beta, it.x0, rates, cfg.beta_floor), cfg);
    gp::SolverOptions opt;
    opt.initial_point = g.point(detail::interior_start(it, cfg));
    const gp::GpSolution s = gp::solve(g.problem, opt);
    ASSERT_EQ(s.status, gp::GpStatus::optimal) << s.diagnostic;
    for (const auto& e : g.problem.eq) EXPECT_NEAR(gp::evaluate(e.lhs, s.x), 1.0, 1e-6) << e.label;
    for (const auto& c : g.problem.ineq) {
        const double v = gp::evaluate(c.lhs, s.x);
        EXPECT_LE(v, 1.0 + 1e-6) << c.label;
        if (c.label == "objective") EXPECT_NEAR(v, 1.0, 1e-6);
    }
}

TEST(SolveUserAssociation, SoleUserTakesAllCarriers) {
    NetworkInstance inst = one_bs_instance(2, 1);
    const RateTable rates = association_rates(inst, uniform_loads(inst));
    const UaResult r = solve_user_association(inst, rates);
    ASSERT_NE(r.report.status, SolveStatus::infeasible) << r.report.diagnostic;
    EXPECT_GT(r.relaxed.beta(0, 0, 0), 0.99);
    EXPECT_GT(r.relaxed.beta(0, 1, 0), 0.99);
    EXPECT_EQ(r.binary.beta(0, 0, 0), 1.0);
    EXPECT_EQ(r.binary.beta(0, 1, 0), 1.0);
}

TEST(SolveUserAssociation, TwoUsersSplitEqualCarriers) {
    NetworkInstance inst = one_bs_instance(2, 2);
    const RateTable rates = constant_rates(inst, 2.0);
    const UaResult r = solve_user_association(inst, rates);
    ASSERT_NE(r.report.status, SolveStatus::infeasible) << r.report.diagnostic;
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_EQ(r.binary.beta(0, k, 0) + r.binary.beta(0, k, 1), 1.0);
    }
    const ConstraintReport rep = evaluate_constraints(inst, PowerAlloc::uniform(inst, r.binary), r.binary);
    EXPECT_TRUE(rep.c3);
    EXPECT_TRUE(rep.c4);
}

TEST(SolveUserAssociation, ObjectiveTraceNondecreasingWithinStages) {
    ScenarioConfig sc;
    sc.num_bs = 2;
    sc.num_carriers = 3;
    sc.users_per_slice = {2, 2};
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const NetworkInstance inst = generate_scenario(sc, seed);
        const RateTable rates = association_rates(inst, uniform_loads(inst));
        const UaResult r = solve_user_association(inst, rates);
        const auto& tr = r.report.objective_trace;
        const auto& ps = r.report.phase_starts;
        for (std::size_t s = 0; s < ps.size(); ++s) {
            const std::size_t end = s + 1 < ps.size() ? ps[s + 1] : tr.size();
            for (std::size_t i = ps[s] + 1; i < end; ++i) EXPECT_GE(tr[i], tr[i - 1] - 1e-6) << "seed " << seed << " iter " << i;
        }
        ASSERT_EQ(r.report.kkt_residuals.size(), r.report.gp_optimal.size());
        for (std::size_t i = 0; i < r.report.kkt_residuals.size(); ++i) {
            if (r.report.gp_optimal[i]) EXPECT_LE(r.report.kkt_residuals[i], 1e-6);
        }
    }
}

TEST(SolveUserAssociation, ReservedRateAboveCapacityIsInfeasible) {
    NetworkInstance inst = one_bs_instance(2, 1);
    inst.r_rsv = {100.0};
    const RateTable rates = constant_rates(inst, 1.0);
    const UaResult r = solve_user_association(inst, rates);
    EXPECT_EQ(r.report.status, SolveStatus::infeasible);
    EXPECT_FALSE(r.report.diagnostic.empty());
}

TEST(SolveUserAssociation, NearOracleAtFixedRates) {
    ScenarioConfig sc;
    sc.num_bs = 2;
    sc.num_carriers = 2;
    sc.users_per_slice = {2};
    sc.r_rsv = {1.0};
    int feasible = 0, good = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const NetworkInstance inst = generate_scenario(sc, seed);
        const RateTable rates = association_rates(inst, uniform_loads(inst));
        double best = -1.0;
        enumerate_feasible_uaf(inst, [&](const Uaf& b) {
            if (c1_holds_at_fixed_rates(inst, b, rates)) best = std::max(best, weighted(b, rates));
        });
        if (best <= 0.0) continue;
        ++feasible;
        const UaResult r = solve_user_association(inst, rates);
        if (r.report.status == SolveStatus::infeasible) continue;
        if (weighted(r.binary, rates) >= 0.9 * best) ++good;
    }
    ASSERT_GT(feasible, 0);
    EXPECT_GE(good, 0.8 * feasible) << good << " of " << feasible;
}

TEST(SolveUserAssociation, FixedBsKeepsEveryUserHome) {
    ScenarioConfig sc;
    sc.num_bs = 2;
    sc.num_carriers = 3;
    sc.users_per_slice = {3};
    sc.r_rsv = {0.5};
    const NetworkInstance inst = generate_scenario(sc, 2);
    const RateTable rates = association_rates(inst, uniform_loads(inst));
    const std::vector<std::size_t> home{1, 0, 1};
    const UaResult r = solve_user_association_fixed_bs(inst, rates, home);
    ASSERT_NE(r.report.status, SolveStatus::infeasible) << r.report.diagnostic;
    for (std::size_t n = 0; n < 3; ++n) {
        for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(r.relaxed.beta(1 - home[n], k, n), 0.0);
        const long s = r.binary.serving_bs(n);
        EXPECT_TRUE(s < 0 || static_cast<std::size_t>(s) == home[n]);
    }
    EXPECT_THROW(solve_user_association_fixed_bs(inst, rates, {0, 1}), std::invalid_argument);
    EXPECT_THROW(solve_user_association_fixed_bs(inst, rates, {0, 1, 5}), std::out_of_range);
}

TEST(SolveUserAssociation, TraceCsvHasOneRowPerEntryPerIteration) {
    NetworkInstance inst = one_bs_instance(2, 2);
    UaConfig cfg;
    cfg.trace_csv = ::testing::TempDir() + "ua_trace.csv";
    std::remove(cfg.trace_csv.c_str());
    const UaResult r = solve_user_association(inst, constant_rates(inst, 1.0), cfg);
    std::ifstream in(cfg.trace_csv);
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, r.report.iterations * 4);
}

TEST(RoundUaf, BinaryInputUnchanged) {
    NetworkInstance inst = one_bs_instance(3, 2);
    inst.num_bs = 1;
    Uaf b = vwn::testing::binary_from_owners(inst, {{0, 1, -1}});
    b.mode = UafMode::relaxed;
    const Uaf r = round_uaf(b);
    EXPECT_EQ(r.beta, b.beta);
    EXPECT_EQ(r.mode, UafMode::binary);
}

TEST(RoundUaf, DominantBsWins) {
    Uaf b{Tensor3(2, 1, 1, 0.0), UafMode::relaxed};
    b.beta(0, 0, 0) = 0.9;
    b.beta(1, 0, 0) = 0.1;
    const Uaf r = round_uaf(b);
    EXPECT_EQ(r.beta(0, 0, 0), 1.0);
    EXPECT_EQ(r.beta(1, 0, 0), 0.0);
    EXPECT_EQ(r.serving_bs(0), 0);
}

TEST(RoundUaf, TiesGoToLowestIndex) {
    Uaf b{Tensor3(2, 1, 2, 0.5), UafMode::relaxed};
    const Uaf r = round_uaf(b);
    EXPECT_EQ(r.serving_bs(0), 0);
    // homed on BS 0 too, but its only carrier went to user 0
    EXPECT_EQ(r.serving_bs(1), -1);
    EXPECT_EQ(r.beta(0, 0, 0), 1.0);
    EXPECT_EQ(r.beta(0, 0, 1), 0.0);
}

TEST(RoundUaf, AlwaysSatisfiesC3AndC4) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        NetworkInstance inst = vwn::testing::random_instance(3, 4, {2, 3}, rng);
        Uaf b{Tensor3(3, 4, 5), UafMode::relaxed};
        for (double& v : b.beta.raw()) v = u(rng);
        const Uaf r = round_uaf(b);
        const ConstraintReport rep = evaluate_constraints(inst, PowerAlloc::uniform(inst, r), r);
        EXPECT_TRUE(rep.c3);
        EXPECT_TRUE(rep.c4);
        for (double v : r.beta.raw()) EXPECT_TRUE(v == 0.0 || v == 1.0);
    }
}

TEST(RoundUaf, SolverOutputsSatisfyC3AndC4) {
    ScenarioConfig sc;
    sc.num_bs = 2;
    sc.num_carriers = 2;
    sc.users_per_slice = {3};
    sc.r_rsv = {0.5};
    UaConfig cfg;
    cfg.max_inner_iter = 10;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const NetworkInstance inst = generate_scenario(sc, seed);
        const UaResult r = solve_user_association(inst, association_rates(inst, uniform_loads(inst)), cfg);
        if (r.report.status == SolveStatus::infeasible) continue;
        const ConstraintReport rep = evaluate_constraints(inst, PowerAlloc::uniform(inst, r.binary), r.binary);
        EXPECT_TRUE(rep.c3) << "seed " << seed;
        EXPECT_TRUE(rep.c4) << "seed " << seed;
    }
}

TEST(MakeIterate, AuxiliaryVariablesAreConsistent) {
    Uaf b{Tensor3(2, 2, 1, 0.0), UafMode::relaxed};
    b.beta(0, 0, 0) = 0.6;
    b.beta(0, 1, 0) = 0.3;
    b.beta(1, 0, 0) = 0.1;
    const UaIterate it = make_iterate(b, 5.0, 1e-3, 1e-10);
    EXPECT_NEAR(it.x[0], 0.9, 1e-15);
    EXPECT_NEAR(it.x[1], 0.1 + 1e-10, 1e-15);
    EXPECT_NEAR(it.y[0], 1.0 + 1e-10, 1e-15);
    for (std::size_t m = 0; m < 2; ++m) EXPECT_GE(it.s[m], 1.0 + it.x[m] * it.y[0]);
    EXPECT_EQ(it.x0, 5.0);
}
