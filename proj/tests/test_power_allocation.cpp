#include "test_util.hpp"

#include "vwn/power_allocation.hpp"
#include "vwn/scenario.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

using namespace vwn;

namespace {

struct PaFixture {
    NetworkInstance inst;
    Uaf beta;
    PowerAlloc p_prev;
    PaConfig cfg;
};

PaFixture load_pa_fixture() {
    auto d = vwn::testing::read_instance_file("pa_instance.txt");
    PaFixture f;
    const auto M = static_cast<std::size_t>(d["shape"][0]), K = static_cast<std::size_t>(d["shape"][1]),
               N = static_cast<std::size_t>(d["shape"][2]);
    f.inst.num_bs = M;
    f.inst.num_carriers = K;
    for (double v : d["slices"]) f.inst.users_per_slice.push_back(static_cast<std::size_t>(v));
    f.inst.r_rsv = d["r_rsv"];
    f.inst.noise_power = d["noise"][0];
    f.inst.p_max = d["p_max"];
    f.inst.gains = Tensor3(M, K, N);
    f.inst.gains.raw() = d["gains"];
    f.cfg.power_floor = d["power_floor"][0];
    f.beta = Uaf::zeros(f.inst, UafMode::binary);
    f.p_prev = PowerAlloc::zeros(f.inst);
    const auto& a = d["assigned"];
    for (std::size_t i = 0; i < a.size() / 3; ++i) {
        const auto m = static_cast<std::size_t>(a[3 * i]), k = static_cast<std::size_t>(a[3 * i + 1]),
                   n = static_cast<std::size_t>(a[3 * i + 2]);
        f.beta.beta(m, k, n) = 1.0;
        f.p_prev.p(m, k, n) = d["p_prev"][i];
    }
    return f;
}

// Best sum rate over a per-tuple grid of `levels` log-spaced powers plus 0.
double grid_best(const NetworkInstance& inst, const Uaf& b, std::size_t levels) {
    std::vector<std::array<std::size_t, 3>> on;
    for (std::size_t m = 0; m < inst.num_bs; ++m) {
        for (std::size_t k = 0; k < inst.num_carriers; ++k) {
            for (std::size_t n = 0; n < inst.num_users(); ++n) {
                if (b.beta(m, k, n) > 0.5) on.push_back({m, k, n});
            }
        }
    }
    std::vector<std::vector<double>> grid(inst.num_bs);
    for (std::size_t m = 0; m < inst.num_bs; ++m) {
        grid[m].push_back(0.0);
        for (std::size_t i = 0; i + 1 < levels; ++i) {
            grid[m].push_back(inst.p_max[m] * std::pow(1e-3, 1.0 - static_cast<double>(i) / static_cast<double>(levels - 2)));
        }
    }
    std::vector<std::size_t> idx(on.size(), 0);
    double best = -1.0;
    PowerAlloc p = PowerAlloc::zeros(inst);
    while (true) {
        std::vector<double> spent(inst.num_bs, 0.0);
        for (std::size_t i = 0; i < on.size(); ++i) {
            const double v = grid[on[i][0]][idx[i]];
            p.p(on[i][0], on[i][1], on[i][2]) = v;
            spent[on[i][0]] += v;
        }
        bool ok = true;
        for (std::size_t m = 0; m < inst.num_bs; ++m) ok = ok && spent[m] <= inst.p_max[m] * (1.0 + 1e-12);
        if (ok) {
            const RateTable t = rate_table(inst, p, b);
            bool c1 = true;
            for (std::size_t g = 0; g < inst.num_slices(); ++g) c1 = c1 && t.per_slice_rate[g] >= inst.r_rsv[g] - 1e-9;
            if (c1) best = std::max(best, t.total_rate);
        }
        std::size_t j = 0;
        while (j < on.size() && ++idx[j] == levels) idx[j++] = 0;
        if (j == on.size()) break;
    }
    return best;
}

}  // namespace

TEST(BuildPaGp, MatchesGoldenFixture) {
    const PaFixture f = load_pa_fixture();
    const PaWeights w = pa_kappa(f.p_prev, f.inst, f.beta, f.cfg.power_floor);
    const PaGp g = build_pa_gp(f.inst, f.beta, w, f.cfg);
    ASSERT_FALSE(g.trivially_infeasible);
    vwn::testing::expect_same_gp(gp::to_text(g.problem), vwn::testing::read_file("pa_gp_expected.txt"));
}

TEST(BuildPaGp, ConstraintCountIsSlicesPlusBs) {
    const PaFixture f = load_pa_fixture();
    const PaGp g = build_pa_gp(f.inst, f.beta, pa_kappa(f.p_prev, f.inst, f.beta), f.cfg);
    EXPECT_EQ(g.problem.num_constraints(), f.inst.num_slices() + f.inst.num_bs);
    EXPECT_EQ(g.problem.num_variables(), 3u);
}

TEST(BuildPaGp, TightAtExpansionPoint) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> pw(0.05, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        NetworkInstance inst = vwn::testing::random_instance(2, 2, {1, 2}, rng);
        const Uaf b = vwn::testing::binary_from_owners(inst, {{0, 1}, {2, trial % 2 == 0 ? 2 : -1}});
        PowerAlloc p = PowerAlloc::zeros(inst);
        for (std::size_t i = 0; i < p.p.size(); ++i) {
            if (b.beta.raw()[i] > 0.5) p.p.raw()[i] = pw(rng);
        }
        PaConfig cfg;
        const PaGp g = build_pa_gp(inst, b, pa_kappa(p, inst, b), cfg);
        const std::vector<double> x = g.point(p);
        const RateTable t = rate_table(inst, p, b);
        double prod_inv = 1.0;
        for (std::size_t i = 0; i < b.beta.size(); ++i) {
            if (b.beta.raw()[i] > 0.5) prod_inv *= std::exp2(-t.r.raw()[i]);
        }
        EXPECT_NEAR(gp::evaluate(g.problem.objective, x), prod_inv, 1e-10 * prod_inv);
        // each factor separately: gamma_hat = 1 / (1 + SINR)
        std::size_t f = 0;
        for (std::size_t i = 0; i < b.beta.size(); ++i) {
            if (b.beta.raw()[i] < 0.5) continue;
            const double v = gp::evaluate(g.problem.objective.factors[f++], x);
            EXPECT_NEAR(v, std::exp2(-t.r.raw()[i]), 1e-10);
        }
    }
}

TEST(BuildPaGp, SingleTupleSurrogateIsMonomial) {
    NetworkInstance inst;
    inst.num_bs = 1;
    inst.num_carriers = 1;
    inst.users_per_slice = {1};
    inst.gains = Tensor3(1, 1, 1, 2e-9);
    inst.noise_power = 1e-11;
    inst.p_max = {4.0};
    inst.r_rsv = {0.0};
    const Uaf b = vwn::testing::binary_from_owners(inst, {{0}});
    PowerAlloc p = PowerAlloc::zeros(inst);
    p.p(0, 0, 0) = 0.5;
    const PaGp g = build_pa_gp(inst, b, pa_kappa(p, inst, b), PaConfig{});
    ASSERT_TRUE(g.problem.objective.is_monomial());
    const gp::Monomial& m = g.problem.objective.factors[0].terms[0];
    const double snr = 0.5 * 2e-9 / 1e-11;
    const double k0 = 1.0 / (1.0 + snr), k1 = snr / (1.0 + snr);
    EXPECT_NEAR(m.exponents[0].second, -k1, 1e-15);
    const double coef = 1e-11 * std::pow(1e-11 / k0, -k0) * std::pow(2e-9 / k1, -k1);
    EXPECT_NEAR(m.coefficient, coef, 1e-12 * coef);
}

TEST(BuildPaGp, SliceWithoutCarrierIsTriviallyInfeasible) {
    std::mt19937_64 rng(5);
    NetworkInstance inst = vwn::testing::random_instance(1, 2, {1, 1}, rng);
    inst.r_rsv = {0.0, 1.0};
    const Uaf b = vwn::testing::binary_from_owners(inst, {{0, 0}});
    const PaGp g = build_pa_gp(inst, b, pa_kappa(PowerAlloc::uniform(inst, b), inst, b), PaConfig{});
    EXPECT_TRUE(g.trivially_infeasible);
    const PaResult r = solve_power_allocation(inst, b);
    EXPECT_EQ(r.report.status, SolveStatus::infeasible);
}

TEST(SolvePowerAllocation, SingleLinkUsesFullBudget) {
    NetworkInstance inst;
    inst.num_bs = 1;
    inst.num_carriers = 1;
    inst.users_per_slice = {1};
    inst.gains = Tensor3(1, 1, 1, 1e-8);
    inst.noise_power = 1e-11;
    inst.p_max = {10.0};
    inst.r_rsv = {0.0};
    const Uaf b = vwn::testing::binary_from_owners(inst, {{0}});
    const PaResult r = solve_power_allocation(inst, b);
    ASSERT_NE(r.report.status, SolveStatus::infeasible) << r.report.diagnostic;
    EXPECT_NEAR(r.power.p(0, 0, 0), 10.0, 1e-6);
}

TEST(SolvePowerAllocation, RelabellingBsAndUsersGivesSameRate) {
    ScenarioConfig sc;
    sc.num_bs = 2;
    sc.num_carriers = 2;
    sc.users_per_slice = {2};
    sc.r_rsv = {0.5};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const NetworkInstance inst = generate_scenario(sc, seed);
        NetworkInstance swapped = inst;
        for (std::size_t m = 0; m < 2; ++m) {
            for (std::size_t k = 0; k < 2; ++k) {
                for (std::size_t n = 0; n < 2; ++n) swapped.gains(1 - m, k, 1 - n) = inst.gains(m, k, n);
            }
        }
        const Uaf b = vwn::testing::binary_from_owners(inst, {{0, 0}, {1, 1}});
        const PaResult r = solve_power_allocation(inst, b), s = solve_power_allocation(swapped, b);
        ASSERT_EQ(r.report.status == SolveStatus::infeasible, s.report.status == SolveStatus::infeasible) << "seed " << seed;
        if (r.report.status == SolveStatus::infeasible) continue;
        const double a = total_objective(inst, r.power, b), c = total_objective(swapped, s.power, b);
        EXPECT_NEAR(a, c, 1e-4 * std::max(a, c)) << "seed " << seed;
        for (std::size_t k = 0; k < 2; ++k) {
            EXPECT_NEAR(r.power.p(0, k, 0), s.power.p(1, k, 1), 1e-3 * inst.p_max[0]) << "seed " << seed;
        }
    }
}

TEST(SolvePowerAllocation, TraceNondecreasingAndBudgetsHold) {
    ScenarioConfig sc;
    sc.num_bs = 2;
    sc.num_carriers = 3;
    sc.users_per_slice = {2, 2};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const NetworkInstance inst = generate_scenario(sc, seed);
        const Uaf b = vwn::testing::binary_from_owners(inst, {{0, 1, 0}, {2, 3, 3}});
        const PaResult r = solve_power_allocation(inst, b);
        if (r.report.status == SolveStatus::infeasible) continue;
        const auto& tr = r.report.objective_trace;
        for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_GE(tr[i], tr[i - 1] - 1e-6) << "seed " << seed;
        for (std::size_t i = 0; i < r.report.kkt_residuals.size(); ++i) {
            if (r.report.gp_optimal[i]) EXPECT_LE(r.report.kkt_residuals[i], 1e-6);
        }
        const ConstraintReport rep = evaluate_constraints(inst, r.power, b);
        for (double c2 : rep.c2_residual) EXPECT_GE(c2, -1e-6);
        // C1.2 at the optimum implies the measured slice rates
        for (double c1 : rep.c1_residual) EXPECT_GE(c1, -1e-6) << "seed " << seed;
    }
}

TEST(SolvePowerAllocation, NearGridOracle) {
    ScenarioConfig sc;
    sc.num_bs = 2;
    sc.num_carriers = 2;
    sc.users_per_slice = {2};
    sc.r_rsv = {0.5};
    int feasible = 0, good = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const NetworkInstance inst = generate_scenario(sc, seed);
        const Uaf b = vwn::testing::binary_from_owners(inst, {{0, 0}, {1, 1}});
        const double best = grid_best(inst, b, 17);
        if (best < 0.0) continue;
        ++feasible;
        const PaResult r = solve_power_allocation(inst, b);
        if (r.report.status == SolveStatus::infeasible) continue;
        // successive approximation stops at local optima; a few seeds settle
        // on a point where one BS stays silent while the grid finds better
        if (total_objective(inst, r.power, b) >= 0.9 * best) ++good;
    }
    ASSERT_GT(feasible, 0);
    EXPECT_GE(good, 0.8 * feasible) << good << " of " << feasible;
}

TEST(SolvePowerAllocation, UnreachableReservedRateIsInfeasible) {
    std::mt19937_64 rng(6);
    NetworkInstance inst = vwn::testing::random_instance(1, 1, {1}, rng);
    inst.r_rsv = {80.0};
    const Uaf b = vwn::testing::binary_from_owners(inst, {{0}});
    const PaResult r = solve_power_allocation(inst, b);
    EXPECT_EQ(r.report.status, SolveStatus::infeasible);
    EXPECT_FALSE(r.report.diagnostic.empty());
}

TEST(RestrictPower, ZeroesUnassignedAndFloorsAssigned) {
    std::mt19937_64 rng(7);
    NetworkInstance inst = vwn::testing::random_instance(1, 2, {2}, rng);
    const Uaf b = vwn::testing::binary_from_owners(inst, {{0, -1}});
    PowerAlloc p = PowerAlloc::zeros(inst);
    p.p(0, 1, 1) = 3.0;
    const PowerAlloc r = restrict_power(p, b, 1e-12);
    EXPECT_EQ(r.p(0, 1, 1), 0.0);
    EXPECT_EQ(r.p(0, 0, 0), 1e-12);
}
