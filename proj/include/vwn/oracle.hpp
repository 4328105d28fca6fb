#pragma once

/// \file
/// Exhaustive reference optimizer for tiny instances: every binary UAF that
/// satisfies C3 and C4, crossed with a per-tuple power grid.

#include "vwn/core_model.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vwn {

struct OracleConfig {
    std::size_t power_levels = 17;   ///< L grid points per power variable, 0 included
    double power_floor_ratio = 1e-3; ///< lowest nonzero level as a fraction of P_max
    std::size_t max_bs = 2;
    std::size_t max_carriers = 2;
    std::size_t max_users = 3;
    double feasibility_tol = 1e-9;

    void validate() const {
        if (power_levels < 2) throw std::invalid_argument("oracle: need at least two power levels");
        if (!(power_floor_ratio > 0.0 && power_floor_ratio < 1.0)) {
            throw std::invalid_argument("oracle: power_floor_ratio must lie in (0, 1)");
        }
    }
};

inline void check_oracle_guard(const NetworkInstance& inst, const OracleConfig& cfg = {}) {
    inst.validate();
    if (inst.num_bs > cfg.max_bs || inst.num_carriers > cfg.max_carriers || inst.num_users() > cfg.max_users) {
        throw std::invalid_argument("oracle: instance exceeds the size guard (M<=" + std::to_string(cfg.max_bs) +
                                    ", K<=" + std::to_string(cfg.max_carriers) + ", N<=" + std::to_string(cfg.max_users) + ")");
    }
}

/// Calls `visit` once per binary UAF satisfying C3 and C4, idle carriers
/// included. Each (m, k) slot takes an owner from {idle, 0..N-1}.
inline void enumerate_feasible_uaf(const NetworkInstance& inst, const std::function<void(const Uaf&)>& visit,
                                   const OracleConfig& cfg = {}) {
    check_oracle_guard(inst, cfg);
    const std::size_t M = inst.num_bs, K = inst.num_carriers, N = inst.num_users();
    const std::size_t slots = M * K;
    std::vector<std::size_t> owner(slots, N);  // N means idle
    std::vector<long> home(N, -1);
    std::vector<std::size_t> uses(N, 0);
    Uaf beta = Uaf::zeros(inst, UafMode::binary);
    std::function<void(std::size_t)> rec = [&](std::size_t s) {
        if (s == slots) {
            visit(beta);
            return;
        }
        const std::size_t m = s / K, k = s % K;
        rec(s + 1);
        for (std::size_t n = 0; n < N; ++n) {
            if (home[n] >= 0 && static_cast<std::size_t>(home[n]) != m) continue;
            const long saved = home[n];
            home[n] = static_cast<long>(m);
            ++uses[n];
            beta.beta(m, k, n) = 1.0;
            owner[s] = n;
            rec(s + 1);
            beta.beta(m, k, n) = 0.0;
            owner[s] = N;
            if (--uses[n] == 0) home[n] = saved;
        }
    };
    rec(0);
}

/// Number of C3/C4-feasible binary UAFs: sum over disjoint user sets S_m of
/// prod_m A(K, |S_m|), where A(K, s) counts maps from K carriers onto
/// {idle} + S_m that hit every user of S_m.
inline std::uint64_t count_feasible_uaf(std::size_t M, std::size_t K, std::size_t N) {
    auto binom = [](std::size_t n, std::size_t r) {
        std::uint64_t c = 1;
        for (std::size_t i = 1; i <= r; ++i) c = c * (n - r + i) / i;
        return c;
    };
    auto ipow = [](std::uint64_t b, std::size_t e) {
        std::uint64_t r = 1;
        while (e-- > 0) r *= b;
        return r;
    };
    auto onto = [&](std::size_t s) {
        std::int64_t a = 0;
        for (std::size_t j = 0; j <= s; ++j) {
            const auto term = static_cast<std::int64_t>(binom(s, j) * ipow(s - j + 1, K));
            a += (j % 2 == 0) ? term : -term;
        }
        return static_cast<std::uint64_t>(a);
    };
    // ways[u] = number of ways for the first BSs to use exactly u labelled users
    std::vector<std::uint64_t> ways(N + 1, 0);
    ways[0] = 1;
    for (std::size_t m = 0; m < M; ++m) {
        std::vector<std::uint64_t> next(N + 1, 0);
        for (std::size_t used = 0; used <= N; ++used) {
            if (ways[used] == 0) continue;
            for (std::size_t s = 0; used + s <= N && s <= K; ++s) {
                next[used + s] += ways[used] * binom(N - used, s) * onto(s);
            }
        }
        ways = std::move(next);
    }
    std::uint64_t total = 0;
    for (std::uint64_t w : ways) total += w;
    return total;
}

/// {0} followed by L - 1 log-spaced levels from ratio * p_max to p_max.
inline std::vector<double> power_grid(double p_max, const OracleConfig& cfg = {}) {
    cfg.validate();
    std::vector<double> g{0.0};
    const std::size_t L = cfg.power_levels - 1;
    const double lo = std::log(cfg.power_floor_ratio * p_max), hi = std::log(p_max);
    for (std::size_t i = 0; i < L; ++i) {
        g.push_back(L == 1 ? p_max : std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(L - 1)));
    }
    g.back() = p_max;
    return g;
}

struct OracleResult {
    bool feasible = false;
    double objective = 0.0;  ///< 0 when nothing is feasible
    Uaf beta;
    PowerAlloc power;
    std::size_t uaf_count = 0;
    std::size_t points_scored = 0;
};

/// Scores every (UAF, grid power) pair, drops C1/C2 violators, keeps the
/// largest sum rate. Ties keep the first pair in enumeration order.
inline OracleResult brute_force(const NetworkInstance& inst, const OracleConfig& cfg = {}) {
    check_oracle_guard(inst, cfg);
    cfg.validate();
    const std::size_t M = inst.num_bs, K = inst.num_carriers, N = inst.num_users();
    std::vector<std::vector<double>> grid;
    for (std::size_t m = 0; m < M; ++m) grid.push_back(power_grid(inst.p_max[m], cfg));
    OracleResult best;
    best.beta = Uaf::zeros(inst, UafMode::binary);
    best.power = PowerAlloc::zeros(inst);
    std::vector<std::size_t> slice(N);
    for (std::size_t n = 0; n < N; ++n) slice[n] = inst.slice_of(n);

    enumerate_feasible_uaf(
        inst,
        [&](const Uaf& beta) {
            ++best.uaf_count;
            struct Slot {
                std::size_t m, k, n;
            };
            std::vector<Slot> on;
            for (std::size_t m = 0; m < M; ++m) {
                for (std::size_t k = 0; k < K; ++k) {
                    for (std::size_t n = 0; n < N; ++n) {
                        if (beta.beta(m, k, n) > 0.5) on.push_back({m, k, n});
                    }
                }
            }
            std::vector<std::size_t> level(on.size(), 0);
            std::vector<double> load(M * K, 0.0), spent(M, 0.0), slice_rate(inst.num_slices());
            while (true) {
                std::fill(load.begin(), load.end(), 0.0);
                std::fill(spent.begin(), spent.end(), 0.0);
                for (std::size_t i = 0; i < on.size(); ++i) {
                    const double p = grid[on[i].m][level[i]];
                    load[on[i].m * K + on[i].k] = p;
                    spent[on[i].m] += p;
                }
                bool ok = true;
                for (std::size_t m = 0; m < M && ok; ++m) ok = spent[m] <= inst.p_max[m] * (1.0 + 1e-12);
                if (ok) {
                    ++best.points_scored;
                    std::fill(slice_rate.begin(), slice_rate.end(), 0.0);
                    double total = 0.0;
                    for (const Slot& s : on) {
                        double interf = 0.0;
                        for (std::size_t mp = 0; mp < M; ++mp) {
                            if (mp != s.m) interf += inst.gains(mp, s.k, s.n) * load[mp * K + s.k];
                        }
                        const double r =
                            std::log2(1.0 + load[s.m * K + s.k] * inst.gains(s.m, s.k, s.n) / (inst.noise_power + interf));
                        slice_rate[slice[s.n]] += r;
                        total += r;
                    }
                    bool c1 = true;
                    for (std::size_t g = 0; g < inst.num_slices() && c1; ++g) {
                        c1 = slice_rate[g] >= inst.r_rsv[g] - cfg.feasibility_tol;
                    }
                    if (c1 && (!best.feasible || total > best.objective)) {
                        best.feasible = true;
                        best.objective = total;
                        best.beta = beta;
                        best.power = PowerAlloc::zeros(inst);
                        for (std::size_t i = 0; i < on.size(); ++i) {
                            best.power.p(on[i].m, on[i].k, on[i].n) = grid[on[i].m][level[i]];
                        }
                    }
                }
                std::size_t i = 0;
                while (i < on.size() && ++level[i] == cfg.power_levels) level[i++] = 0;
                if (i == on.size()) break;
            }
        },
        cfg);
    return best;
}

}  // namespace vwn
