#pragma once

/// \file
/// Alternating association / power optimization, and the baseline that pins
/// every user to the BS with the highest mean SINR.

#include "vwn/core_model.hpp"
#include "vwn/power_allocation.hpp"
#include "vwn/user_association.hpp"

#include <chrono>
#include <limits>
#include <string>
#include <vector>

namespace vwn {

struct JointConfig {
    UaConfig ua{};
    PaConfig pa{};
    double eps1 = 1e-5;               ///< outer threshold on ||beta(t) - beta(t-1)||_F
    double eps2 = 1e-6;               ///< outer threshold on ||P(t) - P(t-1)||_F
    std::size_t max_outer_iter = 20;
    double oscillation_tol = 1e-6;    ///< objective drop that ends the alternation
    double feasibility_tol = 1e-6;
};

enum class AllocationStatus { feasible, infeasible };

inline const char* to_string(AllocationStatus s) { return s == AllocationStatus::feasible ? "feasible" : "infeasible"; }

struct AllocationResult {
    Uaf beta;
    PowerAlloc power;
    RateTable rates;
    AllocationStatus status = AllocationStatus::infeasible;
    double total_rate = 0.0;  ///< 0 when infeasible
    std::size_t outer_iters = 0;
    std::vector<std::size_t> ua_inner_iters;  ///< GP solves per outer iteration
    std::vector<std::size_t> pa_inner_iters;
    std::vector<SolveReport> ua_reports;
    std::vector<SolveReport> pa_reports;
    std::vector<double> outer_trace;  ///< sum rate after each outer iteration
    double beta_delta = std::numeric_limits<double>::infinity();   ///< last outer ||delta beta||_F
    double power_delta = std::numeric_limits<double>::infinity();  ///< last outer ||delta P||_F
    bool converged = false;
    bool oscillated = false;
    double wall_time = 0.0;  ///< seconds
    std::string diagnostic;
};

namespace detail {

/// Starting powers for a new UAF: keep previous powers where the tuple stays
/// assigned, P_max/K elsewhere.
inline PowerAlloc carry_power(const NetworkInstance& inst, const PowerAlloc& prev, const Uaf& beta) {
    PowerAlloc out = PowerAlloc::uniform(inst, beta);
    for (std::size_t i = 0; i < out.p.size(); ++i) {
        if (beta.beta.raw()[i] > 0.5 && prev.p.raw()[i] > 0.0) out.p.raw()[i] = prev.p.raw()[i];
    }
    return out;
}

template <class Associate>
AllocationResult alternate(const NetworkInstance& inst, const JointConfig& cfg, Associate associate) {
    const auto started = std::chrono::steady_clock::now();
    inst.validate();
    AllocationResult res;
    std::vector<double> load = uniform_loads(inst);
    bool have_prev = false, have_best = false;
    Uaf beta_prev;
    PowerAlloc p_prev;
    double best_obj = -1.0;
    for (std::size_t t = 0; t < cfg.max_outer_iter; ++t) {
        ++res.outer_iters;
        const RateTable rates = association_rates(inst, load);
        UaResult ua = associate(rates);
        res.ua_inner_iters.push_back(ua.report.iterations);
        res.ua_reports.push_back(ua.report);
        if (ua.report.status == SolveStatus::infeasible) {
            res.diagnostic = "association infeasible at outer iteration " + std::to_string(t + 1) + ": " + ua.report.diagnostic;
            break;
        }
        const Uaf& beta = ua.binary;
        const PowerAlloc start = have_prev ? carry_power(inst, p_prev, beta) : PowerAlloc::uniform(inst, beta);
        PaResult pa = solve_power_allocation(inst, beta, cfg.pa, &start);
        res.pa_inner_iters.push_back(pa.report.iterations);
        res.pa_reports.push_back(pa.report);
        if (pa.report.status == SolveStatus::infeasible) {
            res.diagnostic = "power allocation infeasible at outer iteration " + std::to_string(t + 1) + ": " + pa.report.diagnostic;
            break;
        }
        const double obj = total_objective(inst, pa.power, beta);
        res.outer_trace.push_back(obj);
        if (have_prev) {
            res.beta_delta = frobenius_distance(beta.beta, beta_prev.beta);
            res.power_delta = frobenius_distance(pa.power.p, p_prev.p);
        }
        if (have_best && obj < best_obj - cfg.oscillation_tol) {
            res.oscillated = true;
            res.diagnostic = "objective dropped at outer iteration " + std::to_string(t + 1) + "; kept the best iterate";
            break;
        }
        if (!have_best || obj >= best_obj) {
            res.beta = beta;
            res.power = pa.power;
            best_obj = obj;
            have_best = true;
        }
        beta_prev = beta;
        p_prev = pa.power;
        have_prev = true;
        load = carrier_loads(inst, pa.power, beta);
        if (res.beta_delta <= cfg.eps1 && res.power_delta <= cfg.eps2) {
            res.converged = true;
            break;
        }
    }
    if (have_best) {
        const ConstraintReport rep = evaluate_constraints(inst, res.power, res.beta, cfg.feasibility_tol);
        res.rates = rate_table(inst, res.power, res.beta);
        if (rep.all(cfg.feasibility_tol)) {
            res.status = AllocationStatus::feasible;
            res.total_rate = res.rates.total_rate;
        } else if (res.diagnostic.empty()) {
            res.diagnostic = "final allocation violates C1-C4";
        }
    } else {
        res.beta = Uaf::zeros(inst, UafMode::binary);
        res.power = PowerAlloc::zeros(inst);
        res.rates = rate_table(inst, res.power, res.beta);
    }
    if (res.status == AllocationStatus::infeasible) res.total_rate = 0.0;
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return res;
}

}  // namespace detail

/// Alternates association at the current powers with power allocation at
/// the rounded association.
inline AllocationResult solve_joint(const NetworkInstance& inst, const JointConfig& cfg = {}) {
    return detail::alternate(inst, cfg, [&](const RateTable& rates) { return solve_user_association(inst, rates, cfg.ua); });
}

/// Mean over carriers of the SINR each user would see from each BS with every
/// BS radiating P_max/K on every carrier. Returns the argmax BS per user,
/// ties to the lowest index.
inline std::vector<std::size_t> assign_by_mean_sinr(const NetworkInstance& inst) {
    inst.validate();
    const std::size_t M = inst.num_bs, K = inst.num_carriers, N = inst.num_users();
    std::vector<std::size_t> out(N, 0);
    for (std::size_t n = 0; n < N; ++n) {
        double best = -1.0;
        for (std::size_t m = 0; m < M; ++m) {
            double mean = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                double interf = 0.0;
                for (std::size_t mp = 0; mp < M; ++mp) {
                    if (mp != m) interf += inst.gains(mp, k, n) * inst.p_max[mp] / static_cast<double>(K);
                }
                mean += inst.gains(m, k, n) * inst.p_max[m] / static_cast<double>(K) / (inst.noise_power + interf);
            }
            mean /= static_cast<double>(K);
            if (mean > best) {
                best = mean;
                out[n] = m;
            }
        }
    }
    return out;
}

/// Same alternation with each user pinned to its max-mean-SINR BS and the
/// single-BS constraints dropped.
inline AllocationResult solve_baseline(const NetworkInstance& inst, const JointConfig& cfg = {}) {
    const std::vector<std::size_t> home = assign_by_mean_sinr(inst);
    return detail::alternate(inst, cfg,
                             [&](const RateTable& rates) { return solve_user_association_fixed_bs(inst, rates, home, cfg.ua); });
}

}  // namespace vwn
