#pragma once

/// \file
/// Power allocation for a fixed binary UAF. Each assigned tuple contributes
/// gamma_hat, an AGMA upper bound of 1 / (1 + SINR) that is a posynomial in the
/// powers; minimizing the product of gamma_hat maximizes the sum rate.

#include "vwn/agma.hpp"
#include "vwn/core_model.hpp"
#include "vwn/gp.hpp"

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace vwn {

struct PaConfig {
    double eps2 = 1e-6;               ///< inner stopping threshold on ||P(t) - P(t-1)||_F, watts
    std::size_t max_inner_iter = 30;
    double power_floor = 1e-12;       ///< watts, lower box on every power variable
    gp::SolverOptions solver{};
    std::string trace_csv;            ///< append per-iteration powers here when non-empty
};

struct PaGp {
    gp::GpProblem problem;
    std::vector<long> p_var;  ///< by Tensor3::index(m, k, n); -1 for unassigned tuples
    bool trivially_infeasible = false;
    std::string diagnostic;

    std::vector<double> point(const PowerAlloc& p) const {
        std::vector<double> v(problem.num_variables(), 1.0);
        for (std::size_t i = 0; i < p_var.size(); ++i) {
            if (p_var[i] >= 0) v[static_cast<std::size_t>(p_var[i])] = p.p.raw()[i];
        }
        return v;
    }
};

/// gamma_hat of the assigned tuple (m, k, n):
///   (sigma^2 + I) (sigma^2 / kappa0)^-kappa0 prod_{m' on k} (P h / kappa)^-kappa
inline gp::Posynomial gamma_hat(const NetworkInstance& inst, const Uaf& beta, const PaWeights& w, const std::vector<long>& p_var,
                                std::size_t m, std::size_t k, std::size_t n) {
    using gp::Monomial;
    const std::size_t M = inst.num_bs;
    const double s2 = inst.noise_power;
    const std::size_t kn = k * inst.num_users() + n;
    Monomial bound(std::pow(s2 / w.kappa0[kn], -w.kappa0[kn]));
    gp::Posynomial den{Monomial(s2)};
    for (std::size_t mp = 0; mp < M; ++mp) {
        const long owner = carrier_owner(beta, mp, k);
        if (owner < 0) continue;
        const auto id = static_cast<gp::VarId>(p_var[beta.beta.index(mp, k, static_cast<std::size_t>(owner))]);
        const double h = inst.gains(mp, k, n);
        const double kap = w.kappa(mp, k, n);
        bound *= Monomial(std::pow(h / kap, -kap), {{id, -kap}});
        if (mp != m) den += Monomial(h, {{id, 1.0}});
    }
    den *= bound;
    return den;
}

///   minimize prod gamma_hat
///   s.t. 2^R_g prod_{slice g} gamma_hat <= 1
///        sum_{k} P[m][k][.] / P_max[m] <= 1
///        P >= power_floor
/// over the powers of assigned tuples.
inline PaGp build_pa_gp(const NetworkInstance& inst, const Uaf& beta, const PaWeights& w, const PaConfig& cfg) {
    using gp::Monomial;
    const std::size_t M = inst.num_bs, K = inst.num_carriers, N = inst.num_users();
    const Tensor3 shape(M, K, N);
    if (!beta.beta.same_shape(shape)) throw std::invalid_argument("build_pa_gp: UAF shape does not match the instance");
    PaGp out;
    auto& p = out.problem;
    out.p_var.assign(shape.size(), -1);
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t n = 0; n < N; ++n) {
                if (beta.beta(m, k, n) < 0.5) continue;
                out.p_var[shape.index(m, k, n)] = static_cast<long>(p.add_variable(
                    "P[" + std::to_string(m) + "," + std::to_string(k) + "," + std::to_string(n) + "]", cfg.power_floor));
            }
        }
    }
    std::vector<gp::PosynomialProduct> slice(inst.num_slices());
    gp::PosynomialProduct objective;
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t n = 0; n < N; ++n) {
                if (beta.beta(m, k, n) < 0.5) continue;
                gp::Posynomial gh = gamma_hat(inst, beta, w, out.p_var, m, k, n);
                objective.factors.push_back(gh);
                slice[inst.slice_of(n)].factors.push_back(std::move(gh));
            }
        }
    }
    if (objective.factors.empty()) {
        out.trivially_infeasible = true;
        out.diagnostic = "no assigned tuple";
        return out;
    }
    p.objective = std::move(objective);
    for (std::size_t g = 0; g < inst.num_slices(); ++g) {
        if (slice[g].factors.empty()) {
            if (inst.r_rsv[g] > 0.0) {
                out.trivially_infeasible = true;
                out.diagnostic = "slice " + std::to_string(g) + " has a reserved rate but no carrier";
            }
            continue;
        }
        slice[g].factors.front() *= Monomial(std::exp2(inst.r_rsv[g]));
        p.add_inequality(std::move(slice[g]), "C1.2[" + std::to_string(g) + "]");
    }
    for (std::size_t m = 0; m < M; ++m) {
        gp::Posynomial sum;
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t n = 0; n < N; ++n) {
                const long id = out.p_var[shape.index(m, k, n)];
                if (id >= 0) sum += Monomial(1.0 / inst.p_max[m], {{static_cast<gp::VarId>(id), 1.0}});
            }
        }
        if (!sum.terms.empty()) p.add_inequality(std::move(sum), "C2.2[" + std::to_string(m) + "]");
    }
    return out;
}

struct PaResult {
    PowerAlloc power;
    SolveReport report;
};

/// Powers on unassigned tuples are zeroed; assigned ones are floored.
inline PowerAlloc restrict_power(const PowerAlloc& p, const Uaf& beta, double floor) {
    PowerAlloc out = p;
    for (std::size_t i = 0; i < out.p.size(); ++i) {
        out.p.raw()[i] = beta.beta.raw()[i] > 0.5 ? std::max(out.p.raw()[i], floor) : 0.0;
    }
    return out;
}

/// SCA over powers from `start` (P_max/K on assigned tuples when absent).
inline PaResult solve_power_allocation(const NetworkInstance& inst, const Uaf& beta, const PaConfig& cfg = {},
                                       const PowerAlloc* start = nullptr) {
    inst.validate();
    PaResult res;
    PowerAlloc cur = restrict_power(start ? *start : PowerAlloc::uniform(inst, beta), beta, cfg.power_floor);
    res.power = cur;
    res.report.phase_starts.push_back(0);
    for (std::size_t t = 0; t < cfg.max_inner_iter; ++t) {
        const PaWeights w = pa_kappa(cur, inst, beta, cfg.power_floor);
        const PaGp gpb = build_pa_gp(inst, beta, w, cfg);
        if (gpb.trivially_infeasible) {
            res.report.status = SolveStatus::infeasible;
            res.report.diagnostic = gpb.diagnostic;
            return res;
        }
        gp::SolverOptions opt = cfg.solver;
        opt.initial_point = gpb.point(cur);
        const gp::GpSolution sol = gp::solve(gpb.problem, opt);
        ++res.report.iterations;
        res.report.kkt_residuals.push_back(sol.kkt_residual);
        res.report.gp_optimal.push_back(sol.status == gp::GpStatus::optimal);
        if (sol.status == gp::GpStatus::infeasible) {
            res.report.status = SolveStatus::infeasible;
            res.report.diagnostic = "power GP infeasible at inner iteration " + std::to_string(t + 1) + " (" + sol.diagnostic + ")";
            return res;
        }
        PowerAlloc next = PowerAlloc::zeros(inst);
        for (std::size_t i = 0; i < gpb.p_var.size(); ++i) {
            if (gpb.p_var[i] >= 0) next.p.raw()[i] = sol.x[static_cast<std::size_t>(gpb.p_var[i])];
        }
        const double delta = frobenius_distance(next.p, cur.p);
        cur = std::move(next);
        res.report.objective_trace.push_back(total_objective(inst, cur, beta));
        if (!cfg.trace_csv.empty()) {
            std::ofstream os(cfg.trace_csv, std::ios::app);
            for (std::size_t i = 0; i < cur.p.size(); ++i) {
                if (gpb.p_var[i] >= 0) os << t + 1 << ',' << i << ',' << cur.p.raw()[i] << '\n';
            }
        }
        if (delta <= cfg.eps2) break;
        if (t + 1 == cfg.max_inner_iter) res.report.status = SolveStatus::max_iter;
    }
    res.power = std::move(cur);
    return res;
}

}  // namespace vwn
