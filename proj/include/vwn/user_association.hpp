#pragma once

/// \file
/// Sub-carrier and BS assignment at fixed power: the relaxed association GP
/// iterated with AGMA weights, and recovery of a binary UAF.
///
/// A joint solve runs in three stages. Discovery iterates the GP without the
/// single-BS constraints from the all-ones start, letting each user's mass
/// settle on the cells that serve it best. Projection keeps each user's
/// dominant BS and floors the rest. Refinement iterates the full GP, with the
/// single-BS relaxation, from the projected point. The relaxation only admits
/// strictly feasible points when the off-home mass of each user is tiny, so it
/// cannot be started from all-ones when M > 1.

#include "vwn/agma.hpp"
#include "vwn/core_model.hpp"
#include "vwn/gp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace vwn {

struct UaConfig {
    double xi1 = 1e7;                 ///< constant of the objective constraint, well above any sum rate
    double eps1 = 1e-5;               ///< inner stopping threshold on ||beta(t) - beta(t-1)||_F
    std::size_t max_inner_iter = 30;  ///< per stage
    double beta_floor = 1e-10;
    double c4_slack = 1e-3;           ///< theta in s <= (1 + theta)(1 + x^2)
    double start_pull = 0.02;         ///< solver starts are pulled this far inside C3 and beta <= 1
    double start_margin = 1e-4;       ///< phase-I skip threshold for pulled starts
    gp::SolverOptions solver{};
    std::string trace_csv;            ///< append per-iteration beta here when non-empty
};

/// Which beta variables exist and whether C4.1-C4.4 are imposed.
struct UaStructure {
    Tensor3 active;  ///< 1 where beta is a variable; empty means every tuple
    bool c4 = true;

    bool on(std::size_t m, std::size_t k, std::size_t n) const { return active.size() == 0 || active(m, k, n) > 0.5; }
};

struct UaIterate {
    Uaf beta;
    std::vector<double> x;  ///< sum_k beta, [m * N + n]
    std::vector<double> y;  ///< sum_{m,k} beta, [n]
    std::vector<double> s;  ///< [m * N + n]
    double x0 = 0.0;
};

/// Fills x, y and s from beta. s sits strictly between its C4.1 and C4.2 bounds
/// when that interval is nonempty.
inline UaIterate make_iterate(const Uaf& beta, double x0, double c4_slack, double floor) {
    const std::size_t M = beta.beta.bs_count(), K = beta.beta.carrier_count(), N = beta.beta.user_count();
    UaIterate it{beta, std::vector<double>(M * N), std::vector<double>(N, 0.0), std::vector<double>(M * N), x0};
    for (double& b : it.beta.beta.raw()) b = std::clamp(b, floor, 1.0);
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t m = 0; m < M; ++m) {
            double x = 0.0;
            for (std::size_t k = 0; k < K; ++k) x += it.beta.beta(m, k, n);
            it.x[m * N + n] = x;
            it.y[n] += x;
        }
    }
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < N; ++n) {
            const double x = it.x[m * N + n];
            const double lo = 1.0 + x * it.y[n];
            const double hi = (1.0 + c4_slack) * (1.0 + x * x);
            it.s[m * N + n] = lo < hi ? 0.5 * (lo + hi) : lo;
        }
    }
    return it;
}

/// The association GP and the variable ids of its unknowns (-1 when absent).
struct UaGp {
    gp::GpProblem problem;
    std::vector<long> beta_var;  ///< by Tensor3::index(m, k, n)
    std::vector<long> x_var;     ///< [m * N + n]
    std::vector<long> y_var;     ///< [n]
    std::vector<long> s_var;     ///< [m * N + n]
    gp::VarId x0_var = 0;

    /// Warm start for the solver from an iterate.
    std::vector<double> point(const UaIterate& it) const {
        std::vector<double> v(problem.num_variables(), 1.0);
        for (std::size_t i = 0; i < beta_var.size(); ++i) {
            if (beta_var[i] >= 0) v[static_cast<std::size_t>(beta_var[i])] = it.beta.beta.raw()[i];
        }
        for (std::size_t i = 0; i < x_var.size(); ++i) {
            if (x_var[i] >= 0) v[static_cast<std::size_t>(x_var[i])] = it.x[i];
            if (s_var[i] >= 0) v[static_cast<std::size_t>(s_var[i])] = it.s[i];
        }
        for (std::size_t i = 0; i < y_var.size(); ++i) {
            if (y_var[i] >= 0) v[static_cast<std::size_t>(y_var[i])] = it.y[i];
        }
        v[x0_var] = it.x0;
        return v;
    }
};

namespace detail {

/// Rates below this are treated as this value inside monomials.
inline constexpr double kRateFloor = 1e-12;

/// Strictly interior solver start near `it`: beta clamped to
/// [10 floor, 1 - pull] and scaled so every carrier sum stays below 1 - pull,
/// then x, y and s rebuilt. Only the solver start moves; the expansion point
/// stays at `it`.
inline UaIterate interior_start(const UaIterate& it, const UaConfig& cfg) {
    Uaf b = it.beta;
    const std::size_t M = b.beta.bs_count(), K = b.beta.carrier_count(), N = b.beta.user_count();
    const double cap = 1.0 - cfg.start_pull;
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t k = 0; k < K; ++k) {
            double sum = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                double& v = b.beta(m, k, n);
                v = std::clamp(v, 10.0 * cfg.beta_floor, cap);
                sum += v;
            }
            if (sum > cap) {
                for (std::size_t n = 0; n < N; ++n) b.beta(m, k, n) *= cap / sum;
            }
        }
    }
    return make_iterate(b, it.x0, cfg.c4_slack, cfg.beta_floor);
}

}  // namespace detail

/// Builds the association GP around `prev`:
///   minimize x0
///   s.t. xi1 (x0/c0)^-c0 prod (beta R / c)^-c <= 1
///        R_g prod_{slice g} (beta R / phi)^-phi <= 1          (skipped when R_g = 0)
///        sum_n beta[m][k][n] <= 1
///        1/s + x y / s <= 1
///        lambda^lambda alpha^alpha s x^(-2 alpha) / (1 + theta) <= 1
///        x prod_k (beta / nu)^-nu = 1
///        y prod_{m,k} (beta / eta)^-eta = 1
///        beta_floor <= beta <= 1
/// The last four groups are present only when `st.c4` holds.
inline UaGp build_ua_gp(const NetworkInstance& inst, const RateTable& rates, const UaIterate& prev, const UaWeights& w,
                        const UaConfig& cfg, const UaStructure& st = {}) {
    using gp::Monomial;
    using gp::Posynomial;
    const std::size_t M = inst.num_bs, K = inst.num_carriers, N = inst.num_users();
    const Tensor3 shape(M, K, N);
    if (!rates.r.same_shape(shape) || !prev.beta.beta.same_shape(shape)) {
        throw std::invalid_argument("build_ua_gp: tensor dimensions do not match the instance");
    }
    if (st.active.size() != 0 && !st.active.same_shape(shape)) throw std::invalid_argument("build_ua_gp: mask shape mismatch");
    if (st.c4 && (w.nu.size() != shape.size() || w.lambda.size() != M * N)) {
        throw std::invalid_argument("build_ua_gp: missing C4 weights");
    }
    UaGp out;
    auto& p = out.problem;
    out.beta_var.assign(shape.size(), -1);
    out.x_var.assign(M * N, -1);
    out.s_var.assign(M * N, -1);
    out.y_var.assign(N, -1);
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t n = 0; n < N; ++n) {
                if (!st.on(m, k, n)) continue;
                out.beta_var[shape.index(m, k, n)] = static_cast<long>(p.add_variable(
                    "b[" + std::to_string(m) + "," + std::to_string(k) + "," + std::to_string(n) + "]", cfg.beta_floor, 1.0));
            }
        }
    }
    if (st.c4) {
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t n = 0; n < N; ++n) {
                out.x_var[m * N + n] = static_cast<long>(p.add_variable("x[" + std::to_string(m) + "," + std::to_string(n) + "]"));
            }
        }
        for (std::size_t n = 0; n < N; ++n) out.y_var[n] = static_cast<long>(p.add_variable("y[" + std::to_string(n) + "]"));
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t n = 0; n < N; ++n) {
                out.s_var[m * N + n] = static_cast<long>(p.add_variable("s[" + std::to_string(m) + "," + std::to_string(n) + "]"));
            }
        }
    }
    out.x0_var = p.add_variable("x0");
    auto bvar = [&](std::size_t m, std::size_t k, std::size_t n) {
        return static_cast<gp::VarId>(out.beta_var[shape.index(m, k, n)]);
    };
    auto R = [&](std::size_t m, std::size_t k, std::size_t n) { return std::max(rates.r(m, k, n), detail::kRateFloor); };

    p.objective = Monomial::variable(out.x0_var);

    // (i) objective constraint
    {
        Monomial mono(cfg.xi1);
        mono *= Monomial(std::pow(w.c0, w.c0), {{out.x0_var, -w.c0}});
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t k = 0; k < K; ++k) {
                for (std::size_t n = 0; n < N; ++n) {
                    if (!st.on(m, k, n)) continue;
                    const double c = w.c(m, k, n);
                    mono *= Monomial(std::pow(R(m, k, n) / c, -c), {{bvar(m, k, n), -c}});
                }
            }
        }
        p.add_inequality(mono, "objective");
    }
    // C1.1
    for (std::size_t g = 0; g < inst.num_slices(); ++g) {
        if (!(inst.r_rsv[g] > 0.0)) continue;
        Monomial mono(inst.r_rsv[g]);
        bool any = false;
        for (std::size_t n : inst.users_of(g)) {
            for (std::size_t m = 0; m < M; ++m) {
                for (std::size_t k = 0; k < K; ++k) {
                    if (!st.on(m, k, n)) continue;
                    const double f = w.phi(m, k, n);
                    mono *= Monomial(std::pow(R(m, k, n) / f, -f), {{bvar(m, k, n), -f}});
                    any = true;
                }
            }
        }
        if (!any) throw std::invalid_argument("build_ua_gp: slice " + std::to_string(g) + " has no assignable tuple");
        p.add_inequality(mono, "C1.1[" + std::to_string(g) + "]");
    }
    // C3.1
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t k = 0; k < K; ++k) {
            Posynomial sum;
            for (std::size_t n = 0; n < N; ++n) {
                if (st.on(m, k, n)) sum += Monomial::variable(bvar(m, k, n));
            }
            if (!sum.terms.empty()) p.add_inequality(sum, "C3.1[" + std::to_string(m) + "," + std::to_string(k) + "]");
        }
    }
    if (!st.c4) return out;
    auto xid = [&](std::size_t m, std::size_t n) { return static_cast<gp::VarId>(out.x_var[m * N + n]); };
    auto sid = [&](std::size_t m, std::size_t n) { return static_cast<gp::VarId>(out.s_var[m * N + n]); };
    auto yid = [&](std::size_t n) { return static_cast<gp::VarId>(out.y_var[n]); };
    auto tag = [](std::size_t m, std::size_t n) { return "[" + std::to_string(m) + "," + std::to_string(n) + "]"; };
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < N; ++n) {
            Posynomial c41(Monomial::variable(sid(m, n), -1.0));
            c41 += Monomial(1.0, {{xid(m, n), 1.0}, {yid(n), 1.0}, {sid(m, n), -1.0}});
            p.add_inequality(c41, "C4.1" + tag(m, n));
        }
    }
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < N; ++n) {
            const double la = w.lambda[m * N + n], al = w.alpha[m * N + n];
            const double coef = std::pow(la, la) * std::pow(al, al) / (1.0 + cfg.c4_slack);
            p.add_inequality(Monomial(coef, {{sid(m, n), 1.0}, {xid(m, n), -2.0 * al}}), "C4.2" + tag(m, n));
        }
    }
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t n = 0; n < N; ++n) {
            Monomial mono = Monomial::variable(xid(m, n));
            for (std::size_t k = 0; k < K; ++k) {
                const double nu = w.nu(m, k, n);
                mono *= Monomial(std::pow(nu, nu), {{bvar(m, k, n), -nu}});
            }
            p.add_equality(mono, "C4.3" + tag(m, n));
        }
    }
    for (std::size_t n = 0; n < N; ++n) {
        Monomial mono = Monomial::variable(yid(n));
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t k = 0; k < K; ++k) {
                const double eta = w.eta(m, k, n);
                mono *= Monomial(std::pow(eta, eta), {{bvar(m, k, n), -eta}});
            }
        }
        p.add_equality(mono, "C4.4[" + std::to_string(n) + "]");
    }
    return out;
}

/// Binary UAF: each user keeps its BS with the largest beta mass, then each
/// (m, k) goes to the homed user with the largest beta. Ties go to the lowest
/// index. Carriers with no homed user stay idle.
inline Uaf round_uaf(const Uaf& relaxed) {
    const Tensor3& b = relaxed.beta;
    const std::size_t M = b.bs_count(), K = b.carrier_count(), N = b.user_count();
    std::vector<std::size_t> home(N, 0);
    for (std::size_t n = 0; n < N; ++n) {
        double best = -1.0;
        for (std::size_t m = 0; m < M; ++m) {
            double mass = 0.0;
            for (std::size_t k = 0; k < K; ++k) mass += b(m, k, n);
            if (mass > best) {
                best = mass;
                home[n] = m;
            }
        }
    }
    Uaf out{Tensor3(M, K, N, 0.0), UafMode::binary};
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t k = 0; k < K; ++k) {
            long pick = -1;
            double best = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                if (home[n] != m) continue;
                if (pick < 0 || b(m, k, n) > best) {
                    pick = static_cast<long>(n);
                    best = b(m, k, n);
                }
            }
            if (pick >= 0 && best > 0.0) out.beta(m, k, static_cast<std::size_t>(pick)) = 1.0;
        }
    }
    return out;
}

struct UaResult {
    Uaf relaxed;
    Uaf binary;
    UaIterate last;
    SolveReport report;
};

namespace detail {

inline double weighted_rate(const Uaf& beta, const RateTable& rates) {
    double s = 0.0;
    for (std::size_t i = 0; i < beta.beta.size(); ++i) s += beta.beta.raw()[i] * rates.r.raw()[i];
    return s;
}

inline void dump_beta(const std::string& path, const char* stage, std::size_t iter, const Uaf& beta) {
    if (path.empty()) return;
    std::ofstream os(path, std::ios::app);
    const Tensor3& b = beta.beta;
    for (std::size_t m = 0; m < b.bs_count(); ++m) {
        for (std::size_t k = 0; k < b.carrier_count(); ++k) {
            for (std::size_t n = 0; n < b.user_count(); ++n) {
                os << stage << ',' << iter << ',' << m << ',' << k << ',' << n << ',' << b(m, k, n) << '\n';
            }
        }
    }
}

/// One SCA stage. Returns false when the first GP of the stage is infeasible.
inline bool run_ua_stage(const NetworkInstance& inst, const RateTable& rates, const UaConfig& cfg, const UaStructure& st,
                         const char* stage, UaIterate& it, SolveReport& rep) {
    rep.phase_starts.push_back(rep.objective_trace.size());
    for (std::size_t t = 0; t < cfg.max_inner_iter; ++t) {
        UaWeights w = prop2_weights(inst, it.beta, it.x0, rates, st.active, cfg.beta_floor);
        if (st.c4) {
            const UaWeights w1 = prop1_weights(it.beta, cfg.beta_floor);
            w.lambda = w1.lambda;
            w.alpha = w1.alpha;
            w.nu = w1.nu;
            w.eta = w1.eta;
        }
        const UaGp gpb = build_ua_gp(inst, rates, it, w, cfg, st);
        gp::SolverOptions opt = cfg.solver;
        opt.initial_point = gpb.point(interior_start(it, cfg));
        opt.interior_margin = std::min(opt.interior_margin, cfg.start_margin);
        const gp::GpSolution sol = gp::solve(gpb.problem, opt);
        ++rep.iterations;
        rep.kkt_residuals.push_back(sol.kkt_residual);
        rep.gp_optimal.push_back(sol.status == gp::GpStatus::optimal);
        if (sol.status == gp::GpStatus::infeasible) {
            rep.diagnostic = std::string(stage) + ": association GP infeasible at inner iteration " + std::to_string(t + 1) +
                             " (" + sol.diagnostic + ")";
            return t > 0;
        }
        UaIterate next = it;
        for (std::size_t i = 0; i < gpb.beta_var.size(); ++i) {
            next.beta.beta.raw()[i] = gpb.beta_var[i] >= 0 ? sol.x[static_cast<std::size_t>(gpb.beta_var[i])] : 0.0;
        }
        for (std::size_t i = 0; i < gpb.x_var.size(); ++i) {
            if (gpb.x_var[i] >= 0) next.x[i] = sol.x[static_cast<std::size_t>(gpb.x_var[i])];
            if (gpb.s_var[i] >= 0) next.s[i] = sol.x[static_cast<std::size_t>(gpb.s_var[i])];
        }
        for (std::size_t i = 0; i < gpb.y_var.size(); ++i) {
            if (gpb.y_var[i] >= 0) next.y[i] = sol.x[static_cast<std::size_t>(gpb.y_var[i])];
        }
        next.x0 = sol.x[gpb.x0_var];
        const double delta = frobenius_distance(next.beta.beta, it.beta.beta);
        it = std::move(next);
        rep.objective_trace.push_back(weighted_rate(it.beta, rates));
        dump_beta(cfg.trace_csv, stage, t + 1, it.beta);
        if (delta <= cfg.eps1) return true;
        if (t + 1 == cfg.max_inner_iter) rep.status = SolveStatus::max_iter;
    }
    return true;
}

}  // namespace detail

/// Association at fixed rates: discovery without C4 from all-ones, projection
/// onto each user's dominant BS, refinement with C4, rounding.
inline UaResult solve_user_association(const NetworkInstance& inst, const RateTable& rates, const UaConfig& cfg = {}) {
    inst.validate();
    const std::size_t M = inst.num_bs, K = inst.num_carriers, N = inst.num_users();
    UaResult res;
    res.report.status = SolveStatus::converged;
    UaIterate it = make_iterate(Uaf::ones(inst), cfg.xi1 / 2.0, cfg.c4_slack, cfg.beta_floor);
    if (!detail::run_ua_stage(inst, rates, cfg, UaStructure{{}, false}, "discovery", it, res.report)) {
        res.report.status = SolveStatus::infeasible;
        res.relaxed = it.beta;
        res.binary = Uaf::zeros(inst, UafMode::binary);
        res.last = it;
        return res;
    }
    // projection onto the dominant BS of each user
    Uaf proj = it.beta;
    for (std::size_t n = 0; n < N; ++n) {
        std::size_t home = 0;
        double best = -1.0;
        for (std::size_t m = 0; m < M; ++m) {
            double mass = 0.0;
            for (std::size_t k = 0; k < K; ++k) mass += proj.beta(m, k, n);
            if (mass > best) {
                best = mass;
                home = m;
            }
        }
        for (std::size_t m = 0; m < M; ++m) {
            if (m == home) continue;
            for (std::size_t k = 0; k < K; ++k) proj.beta(m, k, n) = cfg.beta_floor;
        }
    }
    UaIterate refined = make_iterate(proj, it.x0, cfg.c4_slack, cfg.beta_floor);
    const SolveStatus before = res.report.status;
    if (detail::run_ua_stage(inst, rates, cfg, UaStructure{{}, true}, "refinement", refined, res.report)) {
        it = std::move(refined);
    } else {
        // keep the projected point; the diagnostic records why
        it = make_iterate(proj, it.x0, cfg.c4_slack, cfg.beta_floor);
        res.report.status = before;
    }
    res.relaxed = it.beta;
    res.binary = round_uaf(it.beta);
    res.last = std::move(it);
    return res;
}

/// Association with every user pinned to a given BS and C4 dropped.
inline UaResult solve_user_association_fixed_bs(const NetworkInstance& inst, const RateTable& rates,
                                                const std::vector<std::size_t>& home, const UaConfig& cfg = {}) {
    inst.validate();
    const std::size_t M = inst.num_bs, K = inst.num_carriers, N = inst.num_users();
    if (home.size() != N) throw std::invalid_argument("solve_user_association_fixed_bs: need one BS per user");
    UaStructure st{Tensor3(M, K, N, 0.0), false};
    Uaf start = Uaf::zeros(inst, UafMode::relaxed);
    for (std::size_t n = 0; n < N; ++n) {
        if (home[n] >= M) throw std::out_of_range("solve_user_association_fixed_bs: BS index out of range");
        for (std::size_t k = 0; k < K; ++k) {
            st.active(home[n], k, n) = 1.0;
            start.beta(home[n], k, n) = 1.0;
        }
    }
    UaResult res;
    UaIterate it = make_iterate(start, cfg.xi1 / 2.0, cfg.c4_slack, cfg.beta_floor);
    for (std::size_t i = 0; i < st.active.size(); ++i) {
        if (st.active.raw()[i] < 0.5) it.beta.beta.raw()[i] = 0.0;
    }
    if (!detail::run_ua_stage(inst, rates, cfg, st, "fixed-bs", it, res.report)) {
        res.report.status = SolveStatus::infeasible;
    }
    res.relaxed = it.beta;
    res.binary = res.report.status == SolveStatus::infeasible ? Uaf::zeros(inst, UafMode::binary) : round_uaf(it.beta);
    res.last = std::move(it);
    return res;
}

}  // namespace vwn
