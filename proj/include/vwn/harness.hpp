#pragma once

/// \file
/// Monte Carlo driver over random scenarios, with joint and baseline run on
/// the same channels per trial, plus outage, coverage and complexity metrics.

#include "vwn/joint_solver.hpp"
#include "vwn/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vwn {

/// Solver settings for Monte Carlo runs. The association stages stop after
/// 10 GP solves each; larger caps change mean rates by well under 1% and
/// triple the cost at K = 8.
inline JointConfig experiment_solver_defaults() {
    JointConfig cfg;
    cfg.ua.max_inner_iter = 10;
    return cfg;
}

struct ExperimentConfig {
    ScenarioConfig scenario{};
    JointConfig solver = experiment_solver_defaults();
    std::size_t threads = 0;  ///< 0 picks std::thread::hardware_concurrency()
};

enum class Algo { joint, baseline };

inline const char* to_string(Algo a) { return a == Algo::joint ? "joint" : "baseline"; }

struct AlgoRecord {
    double total_rate = 0.0;           ///< 0 when infeasible
    bool feasible = false;
    std::vector<bool> slice_outage;    ///< slice rate below R_rsv, per slice
    std::vector<double> user_rates;    ///< sum over (m, k) of beta R, per user
    std::size_t outer_iters = 0;
    std::size_t ua_inner_iters = 0;    ///< GP solves summed over outer iterations
    std::size_t pa_inner_iters = 0;
    bool converged = false;
    bool oscillated = false;
    double wall_time = 0.0;
    std::string diagnostic;
};

struct TrialRecord {
    std::uint64_t trial = 0;
    AlgoRecord joint;
    AlgoRecord baseline;
    std::vector<bool> edge_user;

    const AlgoRecord& get(Algo a) const { return a == Algo::joint ? joint : baseline; }
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<TrialRecord> trials;  ///< ordered by trial index
};

/// Per-algorithm slice outages and user rates of one allocation.
inline AlgoRecord record_allocation(const NetworkInstance& inst, const AllocationResult& res, double tol = 1e-6) {
    AlgoRecord r;
    r.feasible = res.status == AllocationStatus::feasible;
    r.total_rate = r.feasible ? res.total_rate : 0.0;
    r.outer_iters = res.outer_iters;
    for (std::size_t v : res.ua_inner_iters) r.ua_inner_iters += v;
    for (std::size_t v : res.pa_inner_iters) r.pa_inner_iters += v;
    r.converged = res.converged;
    r.oscillated = res.oscillated;
    r.wall_time = res.wall_time;
    r.diagnostic = res.diagnostic;
    const std::size_t M = inst.num_bs, K = inst.num_carriers, N = inst.num_users();
    r.user_rates.assign(N, 0.0);
    std::vector<double> slice(inst.num_slices(), 0.0);
    if (r.feasible) {
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t k = 0; k < K; ++k) {
                for (std::size_t n = 0; n < N; ++n) r.user_rates[n] += res.beta.beta(m, k, n) * res.rates.r(m, k, n);
            }
        }
        slice = res.rates.per_slice_rate;
    }
    for (std::size_t g = 0; g < inst.num_slices(); ++g) r.slice_outage.push_back(slice[g] < inst.r_rsv[g] - tol);
    return r;
}

inline TrialRecord run_trial(const ExperimentConfig& cfg, std::uint64_t trial) {
    const NetworkInstance inst = generate_scenario(cfg.scenario, trial);
    TrialRecord rec;
    rec.trial = trial;
    for (std::size_t n = 0; n < inst.num_users(); ++n) {
        rec.edge_user.push_back(is_edge_user(inst, n, cfg.scenario.cell_radius, cfg.scenario.edge_threshold));
    }
    auto guarded = [&](auto solve) {
        try {
            return record_allocation(inst, solve(inst, cfg.solver));
        } catch (const std::exception& e) {
            AlgoRecord r;
            r.user_rates.assign(inst.num_users(), 0.0);
            for (double rsv : inst.r_rsv) r.slice_outage.push_back(rsv > 0.0);
            r.diagnostic = std::string("solver error: ") + e.what();
            return r;
        }
    };
    rec.joint = guarded([](const NetworkInstance& i, const JointConfig& c) { return solve_joint(i, c); });
    rec.baseline = guarded([](const NetworkInstance& i, const JointConfig& c) { return solve_baseline(i, c); });
    return rec;
}

/// Trials are spread over a worker pool and stored by index, so the result
/// does not depend on the thread count.
inline ExperimentResult run_monte_carlo(const ExperimentConfig& cfg) {
    cfg.scenario.validate();
    ExperimentResult out;
    out.config = cfg;
    const std::size_t T = cfg.scenario.trials;
    out.trials.resize(T);
    std::size_t workers = cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, T);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t t = next++; t < T; t = next++) out.trials[t] = run_trial(cfg, t);
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    return out;
}

struct AlgoSummary {
    double mean_total_rate = 0.0;
    double outage_prob = 0.0;  ///< share of (trial, slice) pairs in outage
    double feasible_fraction = 0.0;
    double mean_outer_iters = 0.0;
    double mean_inner_iters_ua = 0.0;
    double mean_inner_iters_pa = 0.0;
};

inline AlgoSummary summarize(const ExperimentResult& res, Algo a) {
    AlgoSummary s;
    if (res.trials.empty()) return s;
    std::size_t outages = 0, slots = 0;
    for (const TrialRecord& t : res.trials) {
        const AlgoRecord& r = t.get(a);
        s.mean_total_rate += r.total_rate;
        s.feasible_fraction += r.feasible ? 1.0 : 0.0;
        s.mean_outer_iters += static_cast<double>(r.outer_iters);
        s.mean_inner_iters_ua += static_cast<double>(r.ua_inner_iters);
        s.mean_inner_iters_pa += static_cast<double>(r.pa_inner_iters);
        for (bool o : r.slice_outage) {
            outages += o ? 1 : 0;
            ++slots;
        }
    }
    const auto T = static_cast<double>(res.trials.size());
    s.mean_total_rate /= T;
    s.feasible_fraction /= T;
    s.mean_outer_iters /= T;
    s.mean_inner_iters_ua /= T;
    s.mean_inner_iters_pa /= T;
    s.outage_prob = slots == 0 ? 0.0 : static_cast<double>(outages) / static_cast<double>(slots);
    return s;
}

struct CdfTable {
    std::vector<double> rate_bin;
    std::vector<double> cdf_joint;
    std::vector<double> cdf_baseline;
};

struct CoverageMetrics {
    CdfTable edge;    ///< per-trial aggregate rate of edge users
    CdfTable center;  ///< per-trial aggregate rate of center users
    double edge_mean_joint = 0.0;
    double edge_mean_baseline = 0.0;
    double center_mean_joint = 0.0;
    double center_mean_baseline = 0.0;
    std::size_t edge_trials = 0;    ///< trials with at least one edge user
    std::size_t center_trials = 0;
    std::vector<std::string> warnings;
};

namespace detail {

/// Empirical CDFs of two sample sets on bins at `resolution` times the
/// largest sample, from 0 to that sample.
inline CdfTable empirical_cdf(const std::vector<double>& a, const std::vector<double>& b, double resolution) {
    CdfTable t;
    if (a.empty() && b.empty()) return t;
    double hi = 0.0;
    for (double v : a) hi = std::max(hi, v);
    for (double v : b) hi = std::max(hi, v);
    const auto steps = static_cast<std::size_t>(std::llround(1.0 / resolution));
    auto cdf = [](const std::vector<double>& s, double x) {
        if (s.empty()) return 0.0;
        const auto c = std::count_if(s.begin(), s.end(), [&](double v) { return v <= x; });
        return static_cast<double>(c) / static_cast<double>(s.size());
    };
    for (std::size_t i = 0; i <= steps; ++i) {
        const double x = i == steps ? hi : hi * static_cast<double>(i) * resolution;
        t.rate_bin.push_back(x);
        t.cdf_joint.push_back(cdf(a, x));
        t.cdf_baseline.push_back(cdf(b, x));
    }
    return t;
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace detail

inline CoverageMetrics coverage_metrics(const ExperimentResult& res, double resolution = 0.05) {
    if (!(resolution > 0.0 && resolution <= 1.0)) throw std::invalid_argument("coverage_metrics: resolution outside (0, 1]");
    CoverageMetrics cm;
    std::vector<double> ej, eb, cj, cb;
    for (const TrialRecord& t : res.trials) {
        double edge_j = 0.0, edge_b = 0.0, cen_j = 0.0, cen_b = 0.0;
        bool any_edge = false, any_center = false;
        for (std::size_t n = 0; n < t.edge_user.size(); ++n) {
            const double rj = n < t.joint.user_rates.size() ? t.joint.user_rates[n] : 0.0;
            const double rb = n < t.baseline.user_rates.size() ? t.baseline.user_rates[n] : 0.0;
            if (t.edge_user[n]) {
                any_edge = true;
                edge_j += rj;
                edge_b += rb;
            } else {
                any_center = true;
                cen_j += rj;
                cen_b += rb;
            }
        }
        if (any_edge) {
            ej.push_back(edge_j);
            eb.push_back(edge_b);
        }
        if (any_center) {
            cj.push_back(cen_j);
            cb.push_back(cen_b);
        }
    }
    cm.edge_trials = ej.size();
    cm.center_trials = cj.size();
    if (ej.empty()) cm.warnings.emplace_back("no edge users in any trial; edge CDF is empty");
    if (cj.empty()) cm.warnings.emplace_back("no center users in any trial; center CDF is empty");
    cm.edge = detail::empirical_cdf(ej, eb, resolution);
    cm.center = detail::empirical_cdf(cj, cb, resolution);
    cm.edge_mean_joint = detail::mean_of(ej);
    cm.edge_mean_baseline = detail::mean_of(eb);
    cm.center_mean_joint = detail::mean_of(cj);
    cm.center_mean_baseline = detail::mean_of(cb);
    return cm;
}

struct ComplexityEstimate {
    double c1 = 0.0;  ///< constraints of the association GP
    double c2 = 0.0;  ///< constraints of the power GP
    double i1 = 0.0;  ///< operations to build the association GP
    double i2 = 0.0;  ///< operations to build the power GP
    double iterations1 = 0.0;  ///< log(c1 / (t0 rho)) / log(xi)
    double iterations2 = 0.0;
    double total1 = 0.0;  ///< i1 * iterations1
    double total2 = 0.0;
};

///   c1 = G + MK + 4MN + 1          c2 = G + M
///   i1 = K M^2 N + 6KMN + MKGN     i2 = GMKN + 2MKN
inline ComplexityEstimate complexity_estimate(std::size_t M, std::size_t K, std::size_t N, std::size_t G, double t0, double rho,
                                              double xi) {
    if (M == 0 || K == 0 || N == 0 || G == 0) throw std::invalid_argument("complexity_estimate: dimensions must be positive");
    if (!(t0 > 0.0)) throw std::invalid_argument("complexity_estimate: t0 must be positive");
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("complexity_estimate: rho must lie in (0, 1)");
    if (!(xi > 1.0)) throw std::invalid_argument("complexity_estimate: xi must exceed 1");
    const auto m = static_cast<double>(M), k = static_cast<double>(K), n = static_cast<double>(N), g = static_cast<double>(G);
    ComplexityEstimate e;
    e.c1 = g + m * k + 4.0 * m * n + 1.0;
    e.c2 = g + m;
    e.i1 = k * m * m * n + 6.0 * k * m * n + m * k * g * n;
    e.i2 = g * m * k * n + 2.0 * m * k * n;
    e.iterations1 = std::log(e.c1 / (t0 * rho)) / std::log(xi);
    e.iterations2 = std::log(e.c2 / (t0 * rho)) / std::log(xi);
    e.total1 = e.i1 * e.iterations1;
    e.total2 = e.i2 * e.iterations2;
    return e;
}

}  // namespace vwn
