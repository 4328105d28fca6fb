#pragma once

/// \file
/// Physical problem data of a multi-cell OFDMA network shared by several
/// slices, and exact evaluation of rates, interference and the per-slice
/// rate (C1), per-BS power (C2), intra-cell exclusivity (C3) and single-BS
/// association (C4) constraints.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace vwn {

/// Dense (BS, sub-carrier, user) tensor.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t m, std::size_t k, std::size_t n, double fill = 0.0)
        : m_(m), k_(k), n_(n), data_(m * k * n, fill) {}

    std::size_t bs_count() const noexcept { return m_; }
    std::size_t carrier_count() const noexcept { return k_; }
    std::size_t user_count() const noexcept { return n_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t m, std::size_t k, std::size_t n) { return data_[index(m, k, n)]; }
    double operator()(std::size_t m, std::size_t k, std::size_t n) const { return data_[index(m, k, n)]; }

    double& at(std::size_t m, std::size_t k, std::size_t n) {
        check(m, k, n);
        return data_[index(m, k, n)];
    }
    double at(std::size_t m, std::size_t k, std::size_t n) const {
        check(m, k, n);
        return data_[index(m, k, n)];
    }

    std::size_t index(std::size_t m, std::size_t k, std::size_t n) const noexcept { return (m * k_ + k) * n_ + n; }

    std::vector<double>& raw() noexcept { return data_; }
    const std::vector<double>& raw() const noexcept { return data_; }

    bool same_shape(const Tensor3& o) const noexcept { return m_ == o.m_ && k_ == o.k_ && n_ == o.n_; }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;

private:
    void check(std::size_t m, std::size_t k, std::size_t n) const {
        if (m >= m_ || k >= k_ || n >= n_) {
            throw std::out_of_range("Tensor3 index (" + std::to_string(m) + "," + std::to_string(k) + "," +
                                    std::to_string(n) + ") out of range");
        }
    }

    std::size_t m_ = 0, k_ = 0, n_ = 0;
    std::vector<double> data_;
};

/// Frobenius norm of the difference of two equally-shaped tensors.
inline double frobenius_distance(const Tensor3& a, const Tensor3& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("frobenius_distance: shape mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.raw()[i] - b.raw()[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Full problem data: topology, channel gains, slices and budgets.
struct NetworkInstance {
    std::size_t num_bs = 0;
    std::size_t num_carriers = 0;
    std::vector<std::size_t> users_per_slice;
    Tensor3 gains;               ///< h[m][k][n], linear power gain
    double noise_power = 1e-11;  ///< watts per sub-carrier
    std::vector<double> p_max;   ///< watts, per BS
    std::vector<double> r_rsv;   ///< bps/Hz, per slice
    std::vector<Point2> bs_positions;
    std::vector<Point2> user_positions;
    double carrier_bandwidth = 180e3;  ///< Hz; kept for reporting only, rates stay in bps/Hz

    std::size_t num_slices() const noexcept { return users_per_slice.size(); }
    std::size_t num_users() const noexcept {
        return std::accumulate(users_per_slice.begin(), users_per_slice.end(), std::size_t{0});
    }

    /// Slice of global user index n.
    std::size_t slice_of(std::size_t n) const {
        std::size_t first = 0;
        for (std::size_t g = 0; g < users_per_slice.size(); ++g) {
            if (n < first + users_per_slice[g]) return g;
            first += users_per_slice[g];
        }
        throw std::out_of_range("slice_of: user index " + std::to_string(n) + " out of range");
    }

    /// Global user indices belonging to slice g.
    std::vector<std::size_t> users_of(std::size_t g) const {
        if (g >= users_per_slice.size()) throw std::out_of_range("users_of: slice index out of range");
        std::size_t first = 0;
        for (std::size_t i = 0; i < g; ++i) first += users_per_slice[i];
        std::vector<std::size_t> out(users_per_slice[g]);
        std::iota(out.begin(), out.end(), first);
        return out;
    }

    /// Throws std::invalid_argument when any documented invariant is broken.
    void validate() const {
        const std::size_t n = num_users();
        if (num_bs == 0 || num_carriers == 0 || users_per_slice.empty() || n == 0) {
            throw std::invalid_argument("NetworkInstance: empty dimension");
        }
        if (gains.bs_count() != num_bs || gains.carrier_count() != num_carriers || gains.user_count() != n) {
            throw std::invalid_argument("NetworkInstance: gain tensor shape does not match (M, K, N)");
        }
        for (double h : gains.raw()) {
            if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("NetworkInstance: gains must be positive and finite");
        }
        if (!(noise_power > 0.0)) throw std::invalid_argument("NetworkInstance: noise power must be positive");
        if (p_max.size() != num_bs) throw std::invalid_argument("NetworkInstance: p_max needs one entry per BS");
        for (double p : p_max) {
            if (!(p > 0.0)) throw std::invalid_argument("NetworkInstance: p_max must be positive");
        }
        if (r_rsv.size() != num_slices()) throw std::invalid_argument("NetworkInstance: r_rsv needs one entry per slice");
        for (double r : r_rsv) {
            if (!(r >= 0.0)) throw std::invalid_argument("NetworkInstance: r_rsv must be nonnegative");
        }
    }
};

enum class UafMode { relaxed, binary };

/// User association factor beta[m][k][n]: joint BS and sub-carrier assignment.
struct Uaf {
    Tensor3 beta;
    UafMode mode = UafMode::relaxed;

    static Uaf zeros(const NetworkInstance& inst, UafMode mode) {
        return {Tensor3(inst.num_bs, inst.num_carriers, inst.num_users(), 0.0), mode};
    }
    static Uaf ones(const NetworkInstance& inst) {
        return {Tensor3(inst.num_bs, inst.num_carriers, inst.num_users(), 1.0), UafMode::relaxed};
    }

    /// Serving BS of user n under a binary UAF, or -1 when the user is idle.
    long serving_bs(std::size_t n) const {
        for (std::size_t m = 0; m < beta.bs_count(); ++m) {
            for (std::size_t k = 0; k < beta.carrier_count(); ++k) {
                if (beta(m, k, n) > 0.5) return static_cast<long>(m);
            }
        }
        return -1;
    }
};

/// Transmit powers P[m][k][n] in watts.
struct PowerAlloc {
    Tensor3 p;

    static PowerAlloc zeros(const NetworkInstance& inst) {
        return {Tensor3(inst.num_bs, inst.num_carriers, inst.num_users(), 0.0)};
    }

    /// P_max/K on every assigned tuple of a binary UAF.
    static PowerAlloc uniform(const NetworkInstance& inst, const Uaf& beta) {
        PowerAlloc out = zeros(inst);
        for (std::size_t m = 0; m < inst.num_bs; ++m) {
            const double share = inst.p_max[m] / static_cast<double>(inst.num_carriers);
            for (std::size_t k = 0; k < inst.num_carriers; ++k) {
                for (std::size_t n = 0; n < inst.num_users(); ++n) {
                    if (beta.beta(m, k, n) > 0.5) out.p(m, k, n) = share;
                }
            }
        }
        return out;
    }
};

struct RateTable {
    Tensor3 r;                        ///< bps/Hz per (m, k, n)
    std::vector<double> per_slice_rate;
    double total_rate = 0.0;
};

namespace detail {

inline void check_indices(const NetworkInstance& inst, std::size_t m, std::size_t k, std::size_t n) {
    if (m >= inst.num_bs || k >= inst.num_carriers || n >= inst.num_users()) {
        throw std::out_of_range("index (" + std::to_string(m) + "," + std::to_string(k) + "," + std::to_string(n) +
                                ") out of range");
    }
}

inline void check_shapes(const NetworkInstance& inst, const PowerAlloc& power, const Uaf& beta) {
    const Tensor3 ref(inst.num_bs, inst.num_carriers, inst.num_users());
    if (!power.p.same_shape(ref) || !beta.beta.same_shape(ref)) {
        throw std::invalid_argument("power/UAF tensor shape does not match the instance");
    }
}

}  // namespace detail

/// Power actually radiated on (m, k, n): a relaxed UAF leaves P unmasked, a
/// binary one counts power only where beta = 1.
inline double effective_power(const PowerAlloc& power, const Uaf& beta, std::size_t m, std::size_t k, std::size_t n) {
    if (beta.mode == UafMode::binary && beta.beta(m, k, n) < 0.5) return 0.0;
    return power.p(m, k, n);
}

/// Total power BS m radiates on sub-carrier k.
inline double carrier_power(const PowerAlloc& power, const Uaf& beta, std::size_t m, std::size_t k) {
    double sum = 0.0;
    for (std::size_t n = 0; n < power.p.user_count(); ++n) sum += effective_power(power, beta, m, k, n);
    return sum;
}

/// Interference at user n on sub-carrier k when served by BS m: the power of
/// every other BS on k, received through the user's own channel from that BS.
inline double interference(const NetworkInstance& inst, const PowerAlloc& power, const Uaf& beta, std::size_t m,
                           std::size_t k, std::size_t n) {
    detail::check_indices(inst, m, k, n);
    double sum = 0.0;
    for (std::size_t other = 0; other < inst.num_bs; ++other) {
        if (other == m) continue;
        sum += inst.gains(other, k, n) * carrier_power(power, beta, other, k);
    }
    return sum;
}

/// Spectral efficiency log2(1 + P h / (noise + I)) of (m, k, n).
inline double rate(const NetworkInstance& inst, const PowerAlloc& power, const Uaf& beta, std::size_t m, std::size_t k,
                   std::size_t n) {
    detail::check_indices(inst, m, k, n);
    const double own = effective_power(power, beta, m, k, n);
    if (own < 0.0) throw std::invalid_argument("rate: negative power");
    const double sinr = own * inst.gains(m, k, n) / (inst.noise_power + interference(inst, power, beta, m, k, n));
    return std::log2(1.0 + sinr);
}

/// Rates of every tuple plus beta-weighted slice and total sums.
inline RateTable rate_table(const NetworkInstance& inst, const PowerAlloc& power, const Uaf& beta) {
    detail::check_shapes(inst, power, beta);
    const std::size_t M = inst.num_bs, K = inst.num_carriers, N = inst.num_users();
    RateTable out{Tensor3(M, K, N), std::vector<double>(inst.num_slices(), 0.0), 0.0};
    std::vector<double> load(M * K);
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t k = 0; k < K; ++k) load[m * K + k] = carrier_power(power, beta, m, k);
    }
    for (std::size_t n = 0; n < N; ++n) {
        const std::size_t g = inst.slice_of(n);
        for (std::size_t k = 0; k < K; ++k) {
            double received = 0.0;
            for (std::size_t m = 0; m < M; ++m) received += inst.gains(m, k, n) * load[m * K + k];
            for (std::size_t m = 0; m < M; ++m) {
                const double own = effective_power(power, beta, m, k, n);
                const double interf = received - inst.gains(m, k, n) * load[m * K + k];
                const double r = std::log2(1.0 + own * inst.gains(m, k, n) / (inst.noise_power + std::max(interf, 0.0)));
                out.r(m, k, n) = r;
                out.per_slice_rate[g] += beta.beta(m, k, n) * r;
            }
        }
    }
    for (double s : out.per_slice_rate) out.total_rate += s;
    return out;
}

/// Per-(m, k) radiated power, row-major over (m, k).
inline std::vector<double> carrier_loads(const NetworkInstance& inst, const PowerAlloc& power, const Uaf& beta) {
    detail::check_shapes(inst, power, beta);
    std::vector<double> load(inst.num_bs * inst.num_carriers);
    for (std::size_t m = 0; m < inst.num_bs; ++m) {
        for (std::size_t k = 0; k < inst.num_carriers; ++k) load[m * inst.num_carriers + k] = carrier_power(power, beta, m, k);
    }
    return load;
}

/// P_max/K on every (m, k).
inline std::vector<double> uniform_loads(const NetworkInstance& inst) {
    std::vector<double> load(inst.num_bs * inst.num_carriers);
    for (std::size_t m = 0; m < inst.num_bs; ++m) {
        for (std::size_t k = 0; k < inst.num_carriers; ++k) {
            load[m * inst.num_carriers + k] = inst.p_max[m] / static_cast<double>(inst.num_carriers);
        }
    }
    return load;
}

/// Rates each user would see on each (m, k) given per-carrier powers,
/// regardless of who currently holds the carrier. Carriers on which their BS
/// radiates nothing are probed at P_max/K so they remain assignable.
inline RateTable association_rates(const NetworkInstance& inst, const std::vector<double>& load) {
    const std::size_t M = inst.num_bs, K = inst.num_carriers, N = inst.num_users();
    if (load.size() != M * K) throw std::invalid_argument("association_rates: need one load per (m, k)");
    RateTable out{Tensor3(M, K, N), std::vector<double>(inst.num_slices(), 0.0), 0.0};
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t k = 0; k < K; ++k) {
            double received = 0.0;
            for (std::size_t m = 0; m < M; ++m) received += inst.gains(m, k, n) * load[m * K + k];
            for (std::size_t m = 0; m < M; ++m) {
                const double own = load[m * K + k];
                const double interf = std::max(received - inst.gains(m, k, n) * own, 0.0);
                const double signal = own > 0.0 ? own : inst.p_max[m] / static_cast<double>(K);
                out.r(m, k, n) = std::log2(1.0 + signal * inst.gains(m, k, n) / (inst.noise_power + interf));
            }
        }
    }
    return out;
}

struct ConstraintReport {
    std::vector<double> c1_residual;  ///< slice rate - R_rsv
    std::vector<double> c2_residual;  ///< P_max - spent power
    std::vector<bool> c1_ok;
    std::vector<bool> c2_ok;
    bool c3 = true;
    bool c4 = true;

    bool all(double tol = 1e-6) const {
        for (double r : c1_residual) {
            if (r < -tol) return false;
        }
        for (double r : c2_residual) {
            if (r < -tol) return false;
        }
        return c3 && c4;
    }
};

/// Residuals and flags for C1-C4. C3/C4 are checked on entries above 0.5 in
/// binary mode and on any positive entry in relaxed mode.
inline ConstraintReport evaluate_constraints(const NetworkInstance& inst, const PowerAlloc& power, const Uaf& beta,
                                             double tol = 1e-6) {
    const RateTable rates = rate_table(inst, power, beta);
    const std::size_t M = inst.num_bs, K = inst.num_carriers, N = inst.num_users();
    ConstraintReport rep;
    for (std::size_t g = 0; g < inst.num_slices(); ++g) {
        rep.c1_residual.push_back(rates.per_slice_rate[g] - inst.r_rsv[g]);
        rep.c1_ok.push_back(rep.c1_residual.back() >= -tol);
    }
    for (std::size_t m = 0; m < M; ++m) {
        double spent = 0.0;
        for (std::size_t k = 0; k < K; ++k) spent += carrier_power(power, beta, m, k);
        rep.c2_residual.push_back(inst.p_max[m] - spent);
        rep.c2_ok.push_back(rep.c2_residual.back() >= -tol);
    }
    const double on = beta.mode == UafMode::binary ? 0.5 : 0.0;
    for (std::size_t m = 0; m < M && rep.c3; ++m) {
        for (std::size_t k = 0; k < K; ++k) {
            double sum = 0.0;
            for (std::size_t n = 0; n < N; ++n) sum += beta.mode == UafMode::binary ? (beta.beta(m, k, n) > on) : beta.beta(m, k, n);
            if (sum > 1.0 + (beta.mode == UafMode::binary ? 0.0 : tol)) {
                rep.c3 = false;
                break;
            }
        }
    }
    for (std::size_t n = 0; n < N && rep.c4; ++n) {
        std::size_t used = 0;
        for (std::size_t m = 0; m < M; ++m) {
            bool any = false;
            for (std::size_t k = 0; k < K; ++k) any = any || beta.beta(m, k, n) > on;
            used += any ? 1 : 0;
        }
        if (used > 1) rep.c4 = false;
    }
    return rep;
}

/// Sum over all tuples of beta * R.
inline double total_objective(const NetworkInstance& inst, const PowerAlloc& power, const Uaf& beta) {
    return rate_table(inst, power, beta).total_rate;
}

enum class SolveStatus { converged, max_iter, infeasible };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iter: return "max_iter";
        case SolveStatus::infeasible: return "infeasible";
    }
    return "?";
}

/// Per-solve trace shared by the iterative solvers.
struct SolveReport {
    SolveStatus status = SolveStatus::converged;
    std::size_t iterations = 0;              ///< GP solves performed
    std::vector<double> objective_trace;     ///< true objective after each GP solve
    std::vector<std::size_t> phase_starts;   ///< trace index where each stage begins
    std::vector<double> kkt_residuals;       ///< one per GP solve; inf when the GP was infeasible
    std::vector<bool> gp_optimal;            ///< one per GP solve
    std::string diagnostic;
};

}  // namespace vwn
