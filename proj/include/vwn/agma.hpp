#pragma once

/// \file
/// Arithmetic-geometric mean approximation: a posynomial f = sum_k g_k is
/// bounded below by the monomial prod_k (g_k / w_k)^{w_k} with
/// w_k = g_k(x_prev) / f(x_prev), tight at x_prev. Also the weight families
/// used by the association and power problems.

#include "vwn/core_model.hpp"
#include "vwn/gp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace vwn {

inline constexpr double kWeightFloor = 1e-10;

struct AgmaWeights {
    std::vector<double> w;
};

/// Raise entries below `floor` to `floor` and rescale to unit sum.
inline void floor_and_normalize(std::vector<double>& w, double floor = kWeightFloor) {
    double sum = 0.0;
    for (double& v : w) {
        v = std::max(v, floor);
        sum += v;
    }
    for (double& v : w) v /= sum;
}

inline AgmaWeights agma_weights(const gp::Posynomial& f, const std::vector<double>& x_prev, double floor = kWeightFloor) {
    if (f.terms.empty()) throw std::invalid_argument("agma_weights: empty posynomial");
    AgmaWeights out;
    out.w.reserve(f.terms.size());
    double total = 0.0;
    for (const auto& t : f.terms) {
        out.w.push_back(gp::evaluate(t, x_prev));
        total += out.w.back();
    }
    for (double& v : out.w) v /= total;
    floor_and_normalize(out.w, floor);
    return out;
}

/// prod_k (g_k / w_k)^{w_k} for given weights.
inline gp::Monomial monomial_from_weights(const gp::Posynomial& f, const AgmaWeights& w) {
    if (w.w.size() != f.terms.size()) throw std::invalid_argument("monomial_from_weights: weight count mismatch");
    gp::Monomial out(1.0);
    for (std::size_t k = 0; k < f.terms.size(); ++k) {
        gp::Monomial g = f.terms[k];
        g.coefficient /= w.w[k];
        out *= g.pow(w.w[k]);
    }
    return out;
}

inline gp::Monomial monomial_lower_bound(const gp::Posynomial& f, const std::vector<double>& x_prev) {
    return monomial_from_weights(f, agma_weights(f, x_prev));
}

/// Weights of the association problem. Matrices over (m, n) are stored
/// row-major as [m * N + n].
struct UaWeights {
    std::vector<double> lambda;  ///< constant term of 1 + x^2
    std::vector<double> alpha;   ///< x^2 term of 1 + x^2
    Tensor3 nu;                  ///< per-carrier share of x = sum_k beta
    Tensor3 eta;                 ///< per-(m, k) share of y = sum_{m,k} beta
    Tensor3 phi;                 ///< per-slice share of the slice rate
    Tensor3 c;                   ///< share of x0 + sum beta R
    double c0 = 0.0;             ///< x0 share
};

/// Weights for C4.2 (1 + x^2), C4.3 (sum_k beta) and C4.4 (sum_{m,k} beta).
inline UaWeights prop1_weights(const Uaf& beta_prev, double floor = kWeightFloor) {
    const Tensor3& b = beta_prev.beta;
    const std::size_t M = b.bs_count(), K = b.carrier_count(), N = b.user_count();
    UaWeights w;
    w.lambda.resize(M * N);
    w.alpha.resize(M * N);
    w.nu = Tensor3(M, K, N);
    w.eta = Tensor3(M, K, N);
    std::vector<double> v;
    for (std::size_t n = 0; n < N; ++n) {
        v.clear();
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t k = 0; k < K; ++k) v.push_back(std::max(b(m, k, n), floor));
        }
        std::vector<double> eta = v;
        double tot = 0.0;
        for (double e : eta) tot += e;
        for (double& e : eta) e /= tot;
        floor_and_normalize(eta, floor);
        for (std::size_t m = 0; m < M; ++m) {
            std::vector<double> nu(v.begin() + static_cast<long>(m * K), v.begin() + static_cast<long>((m + 1) * K));
            double x = 0.0;
            for (double e : nu) x += e;
            for (double& e : nu) e /= x;
            floor_and_normalize(nu, floor);
            for (std::size_t k = 0; k < K; ++k) {
                w.nu(m, k, n) = nu[k];
                w.eta(m, k, n) = eta[m * K + k];
            }
            std::vector<double> la{1.0 / (x * x + 1.0), x * x / (x * x + 1.0)};
            floor_and_normalize(la, floor);
            w.lambda[m * N + n] = la[0];
            w.alpha[m * N + n] = la[1];
        }
    }
    return w;
}

/// Weights for C1.1 (phi, per slice over beta R) and for the objective
/// constraint (c0 on x0, c on beta R). `active` selects which tuples carry a
/// beta variable; an empty tensor means all of them.
///
/// The c floor is taken relative to sum c rather than absolutely: x0 sits near
/// the large constant of the objective constraint, so every c is tiny and an
/// absolute floor would swamp the rate terms.
inline UaWeights prop2_weights(const NetworkInstance& inst, const Uaf& beta_prev, double x0_prev, const RateTable& rates,
                               const Tensor3& active = {}, double floor = kWeightFloor) {
    const std::size_t M = inst.num_bs, K = inst.num_carriers, N = inst.num_users();
    if (!(x0_prev > 0.0)) throw std::invalid_argument("prop2_weights: x0_prev must be positive");
    const bool all = active.size() == 0;
    auto on = [&](std::size_t m, std::size_t k, std::size_t n) { return all || active(m, k, n) > 0.5; };
    UaWeights w;
    w.phi = Tensor3(M, K, N);
    w.c = Tensor3(M, K, N);
    auto br = [&](std::size_t m, std::size_t k, std::size_t n) {
        return std::max(beta_prev.beta(m, k, n), floor) * rates.r(m, k, n);
    };
    for (std::size_t g = 0; g < inst.num_slices(); ++g) {
        std::vector<double> v;
        std::vector<std::size_t> idx;
        double tot = 0.0;
        for (std::size_t n : inst.users_of(g)) {
            for (std::size_t m = 0; m < M; ++m) {
                for (std::size_t k = 0; k < K; ++k) {
                    if (!on(m, k, n)) continue;
                    v.push_back(br(m, k, n));
                    idx.push_back(w.phi.index(m, k, n));
                    tot += v.back();
                }
            }
        }
        if (v.empty()) continue;
        if (!(tot > 0.0)) throw std::invalid_argument("prop2_weights: slice has zero rate at the expansion point");
        for (double& e : v) e /= tot;
        floor_and_normalize(v, floor);
        for (std::size_t i = 0; i < v.size(); ++i) w.phi.raw()[idx[i]] = v[i];
    }
    double sum = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t n = 0; n < N; ++n) {
                if (on(m, k, n)) sum += br(m, k, n);
            }
        }
    }
    const double denom = x0_prev + sum;
    w.c0 = x0_prev / denom;
    const double rest = 1.0 - w.c0;
    const double cfloor = floor * rest;
    double csum = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t n = 0; n < N; ++n) {
                if (!on(m, k, n)) continue;
                w.c(m, k, n) = std::max(br(m, k, n) / denom, cfloor);
                csum += w.c(m, k, n);
            }
        }
    }
    const double total = w.c0 + csum;
    w.c0 /= total;
    for (double& e : w.c.raw()) e /= total;
    return w;
}

/// Weights of the numerator posynomial sigma^2 + sum_{m' on k} P h[m'][k][n]
/// for every receiver (k, n) holding a carrier.
struct PaWeights {
    Tensor3 kappa;                ///< kappa(m', k, n): term of BS m' at receiver (k, n)
    std::vector<double> kappa0;   ///< noise term, [k * N + n]
};

/// Owner of (m, k) under a binary UAF, or -1 when idle.
inline long carrier_owner(const Uaf& beta, std::size_t m, std::size_t k) {
    for (std::size_t n = 0; n < beta.beta.user_count(); ++n) {
        if (beta.beta(m, k, n) > 0.5) return static_cast<long>(n);
    }
    return -1;
}

inline PaWeights pa_kappa(const PowerAlloc& p_prev, const NetworkInstance& inst, const Uaf& beta,
                          double power_floor = 1e-12, double floor = kWeightFloor) {
    const std::size_t M = inst.num_bs, K = inst.num_carriers, N = inst.num_users();
    PaWeights w{Tensor3(M, K, N), std::vector<double>(K * N, 0.0)};
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<long> owner(M);
        for (std::size_t m = 0; m < M; ++m) owner[m] = carrier_owner(beta, m, k);
        for (std::size_t m = 0; m < M; ++m) {
            if (owner[m] < 0) continue;
            const auto n = static_cast<std::size_t>(owner[m]);
            std::vector<double> v{inst.noise_power};
            std::vector<std::size_t> bs;
            for (std::size_t mp = 0; mp < M; ++mp) {
                if (owner[mp] < 0) continue;
                const double p = std::max(p_prev.p(mp, k, static_cast<std::size_t>(owner[mp])), power_floor);
                v.push_back(p * inst.gains(mp, k, n));
                bs.push_back(mp);
            }
            double tot = 0.0;
            for (double e : v) tot += e;
            for (double& e : v) e /= tot;
            floor_and_normalize(v, floor);
            w.kappa0[k * N + n] = v[0];
            for (std::size_t i = 0; i < bs.size(); ++i) w.kappa(bs[i], k, n) = v[i + 1];
        }
    }
    return w;
}

}  // namespace vwn
